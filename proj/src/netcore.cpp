// Copyright 2026 The dmzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmzsim/netcore.hpp"

#include "dmzsim/error.hpp"

#include <charconv>

namespace dmzsim {

Ipv4Address Ipv4Address::parse(std::string_view text)
{
    std::uint32_t value = 0;
    int count = 0;
    std::size_t pos = 0;
    while (true) {
        const auto dot = text.find('.', pos);
        const auto part = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
        if (++count > 4)
            throw Error(Errc::wrong_arity, "expected four octets in '" + std::string(text) + "'");
        if (part.empty() || part.size() > 3)
            throw Error(Errc::malformed_octet, "bad octet '" + std::string(part) + "'");
        unsigned octet = 0;
        const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), octet);
        if (ec != std::errc{} || end != part.data() + part.size() || octet > 255)
            throw Error(Errc::malformed_octet, "bad octet '" + std::string(part) + "'");
        value = (value << 8) | octet;
        if (dot == std::string_view::npos)
            break;
        pos = dot + 1;
    }
    if (count != 4)
        throw Error(Errc::wrong_arity, "expected four octets in '" + std::string(text) + "'");
    return Ipv4Address(value);
}

std::array<std::uint8_t, 4> Ipv4Address::octets() const noexcept
{
    return {std::uint8_t(value_ >> 24), std::uint8_t(value_ >> 16), std::uint8_t(value_ >> 8), std::uint8_t(value_)};
}

std::string Ipv4Address::to_string() const
{
    const auto o = octets();
    return std::to_string(o[0]) + '.' + std::to_string(o[1]) + '.' + std::to_string(o[2]) + '.' + std::to_string(o[3]);
}

CidrBlock::CidrBlock(Ipv4Address base, int prefix_len) : base_(base), prefix_len_(prefix_len)
{
    if (prefix_len < 0 || prefix_len > 32)
        throw Error(Errc::malformed_cidr, "prefix length " + std::to_string(prefix_len) + " out of range");
}

CidrBlock CidrBlock::parse(std::string_view text)
{
    const auto slash = text.find('/');
    if (slash == std::string_view::npos)
        throw Error(Errc::malformed_cidr, "missing prefix length in '" + std::string(text) + "'");
    Ipv4Address base;
    try {
        base = Ipv4Address::parse(text.substr(0, slash));
    } catch (const Error& e) {
        throw Error(Errc::malformed_cidr, e.what());
    }
    const auto len_text = text.substr(slash + 1);
    int len = -1;
    const auto [end, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
    if (len_text.empty() || ec != std::errc{} || end != len_text.data() + len_text.size() || len < 0 || len > 32)
        throw Error(Errc::malformed_cidr, "bad prefix length in '" + std::string(text) + "'");
    return CidrBlock(base, len);
}

std::uint32_t CidrBlock::mask() const noexcept
{
    return prefix_len_ == 0 ? 0u : ~std::uint32_t(0) << (32 - prefix_len_);
}

bool CidrBlock::overlaps(const CidrBlock& other) const noexcept
{
    const auto shorter = prefix_len_ < other.prefix_len_ ? *this : other;
    const auto longer = prefix_len_ < other.prefix_len_ ? other : *this;
    return shorter.contains(longer.network());
}

std::string CidrBlock::to_string() const
{
    return base_.to_string() + '/' + std::to_string(prefix_len_);
}

std::string_view protocol_name(Protocol p) noexcept
{
    switch (p) {
    case Protocol::tcp: return "tcp";
    case Protocol::udp: return "udp";
    case Protocol::icmp: return "icmp";
    }
    return "?";
}

std::optional<Protocol> parse_protocol(std::string_view text) noexcept
{
    if (text == "tcp")
        return Protocol::tcp;
    if (text == "udp")
        return Protocol::udp;
    if (text == "icmp")
        return Protocol::icmp;
    return std::nullopt;
}

std::string TcpFlags::to_string() const
{
    std::string out;
    if (syn)
        out += 'S';
    if (fin)
        out += 'F';
    if (rst)
        out += 'R';
    if (ack)
        out += '.';
    return out.empty() ? "none" : out;
}

std::string Endpoint::to_string() const
{
    return addr.to_string() + ':' + std::to_string(port);
}

FiveTuple FiveTuple::normalized() const noexcept
{
    const auto r = reversed();
    return r < *this ? r : *this;
}

std::string FiveTuple::to_string() const
{
    return std::string(protocol_name(protocol)) + ' ' + src.to_string() + "->" + dst.to_string();
}

bool Packet::well_formed() const noexcept
{
    if (protocol != Protocol::tcp && flags.any())
        return false;
    if (protocol != Protocol::icmp && icmp_ref)
        return false;
    return true;
}

std::string Packet::to_string() const
{
    std::string out = '#' + std::to_string(id) + ' ' + tuple().to_string();
    if (protocol == Protocol::tcp)
        out += " [" + flags.to_string() + ']';
    if (icmp_ref)
        out += " ref=(" + icmp_ref->to_string() + ')';
    return out;
}

Packet make_tcp(Endpoint src, Endpoint dst, TcpFlags flags)
{
    Packet p;
    p.src = src;
    p.dst = dst;
    p.protocol = Protocol::tcp;
    p.flags = flags;
    p.origin = src.addr;
    return p;
}

Packet make_udp(Endpoint src, Endpoint dst)
{
    Packet p;
    p.src = src;
    p.dst = dst;
    p.protocol = Protocol::udp;
    p.origin = src.addr;
    return p;
}

Packet make_icmp_error(Ipv4Address src, Ipv4Address dst, const FiveTuple& ref)
{
    Packet p;
    p.src = {src, 0};
    p.dst = {dst, 0};
    p.protocol = Protocol::icmp;
    p.icmp_ref = ref;
    p.origin = src;
    return p;
}

} // namespace dmzsim
