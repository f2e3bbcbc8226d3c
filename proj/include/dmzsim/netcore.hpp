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

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dmzsim {

// Simulation time. 1000 ticks make one simulated second unless a scenario
// says otherwise.
using Tick = std::int64_t;
using Port = std::uint16_t;
using PacketId = std::uint64_t;

class Ipv4Address {
public:
    constexpr Ipv4Address() = default;
    constexpr explicit Ipv4Address(std::uint32_t value) : value_(value) {}
    constexpr Ipv4Address(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : value_((std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) | (std::uint32_t(c) << 8) | d)
    {
    }

    // Throws Error{malformed_octet | wrong_arity}.
    static Ipv4Address parse(std::string_view text);

    constexpr std::uint32_t value() const noexcept { return value_; }
    std::array<std::uint8_t, 4> octets() const noexcept;
    std::string to_string() const;

    constexpr bool is_unspecified() const noexcept { return value_ == 0; }

    friend constexpr auto operator<=>(Ipv4Address, Ipv4Address) = default;

private:
    std::uint32_t value_ = 0;
};

inline Ipv4Address parse_address(std::string_view text) { return Ipv4Address::parse(text); }

// An address with a prefix length. The base keeps its host bits so an
// interface assignment like 192.168.56.2/24 round-trips as written.
class CidrBlock {
public:
    CidrBlock() = default;
    CidrBlock(Ipv4Address base, int prefix_len);

    // "a.b.c.d/n"; a missing "/n" is malformed-cidr.
    static CidrBlock parse(std::string_view text);

    Ipv4Address base() const noexcept { return base_; }
    int prefix_len() const noexcept { return prefix_len_; }
    std::uint32_t mask() const noexcept;
    Ipv4Address network() const noexcept { return Ipv4Address(base_.value() & mask()); }
    CidrBlock network_block() const { return CidrBlock(network(), prefix_len_); }

    bool contains(Ipv4Address addr) const noexcept { return (addr.value() & mask()) == network().value(); }
    bool overlaps(const CidrBlock& other) const noexcept;

    std::string to_string() const;

    friend bool operator==(const CidrBlock&, const CidrBlock&) = default;
    friend auto operator<=>(const CidrBlock&, const CidrBlock&) = default;

private:
    Ipv4Address base_;
    int prefix_len_ = 0;
};

inline bool cidr_contains(const CidrBlock& block, Ipv4Address addr) noexcept { return block.contains(addr); }

enum class Protocol : std::uint8_t { tcp, udp, icmp };

std::string_view protocol_name(Protocol p) noexcept;
std::optional<Protocol> parse_protocol(std::string_view text) noexcept;

struct TcpFlags {
    bool syn = false;
    bool ack = false;
    bool rst = false;
    bool fin = false;

    static constexpr TcpFlags none() { return {}; }
    static constexpr TcpFlags syn_only() { return {true, false, false, false}; }
    static constexpr TcpFlags syn_ack() { return {true, true, false, false}; }
    static constexpr TcpFlags ack_only() { return {false, true, false, false}; }
    static constexpr TcpFlags rst_only() { return {false, false, true, false}; }
    static constexpr TcpFlags rst_ack() { return {false, true, true, false}; }
    static constexpr TcpFlags fin_ack() { return {false, true, false, true}; }

    bool any() const noexcept { return syn || ack || rst || fin; }
    // tcpdump-style: "S", "S.", ".", "R", "R.", "F."
    std::string to_string() const;

    friend bool operator==(const TcpFlags&, const TcpFlags&) = default;
};

struct Endpoint {
    Ipv4Address addr;
    Port port = 0;

    std::string to_string() const;
    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct FiveTuple {
    Endpoint src;
    Endpoint dst;
    Protocol protocol = Protocol::tcp;

    FiveTuple reversed() const noexcept { return {dst, src, protocol}; }
    // The smaller of the tuple and its reverse; both orientations share it.
    FiveTuple normalized() const noexcept;
    std::string to_string() const;

    friend auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

inline FiveTuple reverse_tuple(const FiveTuple& t) noexcept { return t.reversed(); }

struct Packet {
    PacketId id = 0;
    Endpoint src;
    Endpoint dst;
    Protocol protocol = Protocol::tcp;
    TcpFlags flags;
    std::optional<FiveTuple> icmp_ref;
    Tick sent_tick = 0;
    // Address of the node that built the packet. NAT rewrites src/dst but
    // never this, which is what lets a scanner tell whether the host that
    // answered is the host it aimed at.
    Ipv4Address origin;
    // Service banner, carried on SYN-ACKs from services that declare one.
    std::optional<std::string> banner;

    FiveTuple tuple() const noexcept { return {src, dst, protocol}; }
    // TCP flags only on tcp, icmp_ref only on icmp.
    bool well_formed() const noexcept;
    std::string to_string() const;

    friend bool operator==(const Packet&, const Packet&) = default;
};

Packet make_tcp(Endpoint src, Endpoint dst, TcpFlags flags);
Packet make_udp(Endpoint src, Endpoint dst);
Packet make_icmp_error(Ipv4Address src, Ipv4Address dst, const FiveTuple& ref);

} // namespace dmzsim
