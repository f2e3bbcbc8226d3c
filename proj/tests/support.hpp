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

// Hand-rolled generators and small builders shared by the test binaries.

#include "dmzsim/conntrack.hpp"
#include "dmzsim/firewall.hpp"
#include "dmzsim/netcore.hpp"
#include "dmzsim/ruleparse.hpp"
#include "dmzsim/topology.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

using namespace dmzsim;

inline std::filesystem::path fixture(const std::string& name)
{
    return std::filesystem::path(DMZSIM_FIXTURES) / name;
}

inline std::filesystem::path scenario_file(const std::string& name)
{
    return std::filesystem::path(DMZSIM_SCENARIOS) / name;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Gen {
public:
    explicit Gen(std::uint32_t seed) : rng_(seed) {}

    std::mt19937& rng() { return rng_; }

    std::uint32_t u32() { return static_cast<std::uint32_t>(rng_()); }
    // Uniform in [lo, hi]; raw modulo keeps the sequence identical across
    // standard libraries.
    std::int64_t range(std::int64_t lo, std::int64_t hi)
    {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(((std::uint64_t(rng_()) << 32) | rng_()) % span);
    }
    bool coin(int percent = 50) { return range(0, 99) < percent; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(range(0, std::int64_t(v.size()) - 1))]; }

    // Addresses drawn from a small pool so matchers actually hit.
    Ipv4Address addr()
    {
        return Ipv4Address(10, std::uint8_t(range(0, 1)), std::uint8_t(range(0, 3)), std::uint8_t(range(1, 6)));
    }
    Port port() { return pick(ports_); }
    CidrBlock cidr()
    {
        const int len = static_cast<int>(pick(std::vector<std::int64_t>{0, 8, 16, 24, 30, 32}));
        return CidrBlock(addr(), len);
    }

    TcpFlags flags()
    {
        static const std::vector<TcpFlags> archetypes{TcpFlags::syn_only(), TcpFlags::syn_ack(), TcpFlags::ack_only(),
                                                      TcpFlags::rst_only(), TcpFlags::rst_ack(), TcpFlags::fin_ack(),
                                                      TcpFlags::none()};
        return pick(archetypes);
    }

    Protocol protocol() { return pick(std::vector<Protocol>{Protocol::tcp, Protocol::tcp, Protocol::udp, Protocol::icmp}); }

    Packet packet()
    {
        const Protocol proto = protocol();
        Endpoint src{addr(), port()};
        Endpoint dst{addr(), port()};
        if (proto == Protocol::tcp)
            return make_tcp(src, dst, flags());
        if (proto == Protocol::udp)
            return make_udp(src, dst);
        return make_icmp_error(src.addr, dst.addr, FiveTuple{{dst.addr, port()}, {addr(), port()}, Protocol::tcp});
    }

    ConnState state()
    {
        return pick(std::vector<ConnState>{ConnState::new_, ConnState::established, ConnState::related, ConnState::invalid});
    }

    PortSet port_set()
    {
        std::vector<PortRange> ranges;
        const auto n = range(1, 3);
        for (int i = 0; i < n; ++i) {
            if (coin(70)) {
                const Port p = port();
                ranges.push_back({p, p});
            } else {
                const auto lo = static_cast<Port>(range(1, 60000));
                ranges.push_back({lo, static_cast<Port>(lo + range(1, 2000))});
            }
        }
        return PortSet(ranges);
    }

    ConnStateSet states()
    {
        ConnStateSet s;
        for (auto st : {ConnState::new_, ConnState::established, ConnState::related, ConnState::invalid}) {
            if (coin(40))
                s.insert(st);
        }
        if (s.empty())
            s.insert(state());
        return s;
    }

    std::string comment()
    {
        static const std::vector<std::string> pool{
            "", "", "allow established connections", "drop invalid connections", "x", "quote \" inside",
            "back\\slash", "a=b", "# not a comment", "two  spaces", "tab\there"};
        return pick(pool);
    }

    std::string list_name() { return pick(std::vector<std::string>{"ddos-blacklist", "trusted", "scanners"}); }

    FilterRule filter_rule(const std::vector<std::string>& chains, bool allow_jump = true)
    {
        FilterRule r;
        r.chain = pick(chains);
        if (coin(50))
            r.protocol = protocol();
        if (r.protocol && *r.protocol != Protocol::icmp && coin(40))
            r.dst_ports = port_set();
        if (coin(30))
            r.src = cidr();
        if (coin(30))
            r.dst = cidr();
        if (coin(15))
            r.src_address_list = list_name();
        if (coin(40))
            r.conn_states = states();
        if (coin(10))
            r.new_conn_rate = RateLimit{static_cast<std::uint32_t>(range(1, 100)), range(1, 5) * 1000};
        switch (range(0, allow_jump ? 4 : 3)) {
        case 0: r.action.kind = ActionKind::accept; break;
        case 1: r.action.kind = ActionKind::drop; break;
        case 2: r.action.kind = ActionKind::reject_with_rst; break;
        case 3:
            r.action.kind = ActionKind::add_src_to_address_list;
            r.action.list = list_name();
            if (coin(70))
                r.action.timeout = range(1, 600) * 1000;
            break;
        default:
            r.action.kind = ActionKind::jump;
            r.action.target = pick(chains);
            break;
        }
        r.comment = comment();
        return r;
    }

    NatRule nat_rule()
    {
        NatRule r;
        r.kind = coin(60) ? NatKind::dstnat : NatKind::srcnat_masquerade;
        if (coin(60)) {
            r.protocol = coin(80) ? Protocol::tcp : Protocol::udp;
            if (coin(70))
                r.dst_ports = port_set();
        }
        if (coin(40))
            r.src = cidr();
        if (coin(50))
            r.dst = cidr();
        if (r.kind == NatKind::dstnat) {
            // Needs a target; to-ports only with tcp or udp.
            const bool ported = r.protocol.has_value();
            if (!ported || coin(80))
                r.to_address = addr();
            if (ported && (!r.to_address || coin(60)))
                r.to_port = port();
        } else if (coin(70)) {
            r.out_interface = pick(std::vector<std::string>{"ether1", "ether2"});
        }
        r.comment = comment();
        return r;
    }

    ConfigIR ir()
    {
        ConfigIR ir;
        const auto n_addr = range(0, 3);
        for (int i = 0; i < n_addr; ++i)
            ir.addresses.push_back({"ether" + std::to_string(i + 1), CidrBlock(addr(), int(range(8, 30))), comment()});
        const auto n_routes = range(0, 3);
        for (int i = 0; i < n_routes; ++i) {
            RouteSpec r;
            r.destination = coin(30) ? CidrBlock(Ipv4Address(), 0) : cidr();
            if (coin(70))
                r.gateway = addr();
            else
                r.gateway = std::string("ether2");
            r.distance = int(range(1, 5));
            r.comment = comment();
            ir.routes.push_back(r);
        }
        const auto n_lists = range(0, 3);
        for (int i = 0; i < n_lists; ++i) {
            ListEntrySpec e{list_name(), addr(), std::nullopt, comment()};
            if (coin(50))
                e.timeout = range(1, 3600) * (coin(50) ? 1000 : 1);
            ir.list_entries.push_back(e);
        }
        std::vector<std::string> chains{"forward", "input"};
        if (coin(30))
            chains.push_back("custom");
        const auto n_rules = range(0, 8);
        for (int i = 0; i < n_rules; ++i)
            ir.filter_rules.push_back(filter_rule(chains, false));
        // Jumps only to chains that received rules.
        if (!ir.filter_rules.empty() && coin(30)) {
            FilterRule j = filter_rule(chains, false);
            j.action = Action{ActionKind::jump, {}, std::nullopt, ir.filter_rules.front().chain};
            ir.filter_rules.push_back(j);
        }
        const auto n_nat = range(0, 3);
        for (int i = 0; i < n_nat; ++i)
            ir.nat_rules.push_back(nat_rule());
        if (coin(20))
            ir.prints.push_back(PrintTarget::addresses);
        if (coin(20))
            ir.prints.push_back(PrintTarget::routes);
        return ir;
    }

private:
    std::mt19937 rng_;
    std::vector<Port> ports_{22, 80, 81, 255, 256, 443, 1000, 8888, 40000};
};

// Router with ether1 public side, ether2 DMZ side, default route out.
inline Node dmz_router()
{
    Node n("dmz-router", NodeRole::router);
    n.add_interface("ether1", "upstream");
    n.add_interface("ether2", "dmz");
    n.add_address("ether1", CidrBlock::parse("192.168.56.2/24"));
    n.add_address("ether2", CidrBlock::parse("192.168.0.1/24"));
    n.add_route(CidrBlock::parse("0.0.0.0/0"), Ipv4Address::parse("192.168.56.1"));
    return n;
}

inline const Ipv4Address client_addr(10, 0, 1, 2);
inline const Ipv4Address router_out(10, 0, 1, 1);
inline const Ipv4Address router_in(10, 0, 2, 1);
inline const Ipv4Address server_addr(10, 0, 2, 50);

// client -- r -- server, one hop per link.
inline Topology small_net()
{
    Topology t;
    t.add_link("a");
    t.add_link("b");
    t.add_node("client", NodeRole::host);
    t.add_node("r", NodeRole::router);
    t.add_node("server", NodeRole::host);
    t.attach("client", "eth0", "a");
    t.attach("r", "ether1", "a");
    t.attach("r", "ether2", "b");
    t.attach("server", "eth0", "b");
    t.node("client").add_address("eth0", CidrBlock(client_addr, 24));
    t.node("client").add_route(CidrBlock(Ipv4Address(), 0), router_out);
    t.node("r").add_address("ether1", CidrBlock(router_out, 24));
    t.node("r").add_address("ether2", CidrBlock(router_in, 24));
    t.node("server").add_address("eth0", CidrBlock(server_addr, 24));
    t.node("server").add_route(CidrBlock(Ipv4Address(), 0), router_in);
    t.node("server").add_service({80, Protocol::tcp, "http", "test-banner"});
    t.node("server").add_service({53, Protocol::udp, "domain", std::nullopt});
    return t;
}

} // namespace testsupport
