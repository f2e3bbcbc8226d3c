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

#include "dmzsim/engine.hpp"
#include "dmzsim/error.hpp"
#include "dmzsim/ruleparse.hpp"

#include "support.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace dmzsim;

namespace {

using testsupport::client_addr;
using testsupport::router_out;
using testsupport::server_addr;
using testsupport::small_net;

Packet syn(Port sport, Port dport, Ipv4Address dst = server_addr)
{
    return make_tcp({client_addr, sport}, {dst, dport}, TcpFlags::syn_only());
}

std::vector<const PacketRecord*> all_records(const Engine& e)
{
    std::vector<const PacketRecord*> out;
    for (PacketId id = 1;; ++id) {
        const auto* r = e.packet_record(id);
        if (!r)
            break;
        out.push_back(r);
    }
    return out;
}

struct Recorder : Generator {
    std::string where = "client";
    std::vector<std::pair<Tick, std::uint64_t>> fired;
    std::string name() const override { return "recorder"; }
    const std::string& node() const override { return where; }
    void on_step(Engine&) override {}
    void on_timer(Engine& e, std::uint64_t tag) override { fired.emplace_back(e.now(), tag); }
    bool finished() const override { return true; }
};

// Parses TraceRecord::detail "#<id> ..." into the packet id.
PacketId id_of(const TraceRecord& r)
{
    if (r.detail.empty() || r.detail.front() != '#')
        return 0;
    return std::stoull(r.detail.substr(1));
}

} // namespace

TEST_CASE("events run in tick then insertion order")
{
    Engine e(small_net());
    auto rec = std::make_unique<Recorder>();
    auto* r = rec.get();
    const auto id = e.add_generator(std::move(rec));
    e.schedule(5, TimerEvent{id, 1});
    e.schedule(1, TimerEvent{id, 2});
    e.schedule(5, TimerEvent{id, 3});
    e.schedule(0, TimerEvent{id, 4});
    const auto res = e.run();
    CHECK(res.idle);
    CHECK(r->fired == std::vector<std::pair<Tick, std::uint64_t>>{{0, 4}, {1, 2}, {5, 1}, {5, 3}});
}

TEST_CASE("negative delay is rejected")
{
    Engine e(small_net());
    try {
        e.schedule(-1, GeneratorStepEvent{});
        FAIL("accepted");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::invalid_argument);
    }
}

TEST_CASE("run stops at the horizon")
{
    Engine e(small_net());
    auto rec = std::make_unique<Recorder>();
    auto* r = rec.get();
    const auto id = e.add_generator(std::move(rec));
    e.schedule(10, TimerEvent{id, 1});
    e.schedule(30, TimerEvent{id, 2});
    const auto res = e.run(20);
    CHECK_FALSE(res.idle);
    CHECK(res.pending == 1);
    CHECK(r->fired.size() == 1);
}

TEST_CASE("host stack replies")
{
    Engine e(small_net());
    const auto open = e.process_at_host("server", syn(4000, 80));
    REQUIRE(open);
    CHECK(open->flags == TcpFlags::syn_ack());
    CHECK(open->src == Endpoint{server_addr, 80});
    CHECK(open->dst == Endpoint{client_addr, 4000});
    CHECK(open->banner == "test-banner");

    const auto closed = e.process_at_host("server", syn(4000, 81));
    REQUIRE(closed);
    CHECK(closed->flags == TcpFlags::rst_ack());

    CHECK_FALSE(e.process_at_host("server", make_tcp({client_addr, 4000}, {server_addr, 80}, TcpFlags::ack_only())));

    const auto udp = e.process_at_host("server", make_udp({client_addr, 4000}, {server_addr, 99}));
    REQUIRE(udp);
    CHECK(udp->protocol == Protocol::icmp);
    CHECK(udp->icmp_ref == make_udp({client_addr, 4000}, {server_addr, 99}).tuple());
    CHECK_FALSE(e.process_at_host("server", make_udp({client_addr, 4000}, {server_addr, 53})));
}

TEST_CASE("an open connection through the router")
{
    Engine e(small_net());
    const auto id = e.send("client", syn(4000, 80));
    e.run();
    const auto* rec = e.packet_record(id);
    REQUIRE(rec);
    CHECK(rec->fate == Fate::consumed);
    CHECK(rec->fate_node == "server");
    CHECK(rec->fate_tick == 2);
    // The SYN-ACK comes back and is consumed by the client.
    const auto recs = all_records(e);
    REQUIRE(recs.size() == 2);
    CHECK(recs[1]->sent.flags == TcpFlags::syn_ack());
    CHECK(recs[1]->fate == Fate::consumed);
    CHECK(recs[1]->fate_node == "client");
    CHECK(e.router_state("r").conntrack.size() == 1);
    CHECK(e.router_state("r").conntrack.entries().begin()->second.phase == ConnPhase::confirmed);
}

TEST_CASE("drop and reject at the router")
{
    Engine e(small_net());
    e.configure_router("r", parse_and_lower("/ip firewall filter\n"
                                            "add chain=forward protocol=tcp dst-port=80 action=drop\n"
                                            "add chain=forward protocol=tcp dst-port=22 action=reject "
                                            "reject-with=tcp-reset\n"));
    const auto dropped = e.send("client", syn(4000, 80));
    const auto rejected = e.send("client", syn(4001, 22));
    e.run();
    CHECK(e.packet_record(dropped)->fate == Fate::dropped);
    CHECK(e.packet_record(dropped)->fate_node == "r");
    CHECK(e.packet_record(rejected)->fate == Fate::rejected);
    const auto recs = all_records(e);
    REQUIRE(recs.size() == 3);
    const auto& rst = recs[2]->sent;
    CHECK(rst.flags == TcpFlags::rst_ack());
    CHECK(rst.src == Endpoint{server_addr, 22});
    CHECK(rst.dst == Endpoint{client_addr, 4001});
    CHECK(rst.origin == router_out);
    CHECK(recs[2]->fate == Fate::consumed);
    CHECK(recs[2]->fate_node == "client");
    // Dropped packets leave no conntrack entry.
    CHECK(e.router_state("r").conntrack.empty());
}

TEST_CASE("traffic to the router itself uses the input chain")
{
    Engine e(small_net());
    e.configure_router("r", parse_and_lower("/ip firewall filter\nadd chain=input action=drop\n"));
    const auto id = e.send("client", syn(4000, 22, router_out));
    const auto fwd = e.send("client", syn(4001, 81));
    e.run();
    CHECK(e.packet_record(id)->fate == Fate::dropped);
    CHECK(e.packet_record(fwd)->fate == Fate::consumed);
    bool saw_input = false;
    for (const auto& r : e.trace().records())
        if (r.kind == "verdict" && r.detail.find("chain=input") != std::string::npos)
            saw_input = true;
    CHECK(saw_input);
}

TEST_CASE("no route is a drop at the origin")
{
    Topology t;
    t.add_link("a");
    t.add_node("lonely", NodeRole::host);
    t.attach("lonely", "eth0", "a");
    t.node("lonely").add_address("eth0", CidrBlock::parse("10.9.9.9/24"));
    Engine e(std::move(t));
    const auto id = e.send("lonely", make_tcp({parse_address("10.9.9.9"), 1}, {server_addr, 80}, TcpFlags::syn_only()));
    e.run();
    CHECK(e.packet_record(id)->fate == Fate::dropped);
    CHECK(e.packet_record(id)->fate_node == "lonely");
}

TEST_CASE("dstnat record precedes the verdict for the same packet")
{
    Engine e(small_net());
    e.configure_router("r", parse_and_lower("/ip firewall nat\n"
                                            "add chain=dstnat dst-address=10.0.1.1 protocol=tcp dst-port=8080 "
                                            "action=dst-nat to-addresses=10.0.2.50 to-ports=80\n"));
    const auto id = e.send("client", syn(4000, 8080, router_out));
    e.run();
    CHECK(e.packet_record(id)->fate == Fate::consumed);
    CHECK(e.packet_record(id)->fate_node == "server");
    std::optional<std::size_t> dnat, verdict;
    const auto& recs = e.trace().records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].node != "r" || id_of(recs[i]) != id)
            continue;
        if (recs[i].kind == "dstnat" && !dnat)
            dnat = i;
        if (recs[i].kind == "verdict" && !verdict)
            verdict = i;
    }
    REQUIRE(dnat);
    REQUIRE(verdict);
    CHECK(*dnat < *verdict);
    CHECK(recs[*verdict].detail.find("chain=forward") != std::string::npos);
    // The reply leaves the router with the public source restored.
    const auto all = all_records(e);
    REQUIRE(all.size() == 2);
    CHECK(all[1]->fate_node == "client");
}

TEST_CASE("an empty run leaves an empty trace")
{
    Engine e(small_net());
    const auto res = e.run();
    CHECK(res.idle);
    CHECK(res.end_tick == 0);
    CHECK(e.trace().empty());
    CHECK(e.trace().render().empty());
}

namespace {

// Random rules on r plus random traffic from both hosts.
std::string random_run(std::uint32_t seed, std::vector<const PacketRecord*>* records_out = nullptr,
                       std::unique_ptr<Engine>* keep = nullptr)
{
    testsupport::Gen g(seed);
    auto e = std::make_unique<Engine>(small_net(), EngineParams{1000, seed, {}, std::nullopt, 1000});
    ConfigIR ir;
    const auto n = g.range(0, 6);
    for (int i = 0; i < n; ++i)
        ir.filter_rules.push_back(g.filter_rule({"forward", "input"}, false));
    e->configure_router("r", ir);
    for (int k = 0; k < 60; ++k) {
        const bool from_client = g.coin();
        const Endpoint src{from_client ? client_addr : server_addr, static_cast<Port>(g.range(1024, 1100))};
        const Endpoint dst{from_client ? (g.coin(80) ? server_addr : router_out) : client_addr,
                           g.pick(std::vector<Port>{22, 53, 80, 81, 4000})};
        Packet p;
        switch (g.range(0, 2)) {
        case 0: p = make_tcp(src, dst, g.flags()); break;
        case 1: p = make_udp(src, dst); break;
        default: p = make_tcp(src, dst, TcpFlags::syn_only()); break;
        }
        e->send(from_client ? "client" : "server", p);
        e->run(e->now() + g.range(0, 3));
    }
    e->run();
    if (records_out)
        *records_out = all_records(*e);
    std::string out = e->trace().render();
    if (keep)
        *keep = std::move(e);
    return out;
}

} // namespace

TEST_CASE("property: identical inputs give identical traces" * doctest::test_suite("property"))
{
    for (std::uint32_t seed = 1; seed <= 40; ++seed)
        REQUIRE(random_run(seed) == random_run(seed));
}

TEST_CASE("property: every packet has a final fate" * doctest::test_suite("property"))
{
    for (std::uint32_t seed = 100; seed < 200; ++seed) {
        std::unique_ptr<Engine> e;
        std::vector<const PacketRecord*> recs;
        random_run(seed, &recs, &e);
        REQUIRE(!recs.empty());
        for (const auto* r : recs) {
            REQUIRE(r->fate != Fate::in_flight);
            REQUIRE(r->fate_tick >= r->sent.sent_tick);
        }
        // No packet settles twice.
        for (const auto& t : e->trace().records())
            REQUIRE(t.kind != "error");
    }
}

TEST_CASE("property: trace order is causal" * doctest::test_suite("property"))
{
    for (std::uint32_t seed = 300; seed < 340; ++seed) {
        std::unique_ptr<Engine> e;
        random_run(seed, nullptr, &e);
        const auto& recs = e->trace().records();
        std::map<PacketId, Tick> emitted, xmitted;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const auto& r = recs[i];
            if (i > 0) {
                const auto& prev = recs[i - 1];
                REQUIRE((prev.tick < r.tick || (prev.tick == r.tick && prev.seq <= r.seq)));
            }
            const auto id = id_of(r);
            if (r.kind == "emit")
                emitted.emplace(id, r.tick);
            else if (r.kind == "xmit")
                xmitted[id] = r.tick;
            else if (r.kind == "deliver") {
                REQUIRE(emitted.contains(id));
                REQUIRE(xmitted.contains(id));
                REQUIRE(r.tick >= xmitted[id] + 1);
            }
        }
    }
}
