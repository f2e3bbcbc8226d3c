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
#include "dmzsim/ruleparse.hpp"
#include "dmzsim/scenario.hpp"
#include "dmzsim/traffic.hpp"

#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace dmzsim;
using testsupport::client_addr;
using testsupport::server_addr;
using testsupport::small_net;

namespace {

ScanSpec scan_of(PortSet ports)
{
    ScanSpec s;
    s.source = "client";
    s.target = server_addr;
    s.label = "server";
    s.ports = std::move(ports);
    return s;
}

ScanReport scan_with(const std::string& script, const ScanSpec& spec)
{
    Engine e(small_net());
    e.configure_router("r", parse_and_lower(script));
    return run_syn_scan(spec, e);
}

std::map<Port, PortState> states_of(const ScanReport& r)
{
    std::map<Port, PortState> m;
    for (const auto& f : r.findings)
        m[f.port] = f.state;
    return m;
}

const char* rate_rules = "/ip firewall filter\n"
                         "add chain=forward src-address-list=ddos-blacklist action=drop\n"
                         "add chain=forward connection-state=new new-connection-rate=50/1s "
                         "action=add-src-to-address-list address-list=ddos-blacklist address-list-timeout=300s\n"
                         "add chain=forward src-address-list=ddos-blacklist action=drop\n";

} // namespace

TEST_CASE("classify_response")
{
    const Endpoint a{client_addr, 1}, b{server_addr, 2};
    CHECK(classify_response(make_tcp(b, a, TcpFlags::syn_ack())) == PortState::open);
    CHECK(classify_response(make_tcp(b, a, TcpFlags::rst_ack())) == PortState::closed);
    CHECK(classify_response(make_tcp(b, a, TcpFlags::rst_only())) == PortState::closed);
    CHECK(classify_response(std::nullopt) == PortState::filtered);
    CHECK(classify_response(make_icmp_error(server_addr, client_addr, make_tcp(a, b, TcpFlags::syn_only()).tuple()))
          == PortState::filtered);
}

TEST_CASE("service names")
{
    CHECK(service_name(80) == "http");
    CHECK(service_name(256) == "fw1-secureremote");
    CHECK(service_name(8888) == "sun-answerbook");
    CHECK(service_name(255) == "unknown");
}

TEST_CASE("scan reports match the frozen files")
{
    for (const auto& [scenario, golden] :
         {std::pair{"flat.yaml", "flat_scan.txt"}, std::pair{"dmz.yaml", "dmz_scan.txt"}}) {
        const auto art = run_scenario(load_scenario(testsupport::scenario_file(scenario)));
        REQUIRE(!art.scans.empty());
        CHECK(render_scan_report(art.scans.front()) == testsupport::slurp(testsupport::fixture(golden)));
    }
}

TEST_CASE("an all-closed scan below and above the summary threshold")
{
    const auto few = scan_with("", scan_of(PortSet::parse("1000-1009")));
    CHECK(few.counts == ScanCounts{0, 10, 0});
    CHECK(render_scan_report(few).find("Not shown") == std::string::npos);
    const auto many = scan_with("", scan_of(PortSet::parse("1000-1029")));
    CHECK(many.counts == ScanCounts{0, 30, 0});
    CHECK(render_scan_report(many) == "Nmap-style scan report for server (10.0.2.50)\n"
                                      "Not shown: 30 closed ports\n"
                                      "PORT STATE SERVICE\n"
                                      "Host identity: concealed\n");
}

TEST_CASE("a single-port scan")
{
    const auto r = scan_with("", scan_of(PortSet::parse("80")));
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].state == PortState::open);
    CHECK(r.findings[0].banner == "test-banner");
    CHECK(r.identity_disclosed);
    CHECK(render_scan_records(r) == "80 open http\n");
}

TEST_CASE("a filtered port needs every retry to time out")
{
    ScanSpec spec = scan_of(PortSet::parse("80"));
    spec.retries = 2;
    Engine e(small_net());
    e.configure_router("r", parse_and_lower("/ip firewall filter\nadd chain=forward action=drop\n"));
    const auto r = run_syn_scan(spec, e);
    CHECK(r.counts == ScanCounts{0, 0, 1});
    std::size_t probes = 0;
    for (PacketId id = 1; e.packet_record(id); ++id)
        if (e.packet_record(id)->origin_node == "client")
            ++probes;
    CHECK(probes == 3);
}

TEST_CASE("flood outcomes")
{
    SUBCASE("a slow flood is never blocked")
    {
        Engine e(small_net());
        e.configure_router("r", parse_and_lower(rate_rules));
        const auto out = run_flood(FloodSpec{"client", {server_addr, 80}, 10, 5000}, e);
        CHECK(out.sent == 50);
        CHECK(out.delivered == 50);
        CHECK_FALSE(out.blocked_tick);
        CHECK(e.router_state("r").lists.empty());
    }
    SUBCASE("a fast flood is blocked after the threshold")
    {
        Engine e(small_net());
        e.configure_router("r", parse_and_lower(rate_rules));
        const auto out = run_flood(FloodSpec{"client", {server_addr, 80}, 200, 3000}, e);
        CHECK(out.sent == 600);
        CHECK(out.delivered == 50);
        REQUIRE(out.blocked_tick);
        CHECK(out.delivered_after_block == 0);
    }
    SUBCASE("zero duration sends nothing")
    {
        Engine e(small_net());
        const auto out = run_flood(FloodSpec{"client", {server_addr, 80}, 200, 0}, e);
        CHECK(out.sent == 0);
        CHECK(e.trace().empty());
    }
}

TEST_CASE("request outcomes")
{
    Engine e(small_net());
    e.configure_router("r", parse_and_lower("/ip firewall filter\nadd chain=forward protocol=tcp dst-port=22 "
                                            "action=drop\n"));
    RequestSpec ok{"client", {server_addr, 80}, 1000, 2, 50000};
    RequestSpec refused{"client", {server_addr, 81}, 1000, 2, 50001};
    RequestSpec lost{"client", {server_addr, 22}, 1000, 2, 50002};
    std::vector<GeneratorId> ids;
    for (const auto& s : {ok, refused, lost})
        ids.push_back(e.add_generator(std::make_unique<Requester>(s, client_addr)));
    e.run();
    const auto out = [&](int i) { return dynamic_cast<const Requester&>(e.generator(ids[i])).outcome(e); };
    CHECK(out(0).status == RequestStatus::succeeded);
    CHECK(out(0).attempts == 1);
    CHECK(out(0).reply_tuple == out(0).sent_tuple.reversed());
    CHECK(out(1).status == RequestStatus::refused);
    CHECK(out(2).status == RequestStatus::timed_out);
    CHECK(out(2).attempts == 3);
    CHECK(out(2).delivered == 0);
    CHECK(request_status_name(RequestStatus::timed_out) == "timed-out");
}

TEST_CASE("property: findings partition the requested ports" * doctest::test_suite("property"))
{
    testsupport::Gen g(61);
    for (int round = 0; round < 60; ++round) {
        ConfigIR ir;
        const auto n = g.range(0, 5);
        for (int i = 0; i < n; ++i)
            ir.filter_rules.push_back(g.filter_rule({"forward"}, false));
        const auto ports = g.port_set();
        ScanSpec spec = scan_of(ports);
        spec.timeout = 50;
        Engine e(small_net());
        e.configure_router("r", ir);
        const auto r = run_syn_scan(spec, e);
        std::set<Port> want;
        for (const auto& pr : ports.ranges())
            for (unsigned p = pr.lo; p <= pr.hi; ++p)
                want.insert(Port(p));
        std::set<Port> got;
        for (const auto& f : r.findings)
            REQUIRE(got.insert(f.port).second);
        REQUIRE(got == want);
        REQUIRE(r.counts.total() == want.size());
        REQUIRE(r.ports_in(PortState::open).size() == r.counts.open);
        REQUIRE(r.ports_in(PortState::closed).size() == r.counts.closed);
        REQUIRE(r.ports_in(PortState::filtered).size() == r.counts.filtered);
    }
}

TEST_CASE("property: a drop rule only turns ports filtered" * doctest::test_suite("property"))
{
    testsupport::Gen g(62);
    for (int round = 0; round < 40; ++round) {
        ScanSpec spec = scan_of(PortSet::parse("20-90"));
        spec.timeout = 50;
        std::string script = "/ip firewall filter\n";
        const auto before = states_of(scan_with(script, spec));
        const Port blocked = static_cast<Port>(g.range(20, 90));
        script += "add chain=forward protocol=tcp dst-port=" + std::to_string(blocked) + " action=drop\n";
        const auto after = states_of(scan_with(script, spec));
        for (const auto& [port, st] : before) {
            if (port == blocked)
                REQUIRE(after.at(port) == PortState::filtered);
            else
                REQUIRE(after.at(port) == st);
        }
    }
}

TEST_CASE("property: the scanner never sends a bare ACK" * doctest::test_suite("property"))
{
    testsupport::Gen g(63);
    for (int round = 0; round < 30; ++round) {
        ConfigIR ir;
        const auto n = g.range(0, 4);
        for (int i = 0; i < n; ++i)
            ir.filter_rules.push_back(g.filter_rule({"forward"}, false));
        Engine e(small_net());
        e.configure_router("r", ir);
        ScanSpec spec = scan_of(g.port_set());
        spec.timeout = 50;
        run_syn_scan(spec, e);
        for (PacketId id = 1; e.packet_record(id); ++id) {
            const auto* rec = e.packet_record(id);
            if (rec->origin_node != "client")
                continue;
            REQUIRE(rec->sent.protocol == Protocol::tcp);
            REQUIRE(!(rec->sent.flags == TcpFlags::ack_only()));
            REQUIRE((rec->sent.flags == TcpFlags::syn_only() || rec->sent.flags == TcpFlags::rst_only()));
        }
    }
}
