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

#include "dmzsim/error.hpp"
#include "dmzsim/scenario.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace dmzsim;

namespace {

const char* minimal = R"(name: tiny
engine:
  horizon: 10s
links: [lan]
nodes:
  - id: a
    role: host
    interfaces:
      - {name: eth0, link: lan, address: 10.0.0.1/24}
  - id: b
    role: host
    interfaces:
      - {name: eth0, link: lan, address: 10.0.0.2/24}
    services:
      - {port: 80, name: http}
events:
  - at: 0
    scan: {source: a, target: 10.0.0.2, label: b, ports: "79-81"}
)";

Error load_error(const std::string& text, const std::vector<Override>& overrides = {})
{
    try {
        load_scenario_text(text, "t.yaml", overrides);
    } catch (const Error& e) {
        return e;
    }
    FAIL("loaded without error");
    return Error(Errc::invalid_argument, "");
}

std::string replaced(std::string text, const std::string& from, const std::string& to)
{
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

} // namespace

TEST_CASE("shipped scenarios load")
{
    const auto flat = load_scenario(testsupport::scenario_file("flat.yaml"));
    CHECK(flat.name == "flat");
    CHECK(flat.topology.nodes().size() == 3);
    CHECK(flat.events.size() == 1);
    CHECK(flat.horizon == 60'000);
    CHECK(flat.warnings.empty());

    const auto dmz = load_scenario(testsupport::scenario_file("dmz.yaml"));
    CHECK(dmz.events.size() == 5);
    REQUIRE(dmz.configs.contains("dmz-router"));
    const auto& ir = dmz.configs.find("dmz-router")->second;
    CHECK(ir.nat_rules.size() == 4);
    bool found_rate = false;
    for (const auto& r : ir.filter_rules)
        if (r.new_conn_rate) {
            CHECK(*r.new_conn_rate == RateLimit{50, 1000});
            CHECK(r.action.timeout == 300'000);
            found_rate = true;
        }
    CHECK(found_rate);
    CHECK(render_tables(dmz.topology.node("dmz-router"))
          == testsupport::slurp(testsupport::fixture("dmz_router_tables.txt")));
}

TEST_CASE("overrides reach embedded scripts")
{
    const auto sc = load_scenario(testsupport::scenario_file("dmz.yaml"),
                                  {Override::parse("detection.threshold=1000000")});
    const auto& ir = sc.configs.find("dmz-router")->second;
    bool seen = false;
    for (const auto& r : ir.filter_rules)
        if (r.new_conn_rate) {
            CHECK(r.new_conn_rate->threshold == 1'000'000);
            seen = true;
        }
    CHECK(seen);
}

TEST_CASE("Override::parse")
{
    const auto o = Override::parse("engine.horizon=5s");
    CHECK(o.path == "engine.horizon");
    CHECK(o.value == "5s");
    CHECK_THROWS_AS(Override::parse("engine.horizon"), Error);
}

TEST_CASE("minimal scenario runs")
{
    const auto sc = load_scenario_text(minimal, "t.yaml");
    const auto art = run_scenario(sc);
    CHECK(art.complete);
    REQUIRE(art.scans.size() == 1);
    CHECK(art.scans[0].counts == ScanCounts{1, 2, 0});
    const auto summary = summarize(sc, art);
    CHECK(summary.find("scan 1: b open=1 closed=2 filtered=0 identity=disclosed") != std::string::npos);
}

TEST_CASE("errors point at the scenario line")
{
    const auto bad_key = load_error(replaced(minimal, "name: tiny", "name: tiny\ncolour: red"));
    CHECK(bad_key.code() == Errc::scenario);
    CHECK(bad_key.line() == 2);

    const auto unknown_node = load_error(replaced(minimal, "source: a", "source: zz"));
    CHECK(unknown_node.code() == Errc::unknown_node);

    const auto unroutable = load_error(replaced(minimal, "target: 10.0.0.2", "target: 172.16.0.1"));
    CHECK(unroutable.code() == Errc::unroutable_target);

    const auto yaml = load_error("name: [unclosed\n");
    CHECK(yaml.code() == Errc::scenario);
    CHECK(yaml.line() >= 1);
}

TEST_CASE("script errors are reported at the file line")
{
    const std::string text = replaced(minimal, "  - id: b\n",
                                      "  - id: r\n"
                                      "    role: router\n"
                                      "    interfaces:\n"
                                      "      - {name: ether1, link: lan}\n"
                                      "    config: |\n"
                                      "      /ip address add address=10.0.0.9/24 interface=ether1\n"
                                      "      /ip firewall filter add chain=forward colour=red\n"
                                      "  - id: b\n");
    const auto e = load_error(text);
    CHECK(e.code() == Errc::unknown_key);
    CHECK(e.line() == 16);
}

TEST_CASE("placeholders must name a scalar")
{
    const std::string text = replaced(minimal, "  - id: b\n",
                                      "  - id: r\n"
                                      "    role: router\n"
                                      "    interfaces:\n"
                                      "      - {name: ether1, link: lan}\n"
                                      "    config: |\n"
                                      "      /ip address add address=${nowhere.x} interface=ether1\n"
                                      "  - id: b\n");
    const auto e = load_error(text);
    CHECK(e.code() == Errc::scenario);
    CHECK(e.line() > 0);
}

TEST_CASE("hosts may not carry firewall config")
{
    const std::string text = replaced(minimal, "    services:\n",
                                      "    config: |\n"
                                      "      /ip firewall filter add chain=input action=drop\n"
                                      "    services:\n");
    CHECK_THROWS_AS(load_scenario_text(text, "t.yaml"), Error);
}

TEST_CASE("runs are deterministic and artifacts land on disk")
{
    const auto sc = load_scenario(testsupport::scenario_file("dmz.yaml"));
    const auto a = run_scenario(sc);
    const auto b = run_scenario(sc);
    CHECK(a.trace == b.trace);
    CHECK(a.address_lists == b.address_lists);
    REQUIRE(a.scans.size() == b.scans.size());
    for (std::size_t i = 0; i < a.scans.size(); ++i)
        CHECK(render_scan_report(a.scans[i]) == render_scan_report(b.scans[i]));

    const auto dir = std::filesystem::temp_directory_path() / "dmzsim-test-artifacts";
    std::filesystem::remove_all(dir);
    write_artifacts(a, dir);
    CHECK(testsupport::slurp(dir / "trace.log") == a.trace);
    CHECK(testsupport::slurp(dir / "scan-1.txt") == render_scan_report(a.scans[0]));
    CHECK(testsupport::slurp(dir / "address-lists.txt") == a.address_lists);
    CHECK(std::filesystem::exists(dir / "scan-1.records"));
    std::filesystem::remove_all(dir);
}
