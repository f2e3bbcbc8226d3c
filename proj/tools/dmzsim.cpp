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
#include "dmzsim/ruleparse.hpp"
#include "dmzsim/scenario.hpp"
#include "dmzsim/topology.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_usage = 2;

std::string where(const std::string& file, const dmzsim::Error& e)
{
    if (e.line() > 0)
        return fmt::format("{}:{}: {}: {}", file, e.line(), dmzsim::errc_name(e.code()), e.detail());
    return fmt::format("{}: {}: {}", file, dmzsim::errc_name(e.code()), e.detail());
}

bool read_file(const std::string& path, std::string& out)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

int cmd_run(const std::string& path, const std::string& out_dir, const std::vector<std::string>& sets)
{
    const std::string file = std::filesystem::path(path).filename().string();
    dmzsim::Scenario sc;
    try {
        std::vector<dmzsim::Override> overrides;
        for (const auto& s : sets)
            overrides.push_back(dmzsim::Override::parse(s));
        sc = dmzsim::load_scenario(path, overrides);
    } catch (const dmzsim::Error& e) {
        std::cerr << where(file, e) << '\n';
        return exit_usage;
    }
    for (const auto& w : sc.warnings)
        std::cerr << file << ": warning: " << w << '\n';

    try {
        const auto artifacts = dmzsim::run_scenario(sc);
        dmzsim::write_artifacts(artifacts, out_dir);
        std::cout << dmzsim::summarize(sc, artifacts);
        return artifacts.complete ? exit_ok : exit_runtime;
    } catch (const std::exception& e) {
        std::cerr << file << ": runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
}

int cmd_parse(const std::string& path, bool check, bool strict)
{
    const std::string file = std::filesystem::path(path).filename().string();
    std::string text;
    if (!read_file(path, text)) {
        std::cerr << file << ": cannot read file\n";
        return exit_usage;
    }
    try {
        const auto ir = dmzsim::parse_and_lower(text, dmzsim::ParseOptions{strict});
        if (!check)
            std::cout << dmzsim::render(ir);
        return exit_ok;
    } catch (const dmzsim::Error& e) {
        std::cerr << where(file, e) << '\n';
        return exit_usage;
    }
}

int cmd_tables(const std::string& path, const std::string& node)
{
    const std::string file = std::filesystem::path(path).filename().string();
    try {
        const auto sc = dmzsim::load_scenario(path);
        if (!sc.topology.has_node(node)) {
            std::cerr << file << ": unknown-node: no node '" << node << "'\n";
            return exit_usage;
        }
        std::cout << dmzsim::render_tables(sc.topology.node(node));
        return exit_ok;
    } catch (const dmzsim::Error& e) {
        std::cerr << where(file, e) << '\n';
        return exit_usage;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Deterministic DMZ network simulator"};
    app.require_subcommand(1);

    std::string scenario, out_dir = "out", script, node;
    std::vector<std::string> sets;
    bool check = false, strict = false;

    auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
    run->add_option("scenario", scenario, "Scenario file")->required();
    run->add_option("-o,--output", out_dir, "Artifact directory")->capture_default_str();
    run->add_option("--set", sets, "Override a scenario value, key.path=value")->take_all();

    auto* parse = app.add_subcommand("parse", "Parse a router script and print its canonical form");
    parse->add_option("script", script, "Script file")->required();
    parse->add_flag("--check", check, "Only validate; print nothing on success");
    parse->add_flag("--strict", strict, "Do not join hyphen-split lines");

    auto* tables = app.add_subcommand("tables", "Print a node's address and route tables");
    tables->add_option("scenario", scenario, "Scenario file")->required();
    tables->add_option("node", node, "Node id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    if (*run)
        return cmd_run(scenario, out_dir, sets);
    if (*parse)
        return cmd_parse(script, check, strict);
    return cmd_tables(scenario, node);
}
