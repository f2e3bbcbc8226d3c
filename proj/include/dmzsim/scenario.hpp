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

#include "dmzsim/engine.hpp"
#include "dmzsim/ruleparse.hpp"
#include "dmzsim/topology.hpp"
#include "dmzsim/traffic.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dmzsim {

struct ScenarioEvent {
    Tick at = 0;
    std::variant<ScanSpec, FloodSpec, RequestSpec> spec;
    int line = 0;
};

struct Scenario {
    std::string name;
    std::string source; // file name used in diagnostics
    EngineParams params;
    std::optional<Tick> horizon;
    Topology topology;
    std::map<std::string, ConfigIR, std::less<>> configs; // routers only
    std::vector<ScenarioEvent> events;
    std::vector<std::string> warnings;
};

// "a.b=v"; the value is read as a YAML scalar.
struct Override {
    std::string path;
    std::string value;

    // Throws Error{invalid_argument} when there is no '='.
    static Override parse(std::string_view text);
};

// Throws Error; the line refers to the scenario file, including errors
// raised inside embedded scripts.
Scenario load_scenario_text(const std::string& text, const std::string& source,
                            const std::vector<Override>& overrides = {});
Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

struct RequestResult {
    RequestSpec spec;
    RequestOutcome outcome;
};

struct FloodResult {
    FloodSpec spec;
    FloodOutcome outcome;
};

struct RunArtifacts {
    std::vector<ScanReport> scans;
    std::vector<FloodResult> floods;
    std::vector<RequestResult> requests;
    std::string trace;
    std::string address_lists;
    RunResult run;
    bool complete = false; // queue drained and every generator finished
};

RunArtifacts run_scenario(const Scenario& scenario);

// scan-<n>.txt, scan-<n>.records, trace.log, address-lists.txt; each file is
// written under a temporary name and renamed into place.
void write_artifacts(const RunArtifacts& artifacts, const std::filesystem::path& dir);

std::string summarize(const Scenario& scenario, const RunArtifacts& artifacts);

} // namespace dmzsim
