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
#include "dmzsim/firewall.hpp"
#include "dmzsim/netcore.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dmzsim {

enum class PortState { open, closed, filtered };

std::string_view port_state_name(PortState s) noexcept;

// Static port -> name table; anything not listed is "unknown".
std::string_view service_name(Port port) noexcept;

// SYN-ACK is open, RST is closed, anything else (or nothing) is filtered.
PortState classify_response(const std::optional<Packet>& reply) noexcept;

struct ScanSpec {
    std::string source;
    Ipv4Address target;
    std::string label;
    PortSet ports{{PortRange{1, 1000}}};
    Tick timeout = 200;
    int retries = 1;
    Tick interval = 1; // ticks between successive probes

    // Throws bad_value on an empty port set, non-positive timeout, or
    // negative retries.
    void validate() const;
};

struct PortFinding {
    Port port = 0;
    Protocol protocol = Protocol::tcp;
    PortState state = PortState::filtered;
    std::string service_name;
    std::optional<std::string> banner;

    friend bool operator==(const PortFinding&, const PortFinding&) = default;
};

struct ScanCounts {
    std::size_t open = 0;
    std::size_t closed = 0;
    std::size_t filtered = 0;

    std::size_t total() const noexcept { return open + closed + filtered; }
    friend bool operator==(const ScanCounts&, const ScanCounts&) = default;
};

struct ScanReport {
    std::string label;
    Ipv4Address target;
    std::vector<PortFinding> findings; // ascending port order
    ScanCounts counts;
    // Some answer to a probe was built by the scanned address itself.
    bool identity_disclosed = false;

    std::vector<Port> ports_in(PortState s) const;
};

struct ReportOptions {
    // A state with more ports than this is folded into "Not shown".
    std::size_t summarize_threshold = 25;
};

std::string render_scan_report(const ScanReport& report, const ReportOptions& options = {});
// One "port state service" line per finding.
std::string render_scan_records(const ScanReport& report);

// Stealth SYN scanner: one probe per interval, a timer per probe, a bare RST
// after every SYN-ACK.
class SynScanner final : public Generator {
public:
    SynScanner(ScanSpec spec, Ipv4Address source_address);

    std::string name() const override { return "scan"; }
    const std::string& node() const override { return spec_.source; }
    void on_step(Engine& engine) override;
    void on_timer(Engine& engine, std::uint64_t tag) override;
    bool on_packet(Engine& engine, const Packet& packet) override;
    bool finished() const override { return done_ == probes_.size(); }

    ScanReport report() const;

    static Port probe_source_port(std::size_t index) noexcept;

private:
    struct Probe {
        Port port = 0;
        Port source_port = 0;
        int attempts = 0;
        bool done = false;
        PortState state = PortState::filtered;
        std::optional<std::string> banner;
        bool direct = false; // the answer came from the target itself
    };

    void transmit(Engine& engine, std::size_t index);
    void settle(std::size_t index, PortState state);

    ScanSpec spec_;
    Ipv4Address source_;
    std::vector<Probe> probes_;
    std::map<Port, std::size_t> by_source_port_;
    std::size_t next_ = 0;
    std::size_t done_ = 0;
};

struct FloodSpec {
    std::string source;
    Endpoint target;
    std::uint32_t rate = 0; // packets per simulated second
    Tick duration = 0;

    void validate() const;
};

struct FloodOutcome {
    std::size_t sent = 0;
    std::size_t delivered = 0;           // reached the target host
    std::optional<Tick> blocked_tick;    // first blacklist drop
    std::size_t delivered_after_block = 0;
};

// TCP SYN flood at a fixed rate. Packet k leaves at offset k * tps / rate.
class Flooder final : public Generator {
public:
    Flooder(FloodSpec spec, Ipv4Address source_address);

    std::string name() const override { return "flood"; }
    const std::string& node() const override { return spec_.source; }
    void on_step(Engine& engine) override;
    bool on_packet(Engine& engine, const Packet& packet) override;
    bool finished() const override { return done_; }

    FloodOutcome outcome(const Engine& engine) const;
    const std::vector<PacketId>& sent() const noexcept { return sent_; }

private:
    Tick offset(std::size_t k, Tick tps) const noexcept;

    FloodSpec spec_;
    Ipv4Address source_;
    Tick start_ = 0;
    bool started_ = false;
    bool done_ = false;
    std::vector<PacketId> sent_;
    std::set<Port> ports_;
};

struct RequestSpec {
    std::string source;
    Endpoint target;
    Tick timeout = 1000;
    int retries = 2;
    std::optional<Port> source_port;

    void validate() const;
};

enum class RequestStatus { pending, succeeded, refused, timed_out };

std::string_view request_status_name(RequestStatus s) noexcept;

struct RequestOutcome {
    RequestStatus status = RequestStatus::pending;
    int attempts = 0;
    std::size_t delivered = 0; // client packets that reached the target host
    FiveTuple sent_tuple;      // as the client addressed it
    std::optional<FiveTuple> reply_tuple;
};

// One TCP connection attempt: SYN, retransmitted on timeout; SYN-ACK is
// answered with ACK.
class Requester final : public Generator {
public:
    Requester(RequestSpec spec, Ipv4Address source_address);

    std::string name() const override { return "request"; }
    const std::string& node() const override { return spec_.source; }
    void on_step(Engine& engine) override;
    void on_timer(Engine& engine, std::uint64_t tag) override;
    bool on_packet(Engine& engine, const Packet& packet) override;
    bool finished() const override { return status_ != RequestStatus::pending; }

    RequestOutcome outcome(const Engine& engine) const;

private:
    void transmit(Engine& engine);

    RequestSpec spec_;
    Endpoint local_;
    RequestStatus status_ = RequestStatus::pending;
    int attempts_ = 0;
    std::vector<PacketId> sent_;
    std::optional<FiveTuple> reply_;
};

// Throws unroutable_target when `source` has no route to `target`.
void require_route(const Engine& engine, const std::string& source, Ipv4Address target);

// Address a generator on `node` sends from.
Ipv4Address source_address(const Engine& engine, const std::string& node);

// Adds the generator, runs the engine until idle, and collects the result.
ScanReport run_syn_scan(const ScanSpec& spec, Engine& engine);
FloodOutcome run_flood(const FloodSpec& spec, Engine& engine);

} // namespace dmzsim
