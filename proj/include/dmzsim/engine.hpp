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

#include "dmzsim/conntrack.hpp"
#include "dmzsim/firewall.hpp"
#include "dmzsim/netcore.hpp"
#include "dmzsim/ruleparse.hpp"
#include "dmzsim/topology.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace dmzsim {

using EventId = std::uint64_t;
using GeneratorId = std::uint32_t;

struct EngineParams {
    Tick ticks_per_second = 1000;
    std::uint64_t seed = 0;
    ConnTimeouts conntrack_timeouts;
    std::optional<std::size_t> conntrack_capacity;
    // How often routers sweep expired conntrack entries, NAT bindings and
    // list entries. Expiry is still checked on every access.
    Tick gc_interval = 1000;
};

struct DeliverEvent {
    Packet packet;
    std::string node;
    std::string interface;
};

struct TimerEvent {
    GeneratorId owner = 0;
    std::uint64_t tag = 0;
};

struct GeneratorStepEvent {
    GeneratorId generator = 0;
};

using EventKind = std::variant<DeliverEvent, TimerEvent, GeneratorStepEvent>;

struct Event {
    Tick tick = 0;
    std::uint64_t seq = 0;
    EventKind kind;
};

struct TraceRecord {
    Tick tick = 0;
    std::uint64_t seq = 0;
    std::string kind;
    std::string node;
    std::string detail;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// Append-only; one "tick seq kind node detail" line per record.
class Trace {
public:
    void append(TraceRecord r) { records_.push_back(std::move(r)); }
    const std::vector<TraceRecord>& records() const noexcept { return records_; }
    bool empty() const noexcept { return records_.empty(); }
    std::string render() const;

private:
    std::vector<TraceRecord> records_;
};

enum class Fate { in_flight, consumed, dropped, list_dropped, rejected };

std::string_view fate_name(Fate f) noexcept;

struct PacketRecord {
    Packet sent; // as originated
    std::string origin_node;
    Fate fate = Fate::in_flight;
    std::string fate_node;
    bool fate_at_host = false;
    Tick fate_tick = 0;
};

class Engine;

// Traffic sources/sinks living on a host. Packets addressed to the host are
// offered to its generators before the host's own stack sees them.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string name() const = 0;
    virtual const std::string& node() const = 0;
    virtual void on_step(Engine& engine) = 0;
    virtual void on_timer(Engine&, std::uint64_t) {}
    // True when the generator claims the packet.
    virtual bool on_packet(Engine&, const Packet&) { return false; }
    virtual bool finished() const = 0;

    // Assigned by Engine::add_generator.
    GeneratorId id() const noexcept { return id_; }

private:
    friend class Engine;
    GeneratorId id_ = 0;
};

struct Emission {
    Packet packet;
    std::string egress;
    Ipv4Address next_hop;
};

struct RouterState {
    Ruleset filter;
    std::vector<NatRule> nat;
    ConnTable conntrack;
    NatTable bindings;
    AddressLists lists;
    RateTracker rates;
    PortAllocator ports;
    Tick last_gc = 0;
};

struct RunResult {
    Tick end_tick = 0;
    bool idle = true;           // queue drained
    std::size_t pending = 0;    // events left beyond the horizon
};

class Engine {
public:
    explicit Engine(Topology topology, EngineParams params = {});
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    // Installs filter chains, NAT rules and static address-list entries.
    void configure_router(std::string_view node, const ConfigIR& config);

    // Rejects negative delays with Error{invalid_argument}.
    EventId schedule(Tick delay, EventKind kind);

    GeneratorId add_generator(std::unique_ptr<Generator> generator, Tick start_delay = 0);
    Generator& generator(GeneratorId id) { return *generators_.at(id); }
    const Generator& generator(GeneratorId id) const { return *generators_.at(id); }
    std::size_t generator_count() const noexcept { return generators_.size(); }

    // Originates a packet at `node`: assigns id and sent tick, traces it,
    // and routes it. Returns the id.
    PacketId send(std::string_view node, Packet packet);

    // Processes events in (tick, seq) order until the queue drains or the
    // next event lies past `until`.
    RunResult run(std::optional<Tick> until = std::nullopt);

    // Router pipeline: classify, dstnat, route, filter, srcnat, note, emit.
    std::vector<Emission> process_at_router(std::string_view router, Packet packet, std::string_view ingress);
    // Host stack: SYN to a bound port gets SYN-ACK, otherwise RST; other TCP
    // is absorbed; UDP to an unbound port gets an ICMP error.
    std::optional<Packet> process_at_host(std::string_view host, const Packet& packet) const;

    Tick now() const noexcept { return now_; }
    const Topology& topology() const noexcept { return topology_; }
    const EngineParams& params() const noexcept { return params_; }
    const Trace& trace() const noexcept { return trace_; }
    const PacketRecord* packet_record(PacketId id) const;
    RouterState& router_state(std::string_view node);
    const RouterState& router_state(std::string_view node) const;
    const std::map<std::string, RouterState, std::less<>>& routers() const noexcept { return routers_; }

    void note(std::string kind, std::string_view node, std::string detail);

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept
        {
            return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
        }
    };

    void dispatch(Event& ev);
    void deliver(DeliverEvent& ev);
    void emit_on(std::string_view node, Emission e);
    // Assigns an id, traces the packet and resolves its first hop.
    std::vector<Emission> originate(std::string_view node, Packet packet);
    void settle(const Packet& packet, Fate fate, std::string_view node, bool at_host);
    void gc(RouterState& st);

    Topology topology_;
    EngineParams params_;
    std::map<std::string, RouterState, std::less<>> routers_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<std::unique_ptr<Generator>> generators_;
    std::unordered_map<PacketId, PacketRecord> packets_;
    Trace trace_;
    Tick now_ = 0;
    std::uint64_t next_seq_ = 1;
    std::uint64_t current_seq_ = 0;
    PacketId next_packet_ = 1;
};

} // namespace dmzsim
