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

#include "dmzsim/traffic.hpp"

#include "dmzsim/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <memory>
#include <utility>

namespace dmzsim {

std::string_view port_state_name(PortState s) noexcept
{
    switch (s) {
    case PortState::open: return "open";
    case PortState::closed: return "closed";
    case PortState::filtered: return "filtered";
    }
    return "unknown";
}

std::string_view service_name(Port port) noexcept
{
    static constexpr std::array<std::pair<Port, std::string_view>, 8> table{{
        {21, "ftp"},
        {22, "ssh"},
        {80, "http"},
        {110, "pop3"},
        {256, "fw1-secureremote"},
        {443, "https"},
        {993, "imaps"},
        {8888, "sun-answerbook"},
    }};
    for (const auto& [p, name] : table) {
        if (p == port)
            return name;
    }
    return "unknown";
}

PortState classify_response(const std::optional<Packet>& reply) noexcept
{
    if (!reply || reply->protocol != Protocol::tcp)
        return PortState::filtered;
    if (reply->flags.syn && reply->flags.ack)
        return PortState::open;
    if (reply->flags.rst)
        return PortState::closed;
    return PortState::filtered;
}

void ScanSpec::validate() const
{
    if (ports.empty())
        throw Error(Errc::bad_value, "scan port set is empty");
    if (timeout <= 0)
        throw Error(Errc::bad_value, "scan timeout must be positive");
    if (retries < 0)
        throw Error(Errc::bad_value, "scan retries must not be negative");
    if (interval < 0)
        throw Error(Errc::bad_value, "scan interval must not be negative");
}

std::vector<Port> ScanReport::ports_in(PortState s) const
{
    std::vector<Port> out;
    for (const auto& f : findings) {
        if (f.state == s)
            out.push_back(f.port);
    }
    return out;
}

std::string render_scan_report(const ScanReport& report, const ReportOptions& options)
{
    std::string out = fmt::format("Nmap-style scan report for {} ({})\n", report.label, report.target.to_string());

    const bool fold_filtered = report.counts.filtered > options.summarize_threshold;
    const bool fold_closed = report.counts.closed > options.summarize_threshold;
    if (fold_filtered && fold_closed)
        out += fmt::format("Not shown: {} filtered ports, {} closed ports\n", report.counts.filtered, report.counts.closed);
    else if (fold_filtered)
        out += fmt::format("Not shown: {} filtered ports\n", report.counts.filtered);
    else if (fold_closed)
        out += fmt::format("Not shown: {} closed ports\n", report.counts.closed);

    out += "PORT STATE SERVICE\n";
    for (const auto& f : report.findings) {
        if ((f.state == PortState::filtered && fold_filtered) || (f.state == PortState::closed && fold_closed))
            continue;
        out += fmt::format("{}/{} {} {}", f.port, protocol_name(f.protocol), port_state_name(f.state), f.service_name);
        if (f.banner && report.identity_disclosed)
            out += " " + *f.banner;
        out += '\n';
    }
    out += fmt::format("Host identity: {}\n", report.identity_disclosed ? "disclosed" : "concealed");
    return out;
}

std::string render_scan_records(const ScanReport& report)
{
    std::string out;
    for (const auto& f : report.findings)
        out += fmt::format("{} {} {}\n", f.port, port_state_name(f.state), f.service_name);
    return out;
}

// ---------------------------------------------------------------------------

SynScanner::SynScanner(ScanSpec spec, Ipv4Address source_address) : spec_(std::move(spec)), source_(source_address)
{
    spec_.validate();
    std::vector<Port> ports;
    for (const auto& r : spec_.ports.ranges()) {
        for (unsigned p = r.lo; p <= r.hi; ++p)
            ports.push_back(static_cast<Port>(p));
    }
    std::sort(ports.begin(), ports.end());
    ports.erase(std::unique(ports.begin(), ports.end()), ports.end());
    probes_.reserve(ports.size());
    for (std::size_t i = 0; i < ports.size(); ++i) {
        Probe p;
        p.port = ports[i];
        p.source_port = probe_source_port(i);
        by_source_port_[p.source_port] = i;
        probes_.push_back(std::move(p));
    }
}

Port SynScanner::probe_source_port(std::size_t index) noexcept
{
    // Starts at 40000 and wraps inside the ephemeral range.
    return static_cast<Port>(ephemeral_lo + (index + 38976) % (65536 - ephemeral_lo));
}

void SynScanner::on_step(Engine& engine)
{
    if (next_ >= probes_.size())
        return;
    transmit(engine, next_++);
    if (next_ < probes_.size())
        engine.schedule(spec_.interval, GeneratorStepEvent{id()});
}

void SynScanner::transmit(Engine& engine, std::size_t index)
{
    Probe& p = probes_[index];
    ++p.attempts;
    engine.send(spec_.source, make_tcp({source_, p.source_port}, {spec_.target, p.port}, TcpFlags::syn_only()));
    const std::uint64_t tag = (std::uint64_t(index) << 8) | std::uint64_t(p.attempts);
    engine.schedule(spec_.timeout, TimerEvent{id(), tag});
}

void SynScanner::settle(std::size_t index, PortState state)
{
    Probe& p = probes_[index];
    if (p.done)
        return;
    p.done = true;
    p.state = state;
    ++done_;
}

void SynScanner::on_timer(Engine& engine, std::uint64_t tag)
{
    const std::size_t index = tag >> 8;
    const int attempt = int(tag & 0xff);
    if (index >= probes_.size())
        return;
    Probe& p = probes_[index];
    if (p.done || attempt != p.attempts)
        return;
    if (p.attempts <= spec_.retries)
        transmit(engine, index);
    else
        settle(index, PortState::filtered);
}

bool SynScanner::on_packet(Engine& engine, const Packet& packet)
{
    if (packet.dst.addr != source_)
        return false;
    Port local_port = packet.dst.port;
    if (packet.protocol == Protocol::icmp) {
        if (!packet.icmp_ref)
            return false;
        local_port = packet.icmp_ref->src.port;
    }
    auto it = by_source_port_.find(local_port);
    if (it == by_source_port_.end())
        return false;
    Probe& p = probes_[it->second];

    if (packet.protocol == Protocol::icmp) {
        settle(it->second, PortState::filtered);
        return true;
    }
    if (packet.protocol != Protocol::tcp || packet.src.addr != spec_.target || packet.src.port != p.port)
        return false;
    if (p.done)
        return true; // late duplicate

    const PortState state = classify_response(packet);
    if (state == PortState::open) {
        p.direct = packet.origin == spec_.target;
        if (p.direct)
            p.banner = packet.banner;
        // Tear the half-open connection down instead of completing it.
        engine.send(spec_.source, make_tcp(packet.dst, packet.src, TcpFlags::rst_only()));
    }
    settle(it->second, state);
    return true;
}

ScanReport SynScanner::report() const
{
    ScanReport r;
    r.label = spec_.label.empty() ? spec_.target.to_string() : spec_.label;
    r.target = spec_.target;
    for (const auto& p : probes_) {
        PortFinding f;
        f.port = p.port;
        f.state = p.state;
        f.service_name = std::string(service_name(p.port));
        f.banner = p.banner;
        switch (p.state) {
        case PortState::open: ++r.counts.open; break;
        case PortState::closed: ++r.counts.closed; break;
        case PortState::filtered: ++r.counts.filtered; break;
        }
        if (p.state == PortState::open && p.direct)
            r.identity_disclosed = true;
        r.findings.push_back(std::move(f));
    }
    return r;
}

// ---------------------------------------------------------------------------

void FloodSpec::validate() const
{
    if (rate == 0)
        throw Error(Errc::bad_value, "flood rate must be positive");
    if (duration < 0)
        throw Error(Errc::bad_value, "flood duration must not be negative");
}

Flooder::Flooder(FloodSpec spec, Ipv4Address source_address) : spec_(std::move(spec)), source_(source_address)
{
    spec_.validate();
}

Tick Flooder::offset(std::size_t k, Tick tps) const noexcept
{
    return Tick(k) * tps / Tick(spec_.rate);
}

void Flooder::on_step(Engine& engine)
{
    if (!started_) {
        started_ = true;
        start_ = engine.now();
    }
    const Tick tps = engine.params().ticks_per_second;
    const std::size_t k = sent_.size();
    if (offset(k, tps) >= spec_.duration) {
        done_ = true;
        return;
    }
    const auto port = static_cast<Port>(ephemeral_lo + (k + 8976) % (65536 - ephemeral_lo));
    ports_.insert(port);
    sent_.push_back(engine.send(spec_.source, make_tcp({source_, port}, spec_.target, TcpFlags::syn_only())));

    const Tick next = offset(k + 1, tps);
    if (next >= spec_.duration) {
        done_ = true;
        return;
    }
    engine.schedule(start_ + next - engine.now(), GeneratorStepEvent{id()});
}

bool Flooder::on_packet(Engine&, const Packet& packet)
{
    // Answers to the flood are swallowed; the connections stay half-open.
    return packet.protocol == Protocol::tcp && packet.dst.addr == source_ && packet.src == spec_.target
           && ports_.contains(packet.dst.port);
}

FloodOutcome Flooder::outcome(const Engine& engine) const
{
    FloodOutcome o;
    o.sent = sent_.size();
    for (PacketId id : sent_) {
        const PacketRecord* rec = engine.packet_record(id);
        if (rec && rec->fate == Fate::list_dropped && (!o.blocked_tick || rec->fate_tick < *o.blocked_tick))
            o.blocked_tick = rec->fate_tick;
    }
    for (PacketId id : sent_) {
        const PacketRecord* rec = engine.packet_record(id);
        if (!rec || rec->fate != Fate::consumed || !rec->fate_at_host)
            continue;
        ++o.delivered;
        if (o.blocked_tick && rec->sent.sent_tick >= *o.blocked_tick)
            ++o.delivered_after_block;
    }
    return o;
}

// ---------------------------------------------------------------------------

std::string_view request_status_name(RequestStatus s) noexcept
{
    switch (s) {
    case RequestStatus::pending: return "pending";
    case RequestStatus::succeeded: return "succeeded";
    case RequestStatus::refused: return "refused";
    case RequestStatus::timed_out: return "timed-out";
    }
    return "unknown";
}

void RequestSpec::validate() const
{
    if (timeout <= 0)
        throw Error(Errc::bad_value, "request timeout must be positive");
    if (retries < 0)
        throw Error(Errc::bad_value, "request retries must not be negative");
}

Requester::Requester(RequestSpec spec, Ipv4Address source_address) : spec_(std::move(spec))
{
    spec_.validate();
    local_ = {source_address, spec_.source_port.value_or(Port(49152))};
}

void Requester::on_step(Engine& engine)
{
    if (attempts_ == 0)
        transmit(engine);
}

void Requester::transmit(Engine& engine)
{
    ++attempts_;
    sent_.push_back(engine.send(spec_.source, make_tcp(local_, spec_.target, TcpFlags::syn_only())));
    engine.schedule(spec_.timeout, TimerEvent{id(), std::uint64_t(attempts_)});
}

void Requester::on_timer(Engine& engine, std::uint64_t tag)
{
    if (status_ != RequestStatus::pending || int(tag) != attempts_)
        return;
    if (attempts_ <= spec_.retries)
        transmit(engine);
    else
        status_ = RequestStatus::timed_out;
}

bool Requester::on_packet(Engine& engine, const Packet& packet)
{
    if (packet.protocol != Protocol::tcp || packet.dst != local_)
        return false;
    if (status_ != RequestStatus::pending)
        return true;
    reply_ = packet.tuple();
    if (packet.flags.syn && packet.flags.ack) {
        sent_.push_back(engine.send(spec_.source, make_tcp(local_, packet.src, TcpFlags::ack_only())));
        status_ = RequestStatus::succeeded;
    } else if (packet.flags.rst) {
        status_ = RequestStatus::refused;
    }
    return true;
}

RequestOutcome Requester::outcome(const Engine& engine) const
{
    RequestOutcome o;
    o.status = status_;
    o.attempts = attempts_;
    o.sent_tuple = FiveTuple{local_, spec_.target, Protocol::tcp};
    o.reply_tuple = reply_;
    for (PacketId id : sent_) {
        const PacketRecord* rec = engine.packet_record(id);
        if (rec && rec->fate == Fate::consumed && rec->fate_at_host)
            ++o.delivered;
    }
    return o;
}

// ---------------------------------------------------------------------------

Ipv4Address source_address(const Engine& engine, const std::string& node)
{
    auto addr = engine.topology().node(node).primary_address();
    if (!addr)
        throw Error(Errc::unroutable_target, fmt::format("{} has no address to send from", node));
    return *addr;
}

void require_route(const Engine& engine, const std::string& source, Ipv4Address target)
{
    try {
        engine.topology().node(source).lookup_route(target);
    } catch (const Error& e) {
        if (e.code() != Errc::no_route)
            throw;
        throw Error(Errc::unroutable_target, fmt::format("{} has no route to {}", source, target.to_string()));
    }
}

ScanReport run_syn_scan(const ScanSpec& spec, Engine& engine)
{
    spec.validate();
    require_route(engine, spec.source, spec.target);
    auto scanner = std::make_unique<SynScanner>(spec, source_address(engine, spec.source));
    const GeneratorId id = engine.add_generator(std::move(scanner));
    engine.run();
    return static_cast<const SynScanner&>(engine.generator(id)).report();
}

FloodOutcome run_flood(const FloodSpec& spec, Engine& engine)
{
    spec.validate();
    require_route(engine, spec.source, spec.target.addr);
    auto flooder = std::make_unique<Flooder>(spec, source_address(engine, spec.source));
    const GeneratorId id = engine.add_generator(std::move(flooder));
    engine.run();
    return static_cast<const Flooder&>(engine.generator(id)).outcome(engine);
}

} // namespace dmzsim
