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

#include <fmt/format.h>

#include <utility>

namespace dmzsim {

std::string Trace::render() const
{
    std::string out;
    for (const auto& r : records_)
        out += fmt::format("{} {} {} {} {}\n", r.tick, r.seq, r.kind, r.node.empty() ? "-" : r.node, r.detail);
    return out;
}

std::string_view fate_name(Fate f) noexcept
{
    switch (f) {
    case Fate::in_flight: return "in-flight";
    case Fate::consumed: return "consumed";
    case Fate::dropped: return "dropped";
    case Fate::list_dropped: return "list-dropped";
    case Fate::rejected: return "rejected";
    }
    return "unknown";
}

namespace {

std::string tag(const Packet& p) { return "#" + std::to_string(p.id); }

std::string rule_name(const std::optional<RuleRef>& r)
{
    return r ? fmt::format("{}#{}", r->chain, r->index) : std::string("policy");
}

} // namespace

Engine::Engine(Topology topology, EngineParams params) : topology_(std::move(topology)), params_(std::move(params))
{
    std::uint64_t n = 0;
    for (const auto& [id, node] : topology_.nodes()) {
        if (!node.is_router())
            continue;
        RouterState st{.filter = {},
                       .nat = {},
                       .conntrack = ConnTable(params_.conntrack_timeouts, params_.conntrack_capacity),
                       .bindings = {},
                       .lists = {},
                       .rates = {},
                       .ports = PortAllocator(params_.seed + n++),
                       .last_gc = 0};
        routers_.emplace(id, std::move(st));
    }
}

void Engine::configure_router(std::string_view node, const ConfigIR& config)
{
    RouterState& st = router_state(node);
    st.filter = Ruleset(config.filter_rules);
    st.nat = config.nat_rules;
    for (const auto& e : config.list_entries)
        st.lists.add(e.list, e.address, e.timeout, now_);
}

EventId Engine::schedule(Tick delay, EventKind kind)
{
    if (delay < 0)
        throw Error(Errc::invalid_argument, fmt::format("negative delay {}", delay));
    const std::uint64_t seq = next_seq_++;
    queue_.push(Event{now_ + delay, seq, std::move(kind)});
    return seq;
}

GeneratorId Engine::add_generator(std::unique_ptr<Generator> generator, Tick start_delay)
{
    const auto id = static_cast<GeneratorId>(generators_.size());
    generator->id_ = id;
    generators_.push_back(std::move(generator));
    schedule(start_delay, GeneratorStepEvent{id});
    return id;
}

PacketId Engine::send(std::string_view node, Packet packet)
{
    auto emissions = originate(node, std::move(packet));
    const PacketId id = next_packet_ - 1;
    for (auto& e : emissions)
        emit_on(node, std::move(e));
    return id;
}

RunResult Engine::run(std::optional<Tick> until)
{
    while (!queue_.empty()) {
        if (until && queue_.top().tick > *until)
            break;
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.tick;
        current_seq_ = ev.seq;
        dispatch(ev);
    }
    RunResult r;
    r.end_tick = now_;
    r.pending = queue_.size();
    r.idle = queue_.empty();
    return r;
}

void Engine::dispatch(Event& ev)
{
    if (auto* d = std::get_if<DeliverEvent>(&ev.kind)) {
        deliver(*d);
    } else if (auto* t = std::get_if<TimerEvent>(&ev.kind)) {
        generators_.at(t->owner)->on_timer(*this, t->tag);
    } else if (auto* g = std::get_if<GeneratorStepEvent>(&ev.kind)) {
        generators_.at(g->generator)->on_step(*this);
    }
}

void Engine::note(std::string kind, std::string_view node, std::string detail)
{
    trace_.append(TraceRecord{now_, current_seq_, std::move(kind), std::string(node), std::move(detail)});
}

const PacketRecord* Engine::packet_record(PacketId id) const
{
    auto it = packets_.find(id);
    return it == packets_.end() ? nullptr : &it->second;
}

RouterState& Engine::router_state(std::string_view node)
{
    auto it = routers_.find(node);
    if (it == routers_.end())
        throw Error(Errc::unknown_node, fmt::format("{} is not a router", node));
    return it->second;
}

const RouterState& Engine::router_state(std::string_view node) const
{
    auto it = routers_.find(node);
    if (it == routers_.end())
        throw Error(Errc::unknown_node, fmt::format("{} is not a router", node));
    return it->second;
}

void Engine::settle(const Packet& packet, Fate fate, std::string_view node, bool at_host)
{
    auto it = packets_.find(packet.id);
    if (it == packets_.end())
        return;
    PacketRecord& rec = it->second;
    if (rec.fate != Fate::in_flight) {
        note("error", node, tag(packet) + " settled twice");
        return;
    }
    rec.fate = fate;
    rec.fate_node = std::string(node);
    rec.fate_at_host = at_host;
    rec.fate_tick = now_;
}

void Engine::gc(RouterState& st)
{
    st.conntrack.expire(now_);
    st.bindings.erase_if([&](const NatBinding& b) { return !st.conntrack.live(b.original, now_); });
    st.lists.purge(now_);
    st.last_gc = now_;
}

std::vector<Emission> Engine::originate(std::string_view node_id, Packet packet)
{
    const Node& node = topology_.node(node_id);
    packet.id = next_packet_++;
    packet.sent_tick = now_;
    if (packet.origin.is_unspecified())
        packet.origin = packet.src.addr;
    packets_.emplace(packet.id, PacketRecord{packet, std::string(node_id), Fate::in_flight, {}, false, 0});
    note("emit", node_id, packet.to_string());

    if (node.is_router())
        router_state(node_id).conntrack.note(packet, true, now_);

    RouteLookup route;
    try {
        route = node.lookup_route(packet.dst.addr);
    } catch (const Error& e) {
        if (e.code() != Errc::no_route)
            throw;
        note("drop", node_id, tag(packet) + " reason=no-route");
        settle(packet, Fate::dropped, node_id, false);
        return {};
    }
    return {Emission{std::move(packet), route.egress, route.next_hop}};
}

void Engine::emit_on(std::string_view node_id, Emission e)
{
    const Node& node = topology_.node(node_id);
    const Interface* iface = node.find_interface(e.egress);
    auto peer = iface ? topology_.neighbor(iface->link_id, e.next_hop) : std::nullopt;
    if (!peer) {
        note("drop", node_id, fmt::format("{} reason=no-neighbor next={}", tag(e.packet), e.next_hop.to_string()));
        settle(e.packet, Fate::dropped, node_id, false);
        return;
    }
    note("xmit", node_id, fmt::format("{} out={} next={}", tag(e.packet), e.egress, e.next_hop.to_string()));
    const Tick delay = topology_.link(iface->link_id).delay;
    schedule(delay, DeliverEvent{std::move(e.packet), peer->node, peer->interface});
}

void Engine::deliver(DeliverEvent& ev)
{
    const Node& node = topology_.node(ev.node);
    note("deliver", ev.node, fmt::format("{} in={} {}", tag(ev.packet), ev.interface, ev.packet.tuple().to_string()));

    if (node.is_router()) {
        for (auto& e : process_at_router(ev.node, ev.packet, ev.interface))
            emit_on(ev.node, std::move(e));
        return;
    }
    if (!node.owns_address(ev.packet.dst.addr)) {
        note("drop", ev.node, tag(ev.packet) + " reason=not-for-host");
        settle(ev.packet, Fate::dropped, ev.node, true);
        return;
    }
    note("consume", ev.node, tag(ev.packet));
    settle(ev.packet, Fate::consumed, ev.node, true);

    for (auto& g : generators_) {
        if (g->node() == ev.node && g->on_packet(*this, ev.packet))
            return;
    }
    if (auto reply = process_at_host(ev.node, ev.packet))
        send(ev.node, std::move(*reply));
}

std::optional<Packet> Engine::process_at_host(std::string_view host, const Packet& packet) const
{
    const Node& node = topology_.node(host);
    Packet reply;
    switch (packet.protocol) {
    case Protocol::tcp: {
        if (!packet.flags.syn || packet.flags.ack || packet.flags.rst)
            return std::nullopt;
        const ServiceBinding* svc = node.find_service(packet.dst.port, Protocol::tcp);
        reply = make_tcp(packet.dst, packet.src, svc ? TcpFlags::syn_ack() : TcpFlags::rst_ack());
        if (svc)
            reply.banner = svc->banner;
        break;
    }
    case Protocol::udp:
        if (node.find_service(packet.dst.port, Protocol::udp))
            return std::nullopt;
        reply = make_icmp_error(packet.dst.addr, packet.src.addr, packet.tuple());
        break;
    case Protocol::icmp:
        return std::nullopt;
    }
    reply.origin = packet.dst.addr;
    return reply;
}

std::vector<Emission> Engine::process_at_router(std::string_view router, Packet pkt, std::string_view ingress)
{
    const Node& node = topology_.node(router);
    RouterState& st = router_state(router);
    if (now_ - st.last_gc >= params_.gc_interval)
        gc(st);
    const Packet received = pkt;
    const std::string id = tag(pkt);

    // Conntrack keys every flow by its pre-NAT orientation, so replies are
    // mapped back through the binding before classification.
    Packet view = pkt;
    auto bound = st.bindings.find(pkt.tuple());
    if (bound && bound->direction == Direction::reverse) {
        view.src = bound->binding->original.dst;
        view.dst = bound->binding->original.src;
    }
    std::optional<FiveTuple> icmp_original;
    if (pkt.protocol == Protocol::icmp && pkt.icmp_ref) {
        auto m = st.bindings.find(pkt.icmp_ref->reversed());
        if (m && m->direction == Direction::reverse) {
            icmp_original = m->binding->original;
            view.icmp_ref = icmp_original;
            view.src.addr = icmp_original->dst.addr;
            view.dst.addr = icmp_original->src.addr;
        }
    }

    const ConnState state = st.conntrack.classify(view, now_);
    note("ct", router, fmt::format("{} state={}", id, conn_state_name(state)));

    // A binding whose connection has gone is stale; a new flow reusing the
    // tuple starts over.
    if (bound && bound->direction == Direction::forward && state == ConnState::new_
        && !st.conntrack.live(view.tuple(), now_)) {
        const FiveTuple stale = bound->binding->original;
        bound.reset();
        st.bindings.erase(stale);
    }

    // dstnat, or reversal of the masquerade on replies.
    bool created = false;
    if (bound) {
        const NatBinding& b = *bound->binding;
        pkt.dst = bound->direction == Direction::forward ? b.translated.dst : b.original.src;
    } else if (state == ConnState::new_ && !st.nat.empty()) {
        Packet out = apply_dstnat(st.nat, pkt, st.bindings);
        created = st.bindings.by_original(received.tuple()) != nullptr;
        pkt = std::move(out);
    }
    if (icmp_original) {
        pkt.dst.addr = icmp_original->src.addr;
        pkt.icmp_ref = *icmp_original;
    }
    if (pkt.dst != received.dst)
        note("dstnat", router, fmt::format("{} {} -> {}", id, received.dst.to_string(), pkt.dst.to_string()));

    auto forget = [&] {
        if (created)
            st.bindings.erase(received.tuple());
    };

    const bool local = node.owns_address(pkt.dst.addr);
    RouteLookup route;
    if (!local) {
        try {
            route = node.lookup_route(pkt.dst.addr);
        } catch (const Error& e) {
            if (e.code() != Errc::no_route)
                throw;
            note("drop", router, id + " reason=no-route");
            forget();
            settle(received, Fate::dropped, router, false);
            return {};
        }
    }

    const std::string_view chain = local ? "input" : "forward";
    Verdict verdict;
    try {
        verdict = evaluate_chain(st.filter, chain, pkt, state, st.lists, st.rates, now_);
    } catch (const Error& e) {
        if (e.code() != Errc::jump_depth_exceeded)
            throw;
        verdict = Verdict{VerdictKind::drop, {}, std::nullopt, false};
        note("error", router, fmt::format("{} {}", id, e.what()));
    }
    for (const auto& add : verdict.list_additions) {
        note("list-add", router,
             fmt::format("{} list={} addr={} expiry={} rule={}", id, add.list, add.addr.to_string(),
                         add.expiry ? std::to_string(*add.expiry) : "permanent", rule_name(add.rule)));
    }
    note("verdict", router,
         fmt::format("{} chain={} state={} verdict={} rule={}", id, chain, conn_state_name(state),
                     verdict_name(verdict.kind), rule_name(verdict.decided_by)));

    if (verdict.kind != VerdictKind::accept) {
        forget();
        if (verdict.kind == VerdictKind::reject_with_rst && received.protocol == Protocol::tcp && !received.flags.rst) {
            Packet rst = make_tcp(received.dst, received.src, TcpFlags::rst_ack());
            const Interface* own = node.interface_for_address(received.dst.addr);
            if (!own)
                own = node.find_interface(ingress);
            if (own && own->address)
                rst.origin = own->address->base();
            note("reject", router, id);
            settle(received, Fate::rejected, router, false);
            return originate(router, std::move(rst));
        }
        note(verdict.list_match ? "list-drop" : "drop", router,
             fmt::format("{} src={}", id, received.src.addr.to_string()));
        settle(received, verdict.list_match ? Fate::list_dropped : Fate::dropped, router, false);
        return {};
    }

    if (local) {
        st.conntrack.note(view, true, now_);
        note("consume", router, id);
        settle(received, Fate::consumed, router, false);
        if (auto reply = process_at_host(router, pkt))
            return originate(router, std::move(*reply));
        return {};
    }

    // srcnat, or reversal of the dstnat on replies.
    const Endpoint before = pkt.src;
    if (bound) {
        const NatBinding& b = *bound->binding;
        pkt.src = bound->direction == Direction::forward ? b.translated.src : b.original.dst;
    } else if (state == ConnState::new_) {
        const Interface* out = node.find_interface(route.egress);
        if (out && out->address) {
            try {
                pkt = apply_srcnat(st.nat, received.tuple(), pkt, route.egress, out->address->base(), st.bindings,
                                   st.ports);
            } catch (const Error& e) {
                if (e.code() != Errc::port_exhaustion)
                    throw;
                note("drop", router, id + " reason=port-exhaustion");
                forget();
                settle(received, Fate::dropped, router, false);
                return {};
            }
        }
    }
    if (icmp_original)
        pkt.src.addr = icmp_original->dst.addr;
    if (pkt.src != before)
        note("srcnat", router, fmt::format("{} {} -> {}", id, before.to_string(), pkt.src.to_string()));

    if (st.conntrack.note(view, true, now_) == NoteResult::capacity_exhausted)
        note("ct-full", router, id);
    return {Emission{std::move(pkt), route.egress, route.next_hop}};
}

} // namespace dmzsim
