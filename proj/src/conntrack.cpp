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

#include "dmzsim/conntrack.hpp"

#include <iterator>

namespace dmzsim {

std::string_view conn_state_name(ConnState s) noexcept
{
    switch (s) {
    case ConnState::new_: return "new";
    case ConnState::established: return "established";
    case ConnState::related: return "related";
    case ConnState::invalid: return "invalid";
    }
    return "?";
}

std::optional<ConnState> parse_conn_state(std::string_view text) noexcept
{
    if (text == "new")
        return ConnState::new_;
    if (text == "established")
        return ConnState::established;
    if (text == "related")
        return ConnState::related;
    if (text == "invalid")
        return ConnState::invalid;
    return std::nullopt;
}

std::string_view conn_phase_name(ConnPhase p) noexcept
{
    switch (p) {
    case ConnPhase::syn_sent: return "syn_sent";
    case ConnPhase::confirmed: return "confirmed";
    case ConnPhase::closing: return "closing";
    }
    return "?";
}

Tick ConnTimeouts::for_phase(ConnPhase p) const noexcept
{
    switch (p) {
    case ConnPhase::syn_sent: return syn_sent;
    case ConnPhase::confirmed: return confirmed;
    case ConnPhase::closing: return closing;
    }
    return 0;
}

bool ConnTable::expired(const ConnEntry& e, Tick now) const noexcept
{
    return now - e.last_seen > timeouts_.for_phase(e.phase);
}

std::optional<ConnTable::Match> ConnTable::find(const FiveTuple& tuple, Tick now) const
{
    auto it = entries_.find(tuple.normalized());
    if (it == entries_.end() || expired(it->second, now))
        return std::nullopt;
    const auto dir = it->second.key == tuple ? Direction::forward : Direction::reverse;
    return Match{&it->second, dir};
}

namespace {

enum class Shape { syn, syn_ack, rst, fin, ack, bare };

Shape shape_of(const TcpFlags& f)
{
    if (f.rst)
        return Shape::rst;
    if (f.syn)
        return f.ack ? Shape::syn_ack : Shape::syn;
    if (f.fin)
        return Shape::fin;
    if (f.ack)
        return Shape::ack;
    return Shape::bare;
}

ConnState classify_tcp(const TcpFlags& flags, const ConnTable::Match* m)
{
    const auto shape = shape_of(flags);
    if (shape == Shape::bare)
        return ConnState::invalid;
    if (!m)
        return shape == Shape::syn ? ConnState::new_ : ConnState::invalid;

    const bool fwd = m->direction == Direction::forward;
    switch (m->entry->phase) {
    case ConnPhase::syn_sent:
        if (shape == Shape::syn)
            return fwd ? ConnState::new_ : ConnState::invalid;
        if (shape == Shape::rst)
            return ConnState::established;
        if (shape == Shape::syn_ack && !fwd)
            return ConnState::established;
        return ConnState::invalid;
    case ConnPhase::confirmed:
        if (shape == Shape::syn)
            return ConnState::invalid;
        if (shape == Shape::syn_ack)
            return fwd ? ConnState::invalid : ConnState::established;
        return ConnState::established;
    case ConnPhase::closing:
        if (shape == Shape::syn || shape == Shape::syn_ack)
            return ConnState::invalid;
        return ConnState::established;
    }
    return ConnState::invalid;
}

} // namespace

ConnState ConnTable::classify(const Packet& packet, Tick now) const
{
    if (packet.protocol == Protocol::icmp && packet.icmp_ref)
        return live(*packet.icmp_ref, now) ? ConnState::related : ConnState::invalid;

    const auto m = find(packet.tuple(), now);
    if (packet.protocol == Protocol::tcp)
        return classify_tcp(packet.flags, m ? &*m : nullptr);
    return m ? ConnState::established : ConnState::new_;
}

NoteResult ConnTable::note(const Packet& packet, bool accepted, Tick now)
{
    if (!accepted)
        return NoteResult::unchanged;

    const auto state = classify(packet, now);
    if (state == ConnState::invalid || state == ConnState::related)
        return NoteResult::unchanged;

    const auto key = packet.tuple().normalized();
    auto it = entries_.find(key);
    if (it != entries_.end() && expired(it->second, now)) {
        entries_.erase(it);
        it = entries_.end();
    }

    if (it == entries_.end()) {
        // Only NEW can get here without a live entry.
        if (capacity_ && entries_.size() >= *capacity_) {
            expire(now);
            if (entries_.size() >= *capacity_)
                return NoteResult::capacity_exhausted;
        }
        ConnEntry e;
        e.key = packet.tuple();
        e.phase = ConnPhase::syn_sent;
        e.last_seen = now;
        e.packets_fwd = 1;
        entries_.emplace(key, e);
        return NoteResult::inserted;
    }

    auto& e = it->second;
    const bool fwd = e.key == packet.tuple();
    (fwd ? e.packets_fwd : e.packets_rev) += 1;
    e.last_seen = now;

    if (packet.protocol == Protocol::tcp) {
        const auto& f = packet.flags;
        if (e.phase == ConnPhase::syn_sent && !fwd && f.syn && f.ack && !f.rst)
            e.phase = ConnPhase::confirmed;
        else if ((f.rst || f.fin) && e.phase != ConnPhase::closing)
            e.phase = ConnPhase::closing;
    } else if (e.phase == ConnPhase::syn_sent && !fwd) {
        e.phase = ConnPhase::confirmed;
    }
    return NoteResult::updated;
}

std::size_t ConnTable::expire(Tick now)
{
    return std::erase_if(entries_, [&](const auto& kv) { return expired(kv.second, now); });
}

std::string ConnTable::dump() const
{
    std::string out;
    for (const auto& [key, e] : entries_)
        out += e.key.to_string() + ' ' + std::string(conn_phase_name(e.phase)) + ' ' + std::to_string(e.last_seen) + '\n';
    return out;
}

} // namespace dmzsim
