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

#include "dmzsim/firewall.hpp"

#include "dmzsim/error.hpp"

#include <algorithm>
#include <charconv>

namespace dmzsim {

namespace {

Port parse_port(std::string_view text, std::string_view whole)
{
    unsigned value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || end != text.data() + text.size() || value > 65535)
        throw Error(Errc::bad_value, "bad port list '" + std::string(whole) + "'");
    return Port(value);
}

} // namespace

PortSet PortSet::parse(std::string_view text)
{
    std::vector<PortRange> ranges;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        const auto dash = item.find('-');
        PortRange r;
        if (dash == std::string_view::npos) {
            r.lo = r.hi = parse_port(item, text);
        } else {
            r.lo = parse_port(item.substr(0, dash), text);
            r.hi = parse_port(item.substr(dash + 1), text);
            if (r.lo > r.hi)
                throw Error(Errc::bad_value, "descending port range in '" + std::string(text) + "'");
        }
        ranges.push_back(r);
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return PortSet(std::move(ranges));
}

bool PortSet::contains(Port p) const noexcept
{
    return std::any_of(ranges_.begin(), ranges_.end(), [p](const PortRange& r) { return r.lo <= p && p <= r.hi; });
}

std::string PortSet::to_string() const
{
    std::string out;
    for (const auto& r : ranges_) {
        if (!out.empty())
            out += ',';
        out += std::to_string(r.lo);
        if (r.hi != r.lo)
            out += '-' + std::to_string(r.hi);
    }
    return out;
}

ConnStateSet::ConnStateSet(std::initializer_list<ConnState> states)
{
    for (auto s : states)
        insert(s);
}

std::string ConnStateSet::to_string() const
{
    std::string out;
    for (auto s : {ConnState::established, ConnState::related, ConnState::new_, ConnState::invalid}) {
        if (!contains(s))
            continue;
        if (!out.empty())
            out += ',';
        out += conn_state_name(s);
    }
    return out;
}

std::string_view action_name(ActionKind k) noexcept
{
    switch (k) {
    case ActionKind::accept: return "accept";
    case ActionKind::drop: return "drop";
    case ActionKind::reject_with_rst: return "reject";
    case ActionKind::add_src_to_address_list: return "add-src-to-address-list";
    case ActionKind::jump: return "jump";
    }
    return "?";
}

std::string_view verdict_name(VerdictKind k) noexcept
{
    switch (k) {
    case VerdictKind::accept: return "accept";
    case VerdictKind::drop: return "drop";
    case VerdictKind::reject_with_rst: return "reject";
    }
    return "?";
}

void FilterRule::validate() const
{
    if (dst_ports && (!protocol || *protocol == Protocol::icmp))
        throw Error(Errc::bad_value, "dst-port requires protocol tcp or udp");
    if (action.kind == ActionKind::add_src_to_address_list && action.list.empty())
        throw Error(Errc::bad_value, "add-src-to-address-list needs an address list");
    if (action.kind == ActionKind::jump && action.target.empty())
        throw Error(Errc::bad_value, "jump needs a target chain");
    if (new_conn_rate && new_conn_rate->window <= 0)
        throw Error(Errc::bad_value, "connection rate window must be positive");
}

Ruleset::Ruleset(const std::vector<FilterRule>& rules)
{
    for (const auto& r : rules) {
        r.validate();
        auto& c = chains_[r.chain];
        c.name = r.chain;
        c.rules.push_back(r);
    }
    for (const auto& [name, c] : chains_)
        for (const auto& r : c.rules)
            if (r.action.kind == ActionKind::jump && !chains_.contains(r.action.target))
                throw Error(Errc::unknown_chain, "jump from '" + name + "' to unknown chain '" + r.action.target + "'");
}

const RuleChain* Ruleset::chain(std::string_view name) const noexcept
{
    auto it = chains_.find(name);
    return it == chains_.end() ? nullptr : &it->second;
}

void AddressLists::add(const std::string& list, Ipv4Address addr, std::optional<Tick> timeout, Tick now)
{
    auto& entries = lists_[list];
    auto it = entries.find(addr);
    const std::optional<Tick> expiry = timeout ? std::optional<Tick>(now + *timeout) : std::nullopt;
    if (it == entries.end() || (it->second && it->second <= now)) {
        entries[addr] = expiry;
        return;
    }
    // Permanent entries stay permanent; timed entries get the later expiry.
    if (!it->second)
        return;
    if (!expiry || *expiry > *it->second)
        it->second = expiry;
}

bool AddressLists::contains(std::string_view list, Ipv4Address addr, Tick now) const
{
    auto l = lists_.find(list);
    if (l == lists_.end())
        return false;
    auto it = l->second.find(addr);
    return it != l->second.end() && (!it->second || now < *it->second);
}

std::optional<Tick> AddressLists::expiry(std::string_view list, Ipv4Address addr) const
{
    auto l = lists_.find(list);
    if (l == lists_.end())
        return std::nullopt;
    auto it = l->second.find(addr);
    return it == l->second.end() ? std::nullopt : it->second;
}

std::size_t AddressLists::purge(Tick now)
{
    std::size_t n = 0;
    for (auto l = lists_.begin(); l != lists_.end();) {
        n += std::erase_if(l->second, [now](const auto& kv) { return kv.second && *kv.second <= now; });
        l = l->second.empty() ? lists_.erase(l) : std::next(l);
    }
    return n;
}

bool AddressLists::empty() const noexcept
{
    return lists_.empty();
}

std::string AddressLists::dump(Tick now) const
{
    std::string out;
    for (const auto& [name, entries] : lists_)
        for (const auto& [addr, expiry] : entries) {
            if (expiry && *expiry <= now)
                continue;
            out += name + ' ' + addr.to_string() + ' ' + (expiry ? std::to_string(*expiry) : "permanent") + '\n';
        }
    return out;
}

void RateTracker::record(Ipv4Address src, Tick now)
{
    auto& q = attempts_[src];
    q.push_back(now);
    if (horizon_ > 0)
        while (!q.empty() && q.front() <= now - horizon_)
            q.pop_front();
}

std::size_t RateTracker::count(Ipv4Address src, Tick now, Tick window) const
{
    auto it = attempts_.find(src);
    if (it == attempts_.end())
        return 0;
    const auto& q = it->second;
    const auto first = std::upper_bound(q.begin(), q.end(), now - window);
    const auto last = std::upper_bound(q.begin(), q.end(), now);
    return std::size_t(std::distance(first, last));
}

bool RateTracker::check(Ipv4Address src, Tick now, std::uint32_t threshold, Tick window)
{
    horizon_ = std::max(horizon_, window);
    record(src, now);
    return count(src, now, window) > threshold;
}

bool rule_matches_static(const FilterRule& rule, const Packet& packet, ConnState state, const AddressLists& lists, Tick now)
{
    if (rule.protocol && *rule.protocol != packet.protocol)
        return false;
    if (rule.dst_ports && (packet.protocol == Protocol::icmp || !rule.dst_ports->contains(packet.dst.port)))
        return false;
    if (rule.src && !rule.src->contains(packet.src.addr))
        return false;
    if (rule.dst && !rule.dst->contains(packet.dst.addr))
        return false;
    if (rule.conn_states && !rule.conn_states->contains(state))
        return false;
    if (rule.src_address_list && !lists.contains(*rule.src_address_list, packet.src.addr, now))
        return false;
    if (rule.new_conn_rate && state != ConnState::new_)
        return false;
    return true;
}

namespace {

struct EvalContext {
    const Ruleset& rules;
    const Packet& packet;
    ConnState state;
    AddressLists& lists;
    RateTracker& rates;
    Tick now;
    bool recorded = false;
    Verdict verdict;
};

bool rate_exceeded(EvalContext& ctx, const RateLimit& limit)
{
    if (!ctx.recorded) {
        ctx.recorded = true;
        return ctx.rates.check(ctx.packet.src.addr, ctx.now, limit.threshold, limit.window);
    }
    return ctx.rates.count(ctx.packet.src.addr, ctx.now, limit.window) > limit.threshold;
}

// True once a terminal action has decided ctx.verdict.
bool walk(EvalContext& ctx, const RuleChain& chain, int depth)
{
    for (std::size_t i = 0; i < chain.rules.size(); ++i) {
        const auto& rule = chain.rules[i];
        if (!rule_matches_static(rule, ctx.packet, ctx.state, ctx.lists, ctx.now))
            continue;
        if (rule.new_conn_rate && !rate_exceeded(ctx, *rule.new_conn_rate))
            continue;

        switch (rule.action.kind) {
        case ActionKind::accept:
        case ActionKind::drop:
        case ActionKind::reject_with_rst:
            ctx.verdict.kind = rule.action.kind == ActionKind::accept ? VerdictKind::accept
                               : rule.action.kind == ActionKind::drop ? VerdictKind::drop
                                                                      : VerdictKind::reject_with_rst;
            ctx.verdict.decided_by = RuleRef{chain.name, i};
            ctx.verdict.list_match = rule.src_address_list.has_value();
            return true;
        case ActionKind::add_src_to_address_list: {
            ctx.lists.add(rule.action.list, ctx.packet.src.addr, rule.action.timeout, ctx.now);
            ctx.verdict.list_additions.push_back({rule.action.list, ctx.packet.src.addr,
                                                  ctx.lists.expiry(rule.action.list, ctx.packet.src.addr),
                                                  RuleRef{chain.name, i}});
            break;
        }
        case ActionKind::jump: {
            if (depth + 1 > max_jump_depth)
                throw Error(Errc::jump_depth_exceeded, "jump from '" + chain.name + "' exceeds depth " +
                                                           std::to_string(max_jump_depth));
            const auto* target = ctx.rules.chain(rule.action.target);
            if (target && walk(ctx, *target, depth + 1))
                return true;
            break;
        }
        }
    }
    return false;
}

} // namespace

Verdict evaluate_chain(const Ruleset& rules, std::string_view chain, const Packet& packet, ConnState state,
                       AddressLists& lists, RateTracker& rates, Tick now)
{
    EvalContext ctx{rules, packet, state, lists, rates, now, false, {}};
    if (const auto* c = rules.chain(chain))
        walk(ctx, *c, 0);
    return std::move(ctx.verdict);
}

// ---------------------------------------------------------------------------
// NAT

void NatRule::validate() const
{
    if (dst_ports && (!protocol || *protocol == Protocol::icmp))
        throw Error(Errc::bad_value, "dst-port requires protocol tcp or udp");
    if (kind == NatKind::dstnat && !to_address && !to_port)
        throw Error(Errc::bad_value, "dst-nat needs to-addresses or to-ports");
    if (kind == NatKind::dstnat && out_interface)
        throw Error(Errc::bad_value, "out-interface is only valid for srcnat");
    if (to_port && (!protocol || *protocol == Protocol::icmp))
        throw Error(Errc::bad_value, "to-ports requires protocol tcp or udp");
}

std::optional<NatTable::Match> NatTable::find(const FiveTuple& tuple) const
{
    if (auto it = by_original_.find(tuple); it != by_original_.end())
        return Match{&it->second, Direction::forward};
    if (auto it = by_reply_.find(tuple); it != by_reply_.end())
        return Match{&by_original_.at(it->second), Direction::reverse};
    return std::nullopt;
}

const NatBinding* NatTable::by_original(const FiveTuple& original) const
{
    auto it = by_original_.find(original);
    return it == by_original_.end() ? nullptr : &it->second;
}

void NatTable::upsert(const NatBinding& binding)
{
    erase(binding.original);
    by_original_[binding.original] = binding;
    by_reply_[binding.translated.reversed()] = binding.original;
}

void NatTable::erase(const FiveTuple& original)
{
    auto it = by_original_.find(original);
    if (it == by_original_.end())
        return;
    by_reply_.erase(it->second.translated.reversed());
    by_original_.erase(it);
}

Port PortAllocator::draw()
{
    return Port(ephemeral_lo + rng_() % (65536u - ephemeral_lo));
}

bool nat_rule_matches(const NatRule& rule, const Packet& packet, std::string_view out_interface)
{
    if (rule.protocol && *rule.protocol != packet.protocol)
        return false;
    if (rule.dst_ports && (packet.protocol == Protocol::icmp || !rule.dst_ports->contains(packet.dst.port)))
        return false;
    if (rule.src && !rule.src->contains(packet.src.addr))
        return false;
    if (rule.dst && !rule.dst->contains(packet.dst.addr))
        return false;
    if (rule.out_interface && *rule.out_interface != out_interface)
        return false;
    return true;
}

Packet apply_dstnat(const std::vector<NatRule>& rules, const Packet& packet, NatTable& bindings)
{
    for (const auto& rule : rules) {
        if (rule.kind != NatKind::dstnat || !nat_rule_matches(rule, packet))
            continue;
        Packet out = packet;
        if (rule.to_address)
            out.dst.addr = *rule.to_address;
        if (rule.to_port && packet.protocol != Protocol::icmp)
            out.dst.port = *rule.to_port;
        bindings.upsert({packet.tuple(), out.tuple()});
        return out;
    }
    return packet;
}

Packet apply_srcnat(const std::vector<NatRule>& rules, const FiveTuple& original, const Packet& packet,
                    std::string_view egress_interface, Ipv4Address egress_address, NatTable& bindings,
                    PortAllocator& ports)
{
    for (const auto& rule : rules) {
        if (rule.kind != NatKind::srcnat_masquerade || !nat_rule_matches(rule, packet, egress_interface))
            continue;

        Packet out = packet;
        out.src.addr = egress_address;
        // A re-seen original keeps whatever it had, so the binding stays stable.
        const auto* existing = bindings.by_original(original);
        if (existing && existing->translated.src.addr == egress_address) {
            out.src.port = existing->translated.src.port;
            bindings.upsert({original, out.tuple()});
            return out;
        }
        if (existing)
            bindings.erase(original);

        auto free = [&](Port p) {
            FiveTuple candidate = out.tuple();
            candidate.src.port = p;
            return !bindings.reply_in_use(candidate.reversed());
        };
        if (packet.protocol != Protocol::icmp && !free(packet.src.port)) {
            bool found = false;
            for (int attempt = 0; attempt < 64 && !found; ++attempt) {
                const Port p = ports.draw();
                if (free(p)) {
                    out.src.port = p;
                    found = true;
                }
            }
            for (unsigned p = ephemeral_lo; p <= 65535 && !found; ++p)
                if (free(Port(p))) {
                    out.src.port = Port(p);
                    found = true;
                }
            if (!found)
                throw Error(Errc::port_exhaustion, "no free source port on " + egress_address.to_string());
        } else if (packet.protocol == Protocol::icmp && !free(packet.src.port)) {
            throw Error(Errc::port_exhaustion, "icmp tuple collision on " + egress_address.to_string());
        }
        bindings.upsert({original, out.tuple()});
        return out;
    }
    return packet;
}

} // namespace dmzsim
