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

#include "dmzsim/error.hpp"
#include "dmzsim/firewall.hpp"

#include "support.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace testsupport {

// Independent reference: plain recursion over the rule list, with its own
// list and rate bookkeeping.
struct FilterOracle {
    std::map<std::pair<std::string, Ipv4Address>, std::optional<Tick>> lists;
    std::map<Ipv4Address, std::vector<Tick>> attempts;

    bool in_list(const std::string& name, Ipv4Address a, Tick now) const
    {
        auto it = lists.find({name, a});
        return it != lists.end() && (!it->second || now < *it->second);
    }

    void add(const std::string& name, Ipv4Address a, std::optional<Tick> timeout, Tick now)
    {
        const std::optional<Tick> exp = timeout ? std::optional<Tick>(now + *timeout) : std::nullopt;
        auto it = lists.find({name, a});
        if (it == lists.end() || !in_list(name, a, now))
            lists[{name, a}] = exp;
        else if (it->second && (!exp || *exp > *it->second))
            it->second = exp;
    }

    static bool port_in(const PortSet& s, Port p)
    {
        for (const auto& r : s.ranges())
            if (r.lo <= p && p <= r.hi)
                return true;
        return false;
    }

    bool matches(const FilterRule& r, const Packet& p, ConnState st, Tick now) const
    {
        if (r.protocol && *r.protocol != p.protocol)
            return false;
        if (r.dst_ports && (p.protocol == Protocol::icmp || !port_in(*r.dst_ports, p.dst.port)))
            return false;
        if (r.src && !r.src->contains(p.src.addr))
            return false;
        if (r.dst && !r.dst->contains(p.dst.addr))
            return false;
        if (r.conn_states && !r.conn_states->contains(st))
            return false;
        if (r.src_address_list && !in_list(*r.src_address_list, p.src.addr, now))
            return false;
        if (r.new_conn_rate && st != ConnState::new_)
            return false;
        return true;
    }

    struct Walk {
        const Packet& p;
        ConnState st;
        Tick now;
        bool recorded = false;
        std::optional<VerdictKind> verdict;
    };

    bool exceeded(Walk& w, const RateLimit& lim)
    {
        auto& v = attempts[w.p.src.addr];
        if (!w.recorded) {
            v.push_back(w.now);
            w.recorded = true;
        }
        std::size_t n = 0;
        for (Tick t : v)
            if (t > w.now - lim.window && t <= w.now)
                ++n;
        return n > lim.threshold;
    }

    void walk(const std::vector<FilterRule>& all, const std::string& chain, Walk& w, int depth)
    {
        for (const auto& r : all) {
            if (w.verdict)
                return;
            if (r.chain != chain || !matches(r, w.p, w.st, w.now))
                continue;
            if (r.new_conn_rate && !exceeded(w, *r.new_conn_rate))
                continue;
            switch (r.action.kind) {
            case ActionKind::accept: w.verdict = VerdictKind::accept; return;
            case ActionKind::drop: w.verdict = VerdictKind::drop; return;
            case ActionKind::reject_with_rst: w.verdict = VerdictKind::reject_with_rst; return;
            case ActionKind::add_src_to_address_list: add(r.action.list, w.p.src.addr, r.action.timeout, w.now); break;
            case ActionKind::jump:
                if (depth + 1 > max_jump_depth)
                    throw Error(Errc::jump_depth_exceeded, "depth");
                walk(all, r.action.target, w, depth + 1);
                break;
            }
        }
    }

    VerdictKind evaluate(const std::vector<FilterRule>& all, const Packet& p, ConnState st, Tick now)
    {
        Walk w{p, st, now};
        walk(all, "forward", w, 0);
        return w.verdict.value_or(VerdictKind::accept);
    }
};

// Chains with rules, jump targets restricted to those chains.
inline std::vector<FilterRule> random_rules(testsupport::Gen& g)
{
    const std::vector<std::string> chains{"forward", "a", "b"};
    std::vector<FilterRule> rules;
    const auto n = g.range(0, 10);
    for (int i = 0; i < n; ++i)
        rules.push_back(g.filter_rule(chains, true));
    std::set<std::string> present;
    for (const auto& r : rules)
        present.insert(r.chain);
    for (auto& r : rules)
        if (r.action.kind == ActionKind::jump && !present.contains(r.action.target))
            r.action.kind = ActionKind::drop;
    for (auto& r : rules)
        if (r.action.kind != ActionKind::jump)
            r.action.target.clear();
    return rules;
}

} // namespace testsupport
