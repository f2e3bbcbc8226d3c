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
#include "dmzsim/netcore.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dmzsim {

struct PortRange {
    Port lo = 0;
    Port hi = 0;
    friend bool operator==(const PortRange&, const PortRange&) = default;
};

// "80", "80,443", "1000-2000"
class PortSet {
public:
    PortSet() = default;
    explicit PortSet(std::vector<PortRange> ranges) : ranges_(std::move(ranges)) {}

    static PortSet parse(std::string_view text);

    bool contains(Port p) const noexcept;
    bool empty() const noexcept { return ranges_.empty(); }
    const std::vector<PortRange>& ranges() const noexcept { return ranges_; }
    std::string to_string() const;

    friend bool operator==(const PortSet&, const PortSet&) = default;

private:
    std::vector<PortRange> ranges_;
};

// Bit set over ConnState.
class ConnStateSet {
public:
    ConnStateSet() = default;
    ConnStateSet(std::initializer_list<ConnState> states);

    void insert(ConnState s) noexcept { bits_ |= bit(s); }
    bool contains(ConnState s) const noexcept { return (bits_ & bit(s)) != 0; }
    bool empty() const noexcept { return bits_ == 0; }
    std::uint8_t bits() const noexcept { return bits_; }
    std::string to_string() const;

    friend bool operator==(const ConnStateSet&, const ConnStateSet&) = default;

private:
    static constexpr std::uint8_t bit(ConnState s) noexcept { return std::uint8_t(1u << unsigned(s)); }
    std::uint8_t bits_ = 0;
};

struct RateLimit {
    std::uint32_t threshold = 0;
    Tick window = 0;
    friend bool operator==(const RateLimit&, const RateLimit&) = default;
};

enum class ActionKind { accept, drop, reject_with_rst, add_src_to_address_list, jump };

std::string_view action_name(ActionKind k) noexcept;

struct Action {
    ActionKind kind = ActionKind::accept;
    std::string list;               // add_src_to_address_list
    std::optional<Tick> timeout;    // add_src_to_address_list; nullopt = permanent
    std::string target;             // jump

    bool terminal() const noexcept { return kind == ActionKind::accept || kind == ActionKind::drop || kind == ActionKind::reject_with_rst; }
    friend bool operator==(const Action&, const Action&) = default;
};

struct FilterRule {
    std::string chain;
    std::optional<Protocol> protocol;
    std::optional<PortSet> dst_ports;
    std::optional<CidrBlock> src;
    std::optional<CidrBlock> dst;
    std::optional<std::string> src_address_list;
    std::optional<ConnStateSet> conn_states;
    std::optional<RateLimit> new_conn_rate;
    Action action;
    std::string comment;

    // Throws bad_value when dst_ports lacks a tcp/udp protocol.
    void validate() const;

    friend bool operator==(const FilterRule&, const FilterRule&) = default;
};

struct RuleChain {
    std::string name;
    std::vector<FilterRule> rules;
};

inline constexpr int max_jump_depth = 16;

// Chains by name. Every chain has an implicit accept policy.
class Ruleset {
public:
    Ruleset() = default;
    // Groups rules by chain, keeping their relative order. Jump targets must
    // name a chain that has rules.
    explicit Ruleset(const std::vector<FilterRule>& rules);

    const RuleChain* chain(std::string_view name) const noexcept;
    const std::map<std::string, RuleChain, std::less<>>& chains() const noexcept { return chains_; }
    bool empty() const noexcept { return chains_.empty(); }

private:
    std::map<std::string, RuleChain, std::less<>> chains_;
};

// Named, optionally timed address sets. An entry is live while now < expiry.
class AddressLists {
public:
    void add(const std::string& list, Ipv4Address addr, std::optional<Tick> timeout, Tick now);
    bool contains(std::string_view list, Ipv4Address addr, Tick now) const;
    std::optional<Tick> expiry(std::string_view list, Ipv4Address addr) const;
    std::size_t purge(Tick now);
    bool empty() const noexcept;

    // "list-name address expiry-tick|permanent", live entries only.
    std::string dump(Tick now) const;

    friend bool operator==(const AddressLists&, const AddressLists&) = default;

private:
    std::map<std::string, std::map<Ipv4Address, std::optional<Tick>>, std::less<>> lists_;
};

inline void list_add(AddressLists& lists, const std::string& name, Ipv4Address addr, std::optional<Tick> timeout, Tick now)
{
    lists.add(name, addr, timeout, now);
}

// Per-source record of NEW connection attempts for sliding-window checks.
class RateTracker {
public:
    void record(Ipv4Address src, Tick now);
    // Attempts from src in (now - window, now].
    std::size_t count(Ipv4Address src, Tick now, Tick window) const;
    // Records this attempt, then reports whether the window count exceeds
    // the threshold.
    bool check(Ipv4Address src, Tick now, std::uint32_t threshold, Tick window);

    friend bool operator==(const RateTracker&, const RateTracker&) = default;

private:
    std::map<Ipv4Address, std::deque<Tick>> attempts_;
    Tick horizon_ = 0; // widest window seen; older attempts are trimmed
};

inline bool rate_check(RateTracker& tracker, Ipv4Address src, Tick now, std::uint32_t threshold, Tick window)
{
    return tracker.check(src, now, threshold, window);
}

struct RuleRef {
    std::string chain;
    std::size_t index = 0;
    friend bool operator==(const RuleRef&, const RuleRef&) = default;
};

struct ListAddition {
    std::string list;
    Ipv4Address addr;
    std::optional<Tick> expiry;
    RuleRef rule;
    friend bool operator==(const ListAddition&, const ListAddition&) = default;
};

enum class VerdictKind { accept, drop, reject_with_rst };

std::string_view verdict_name(VerdictKind k) noexcept;

struct Verdict {
    VerdictKind kind = VerdictKind::accept;
    std::vector<ListAddition> list_additions;
    std::optional<RuleRef> decided_by; // nullopt: chain policy
    // The deciding rule matched on an address list.
    bool list_match = false;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

bool rule_matches_static(const FilterRule& rule, const Packet& packet, ConnState state, const AddressLists& lists, Tick now);

// First match wins. add_src_to_address_list inserts and keeps going; jump
// descends and returns at the end of the target chain. Missing chain or no
// terminal match yields accept. Throws jump_depth_exceeded past 16 levels.
Verdict evaluate_chain(const Ruleset& rules, std::string_view chain, const Packet& packet, ConnState state,
                       AddressLists& lists, RateTracker& rates, Tick now);

// ---------------------------------------------------------------------------
// NAT

enum class NatKind { dstnat, srcnat_masquerade };

struct NatRule {
    NatKind kind = NatKind::dstnat;
    std::optional<CidrBlock> src;
    std::optional<CidrBlock> dst;
    std::optional<Protocol> protocol;
    std::optional<PortSet> dst_ports;
    std::optional<std::string> out_interface; // masquerade only
    std::optional<Ipv4Address> to_address;
    std::optional<Port> to_port;
    std::string comment;

    void validate() const;
    friend bool operator==(const NatRule&, const NatRule&) = default;
};

struct NatBinding {
    FiveTuple original;   // as the initiator sent it
    FiveTuple translated; // after dstnat and srcnat
    friend bool operator==(const NatBinding&, const NatBinding&) = default;
};

class NatTable {
public:
    struct Match {
        const NatBinding* binding;
        Direction direction;
    };
    // forward: tuple == original; reverse: tuple == reverse(translated).
    std::optional<Match> find(const FiveTuple& tuple) const;
    const NatBinding* by_original(const FiveTuple& original) const;
    bool reply_in_use(const FiveTuple& reply) const { return by_reply_.contains(reply); }

    // Inserts or replaces the binding for `original`.
    void upsert(const NatBinding& binding);
    void erase(const FiveTuple& original);
    template <class Pred>
    std::size_t erase_if(Pred keep_out)
    {
        std::size_t n = 0;
        for (auto it = by_original_.begin(); it != by_original_.end();) {
            if (keep_out(it->second)) {
                by_reply_.erase(it->second.translated.reversed());
                it = by_original_.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        return n;
    }

    std::size_t size() const noexcept { return by_original_.size(); }
    const std::map<FiveTuple, NatBinding>& bindings() const noexcept { return by_original_; }

private:
    std::map<FiveTuple, NatBinding> by_original_;
    std::map<FiveTuple, FiveTuple> by_reply_; // reverse(translated) -> original
};

// Deterministic source-port chooser for masquerade.
class PortAllocator {
public:
    explicit PortAllocator(std::uint64_t seed = 0) : rng_(static_cast<std::mt19937::result_type>(seed)) {}
    Port draw();

private:
    std::mt19937 rng_;
};

inline constexpr Port ephemeral_lo = 1024;

bool nat_rule_matches(const NatRule& rule, const Packet& packet, std::string_view out_interface = {});

// First matching dstnat rule rewrites the destination; the binding is
// recorded under the packet's tuple. Non-matching packets pass unchanged.
Packet apply_dstnat(const std::vector<NatRule>& rules, const Packet& packet, NatTable& bindings);

// First matching masquerade rule rewrites the source to the egress address,
// moving the port if the resulting reply tuple is taken. `original` is the
// connection's pre-dstnat tuple. Throws port_exhaustion.
Packet apply_srcnat(const std::vector<NatRule>& rules, const FiveTuple& original, const Packet& packet,
                    std::string_view egress_interface, Ipv4Address egress_address, NatTable& bindings,
                    PortAllocator& ports);

} // namespace dmzsim
