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

#include "dmzsim/netcore.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace dmzsim {

enum class ConnState : std::uint8_t { new_, established, related, invalid };

std::string_view conn_state_name(ConnState s) noexcept;
std::optional<ConnState> parse_conn_state(std::string_view text) noexcept;

enum class ConnPhase : std::uint8_t { syn_sent, confirmed, closing };

std::string_view conn_phase_name(ConnPhase p) noexcept;

struct ConnEntry {
    FiveTuple key; // orientation of the initiating packet
    ConnPhase phase = ConnPhase::syn_sent;
    Tick last_seen = 0;
    std::uint64_t packets_fwd = 0;
    std::uint64_t packets_rev = 0;

    friend bool operator==(const ConnEntry&, const ConnEntry&) = default;
};

struct ConnTimeouts {
    Tick syn_sent = 5'000;
    Tick confirmed = 600'000;
    Tick closing = 10'000;

    Tick for_phase(ConnPhase p) const noexcept;
};

enum class Direction : std::uint8_t { forward, reverse };

enum class NoteResult { unchanged, inserted, updated, capacity_exhausted };

class ConnTable {
public:
    ConnTable() = default;
    explicit ConnTable(ConnTimeouts timeouts, std::optional<std::size_t> capacity = std::nullopt)
        : timeouts_(timeouts), capacity_(capacity)
    {
    }

    // Does not mutate the table.
    ConnState classify(const Packet& packet, Tick now) const;

    // Records the effect of a packet whose verdict is known. Dropped packets
    // leave the table untouched.
    NoteResult note(const Packet& packet, bool accepted, Tick now);

    // Removes entries idle longer than their phase timeout.
    std::size_t expire(Tick now);

    struct Match {
        const ConnEntry* entry;
        Direction direction;
    };
    // Live entry for the tuple in either orientation.
    std::optional<Match> find(const FiveTuple& tuple, Tick now) const;
    bool live(const FiveTuple& tuple, Tick now) const { return find(tuple, now).has_value(); }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::map<FiveTuple, ConnEntry>& entries() const noexcept { return entries_; }
    const ConnTimeouts& timeouts() const noexcept { return timeouts_; }

    // One "tuple phase last_seen" line per entry, in key order.
    std::string dump() const;

    // Test hook: place an entry in a given phase.
    void insert_for_test(ConnEntry entry) { entries_[entry.key.normalized()] = entry; }

private:
    bool expired(const ConnEntry& e, Tick now) const noexcept;

    std::map<FiveTuple, ConnEntry> entries_; // keyed by normalized tuple
    ConnTimeouts timeouts_;
    std::optional<std::size_t> capacity_;
};

// Free-function forms.
inline ConnState classify(const ConnTable& table, const Packet& packet, Tick now) { return table.classify(packet, now); }
inline NoteResult note(ConnTable& table, const Packet& packet, bool accepted, Tick now)
{
    return table.note(packet, accepted, now);
}
inline std::size_t expire(ConnTable& table, Tick now) { return table.expire(now); }

} // namespace dmzsim
