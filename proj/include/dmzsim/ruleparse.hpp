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

#include "dmzsim/firewall.hpp"
#include "dmzsim/netcore.hpp"
#include "dmzsim/topology.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dmzsim {

struct ParseOptions {
    // When false, a line ending in "<letter>-" is joined to the next line
    // with the hyphen removed (text copied out of narrow layouts).
    bool strict = false;
};

enum class TokenKind { path, word, key_value, quoted };

struct Token {
    TokenKind kind = TokenKind::word;
    std::string text;  // path: "ip/firewall/filter"; word/quoted: the text
    std::string key;   // key_value
    std::string value; // key_value, unescaped
    bool quoted = false;
    int line = 0;
    bool line_start = false;

    friend bool operator==(const Token&, const Token&) = default;
};

// Throws Error{unterminated_quote} with the line number.
std::vector<Token> tokenize(std::string_view text, const ParseOptions& options = {});

enum class Verb { add, print };

struct Directive {
    std::string context; // "ip/address", "ip/firewall/filter", ...
    Verb verb = Verb::add;
    std::vector<std::pair<std::string, std::string>> args;
    int line = 0;

    const std::string* arg(std::string_view key) const noexcept;
};

struct ConfigScript {
    std::vector<Directive> directives;
};

// Throws Error{unknown_context | unknown_key | duplicate_key | malformed_cidr
// | unterminated_quote | bad_value}, each with a line number.
ConfigScript parse_script(std::string_view text, const ParseOptions& options = {});

struct AddressAssignment {
    std::string interface;
    CidrBlock address;
    std::string comment;
    friend bool operator==(const AddressAssignment&, const AddressAssignment&) = default;
};

struct RouteSpec {
    CidrBlock destination{Ipv4Address(), 0};
    std::variant<Ipv4Address, std::string> gateway;
    int distance = 1;
    std::string comment;
    friend bool operator==(const RouteSpec&, const RouteSpec&) = default;
};

struct ListEntrySpec {
    std::string list;
    Ipv4Address address;
    std::optional<Tick> timeout;
    std::string comment;
    friend bool operator==(const ListEntrySpec&, const ListEntrySpec&) = default;
};

enum class PrintTarget { addresses, routes };

struct ConfigIR {
    std::vector<AddressAssignment> addresses;
    std::vector<RouteSpec> routes;
    std::vector<ListEntrySpec> list_entries;
    std::vector<FilterRule> filter_rules;
    std::vector<NatRule> nat_rules;
    std::vector<PrintTarget> prints;

    // Source lines, parallel to the vectors above; not part of equality.
    struct Lines {
        std::vector<int> addresses, routes, list_entries, filter_rules, nat_rules, prints;
    } lines;

    bool empty() const noexcept;
    friend bool operator==(const ConfigIR& a, const ConfigIR& b);
};

struct LowerOptions {
    Tick ticks_per_second = 1000;
};

// Maps directives onto typed IR, keeping filter-rule order. Missing actions
// mean accept. Errors carry the directive's line.
ConfigIR lower(const ConfigScript& script, const LowerOptions& options = {});

// Canonical script: context headers, fixed key order, defaults omitted.
std::string render(const ConfigIR& ir, const LowerOptions& options = {});

inline ConfigIR parse_and_lower(std::string_view text, const ParseOptions& p = {}, const LowerOptions& l = {})
{
    return lower(parse_script(text, p), l);
}

// Applies address and route directives to a node, in order. Errors
// (unknown-interface, unreachable-gateway, ...) carry the directive's line.
void apply_topology(const ConfigIR& ir, Node& node);

// "300s", "500ms", "5m", "1h", "42t" (raw ticks); a bare number is seconds.
Tick parse_duration(std::string_view text, Tick ticks_per_second);
std::string render_duration(Tick ticks, Tick ticks_per_second);

} // namespace dmzsim
