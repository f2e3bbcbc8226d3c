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

#include "dmzsim/ruleparse.hpp"

#include "dmzsim/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>

namespace dmzsim {

namespace {

struct LogicalLine {
    std::string text;
    int line = 0;
};

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\r';
}

std::string_view trim_left(std::string_view s)
{
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    return s;
}

std::string_view trim_right(std::string_view s)
{
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

// Console prompt such as "[admin@MikroTik]> ".
std::string_view strip_prompt(std::string_view s)
{
    const auto t = trim_left(s);
    if (!t.empty() && t.front() == '[') {
        const auto end = t.find("]>");
        if (end != std::string_view::npos)
            return trim_left(t.substr(end + 2));
    }
    return s;
}

bool inside_quotes(std::string_view s)
{
    bool in = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (in && s[i] == '\\')
            ++i;
        else if (s[i] == '"')
            in = !in;
    }
    return in;
}

bool ends_with_split_word(std::string_view s)
{
    return s.size() >= 2 && s.back() == '-' && std::isalnum(static_cast<unsigned char>(s[s.size() - 2])) &&
           !inside_quotes(s);
}

std::vector<LogicalLine> logical_lines(std::string_view text, bool strict)
{
    std::vector<std::string_view> physical;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        physical.push_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }

    std::vector<LogicalLine> out;
    for (std::size_t i = 0; i < physical.size(); ++i) {
        LogicalLine ll{std::string(trim_right(strip_prompt(physical[i]))), int(i + 1)};
        while (!strict && ends_with_split_word(ll.text) && i + 1 < physical.size()) {
            const auto next = trim_right(trim_left(physical[i + 1]));
            if (next.empty())
                break;
            ll.text.pop_back();
            ll.text += next;
            ++i;
        }
        out.push_back(std::move(ll));
    }
    return out;
}

bool is_verb(std::string_view w)
{
    return w == "add" || w == "print";
}

// Reads a quoted string starting at s[pos] == '"'; pos ends past the quote.
std::string read_quoted(std::string_view s, std::size_t& pos, int line)
{
    std::string out;
    ++pos;
    while (pos < s.size()) {
        const char c = s[pos++];
        if (c == '\\' && pos < s.size()) {
            out += s[pos++];
        } else if (c == '"') {
            return out;
        } else {
            out += c;
        }
    }
    throw Error(Errc::unterminated_quote, "missing closing quote", line);
}

std::string join_path(const std::vector<std::string>& parts)
{
    std::string out;
    for (const auto& p : parts) {
        if (p.empty())
            continue;
        if (!out.empty())
            out += '/';
        out += p;
    }
    return out;
}

void split_path_into(std::string_view word, std::vector<std::string>& parts)
{
    std::size_t pos = 0;
    while (pos <= word.size()) {
        const auto slash = word.find('/', pos);
        parts.emplace_back(word.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos));
        if (slash == std::string_view::npos)
            break;
        pos = slash + 1;
    }
}

void tokenize_line(const LogicalLine& ll, std::vector<Token>& out)
{
    const std::string_view s = ll.text;
    std::size_t pos = 0;
    bool first = true;
    std::vector<Token> line_tokens;

    while (true) {
        while (pos < s.size() && is_space(s[pos]))
            ++pos;
        if (pos >= s.size())
            break;
        if (first && s[pos] == '#')
            return;

        Token t;
        t.line = ll.line;
        t.line_start = first;
        if (s[pos] == '"') {
            t.kind = TokenKind::quoted;
            t.text = read_quoted(s, pos, ll.line);
            t.quoted = true;
        } else {
            const auto start = pos;
            while (pos < s.size() && !is_space(s[pos]) && s[pos] != '=')
                ++pos;
            const auto bare = s.substr(start, pos - start);
            if (pos < s.size() && s[pos] == '=') {
                t.kind = TokenKind::key_value;
                t.key = std::string(bare);
                ++pos;
                if (pos < s.size() && s[pos] == '"') {
                    t.value = read_quoted(s, pos, ll.line);
                    t.quoted = true;
                } else {
                    const auto vstart = pos;
                    while (pos < s.size() && !is_space(s[pos]))
                        ++pos;
                    t.value = std::string(s.substr(vstart, pos - vstart));
                }
                t.text = t.key + '=' + t.value;
                if (t.key.empty())
                    throw Error(Errc::bad_value, "'=' without a key", ll.line);
            } else {
                t.kind = TokenKind::word;
                t.text = std::string(bare);
            }
        }
        if (pos < s.size() && !is_space(s[pos]))
            throw Error(Errc::bad_value, "unexpected text after '" + t.text + "'", ll.line);
        line_tokens.push_back(std::move(t));
        first = false;
    }

    // A leading "/word word ..." becomes one path token.
    if (!line_tokens.empty() && line_tokens[0].kind == TokenKind::word && line_tokens[0].text.starts_with('/')) {
        std::vector<std::string> parts;
        split_path_into(std::string_view(line_tokens[0].text).substr(1), parts);
        std::size_t n = 1;
        while (n < line_tokens.size() && line_tokens[n].kind == TokenKind::word && !is_verb(line_tokens[n].text)) {
            split_path_into(line_tokens[n].text, parts);
            ++n;
        }
        Token path;
        path.kind = TokenKind::path;
        path.text = join_path(parts);
        path.line = ll.line;
        path.line_start = true;
        line_tokens.erase(line_tokens.begin(), line_tokens.begin() + std::ptrdiff_t(n));
        line_tokens.insert(line_tokens.begin(), std::move(path));
    }
    for (auto& t : line_tokens)
        out.push_back(std::move(t));
}

// Allowed keys per context; a verb absent from the map is not supported.
struct ContextSchema {
    std::vector<std::string_view> add_keys;
    bool printable = false;
};

const std::map<std::string_view, ContextSchema>& schema()
{
    static const std::map<std::string_view, ContextSchema> s = {
        {"ip/address", {{"address", "interface", "comment"}, true}},
        {"ip/route", {{"dst-address", "gateway", "distance", "comment"}, true}},
        {"ip/firewall/address-list", {{"list", "address", "timeout", "comment"}, false}},
        {"ip/firewall/filter",
         {{"chain", "protocol", "src-address", "dst-address", "dst-port", "src-address-list", "connection-state",
           "new-connection-rate", "action", "address-list", "address-list-timeout", "jump-target", "reject-with",
           "comment"},
          false}},
        {"ip/firewall/nat",
         {{"chain", "protocol", "src-address", "dst-address", "dst-port", "out-interface", "action", "to-addresses",
           "to-ports", "comment"},
          false}},
    };
    return s;
}

void add_arg(Directive& d, const Token& t)
{
    if (t.kind != TokenKind::key_value)
        throw Error(Errc::bad_value, "expected key=value, got '" + t.text + "'", t.line);
    const auto& keys = schema().at(d.context).add_keys;
    if (d.verb == Verb::print || std::find(keys.begin(), keys.end(), t.key) == keys.end())
        throw Error(Errc::unknown_key, "'" + t.key + "' is not valid for /" + d.context, t.line);
    if (d.arg(t.key))
        throw Error(Errc::duplicate_key, "'" + t.key + "' given twice", t.line);
    if (d.context == "ip/address" && t.key == "address") {
        try {
            CidrBlock::parse(t.value);
        } catch (const Error& e) {
            throw Error(Errc::malformed_cidr, e.detail(), t.line);
        }
    }
    d.args.emplace_back(t.key, t.value);
}

} // namespace

const std::string* Directive::arg(std::string_view key) const noexcept
{
    for (const auto& [k, v] : args)
        if (k == key)
            return &v;
    return nullptr;
}

std::vector<Token> tokenize(std::string_view text, const ParseOptions& options)
{
    std::vector<Token> out;
    for (const auto& ll : logical_lines(text, options.strict))
        tokenize_line(ll, out);
    return out;
}

ConfigScript parse_script(std::string_view text, const ParseOptions& options)
{
    const auto tokens = tokenize(text, options);
    ConfigScript script;
    std::optional<std::string> context;
    bool can_continue = false;

    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t end = i + 1;
        while (end < tokens.size() && !tokens[end].line_start)
            ++end;
        const int line = tokens[i].line;

        if (tokens[i].kind == TokenKind::key_value) {
            if (!can_continue)
                throw Error(Errc::bad_value, "key=value line without a preceding add", line);
            for (auto k = i; k < end; ++k)
                add_arg(script.directives.back(), tokens[k]);
            i = end;
            continue;
        }

        std::size_t k = i;
        if (tokens[k].kind == TokenKind::path) {
            if (!schema().contains(tokens[k].text))
                throw Error(Errc::unknown_context, "/" + tokens[k].text, line);
            context = tokens[k].text;
            ++k;
            can_continue = false;
            if (k == end) {
                i = end;
                continue;
            }
        }

        std::vector<std::string> words;
        while (k < end && tokens[k].kind == TokenKind::word && !is_verb(tokens[k].text))
            words.push_back(tokens[k++].text);
        if (k == end || tokens[k].kind != TokenKind::word)
            throw Error(Errc::bad_value, "expected 'add' or 'print'", line);

        Directive d;
        d.line = line;
        d.verb = tokens[k].text == "add" ? Verb::add : Verb::print;
        if (!words.empty()) {
            d.context = join_path(words);
        } else if (context) {
            d.context = *context;
        } else {
            throw Error(Errc::unknown_context, "no active context for '" + tokens[k].text + "'", line);
        }
        auto it = schema().find(d.context);
        if (it == schema().end())
            throw Error(Errc::unknown_context, "/" + d.context, line);
        if (d.verb == Verb::print && !it->second.printable)
            throw Error(Errc::bad_value, "print is not supported for /" + d.context, line);
        ++k;
        for (; k < end; ++k)
            add_arg(d, tokens[k]);
        script.directives.push_back(std::move(d));
        can_continue = script.directives.back().verb == Verb::add;
        i = end;
    }
    return script;
}

// ---------------------------------------------------------------------------
// Durations

Tick parse_duration(std::string_view text, Tick ticks_per_second)
{
    std::size_t digits = 0;
    while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits])))
        ++digits;
    const auto number = text.substr(0, digits);
    const auto unit = text.substr(digits);
    std::int64_t n = 0;
    const auto [p, ec] = std::from_chars(number.data(), number.data() + number.size(), n);
    if (number.empty() || ec != std::errc{})
        throw Error(Errc::bad_value, "bad duration '" + std::string(text) + "'");

    if (unit == "t")
        return n;
    std::int64_t ms = 0;
    if (unit.empty() || unit == "s")
        ms = n * 1000;
    else if (unit == "ms")
        ms = n;
    else if (unit == "m")
        ms = n * 60'000;
    else if (unit == "h")
        ms = n * 3'600'000;
    else
        throw Error(Errc::bad_value, "bad duration unit in '" + std::string(text) + "'");
    if ((ms * ticks_per_second) % 1000 != 0)
        throw Error(Errc::bad_value, "duration '" + std::string(text) + "' is not a whole number of ticks");
    return ms * ticks_per_second / 1000;
}

std::string render_duration(Tick ticks, Tick ticks_per_second)
{
    if (ticks % ticks_per_second == 0)
        return std::to_string(ticks / ticks_per_second) + "s";
    if ((ticks * 1000) % ticks_per_second == 0)
        return std::to_string(ticks * 1000 / ticks_per_second) + "ms";
    return std::to_string(ticks) + "t";
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

CidrBlock parse_cidr_or_host(std::string_view text)
{
    if (text.find('/') == std::string_view::npos) {
        try {
            return CidrBlock(Ipv4Address::parse(text), 32);
        } catch (const Error& e) {
            throw Error(Errc::malformed_cidr, e.detail());
        }
    }
    return CidrBlock::parse(text);
}

Protocol parse_protocol_value(std::string_view text)
{
    auto p = parse_protocol(text);
    if (!p)
        throw Error(Errc::bad_value, "unknown protocol '" + std::string(text) + "'");
    return *p;
}

Port parse_single_port(std::string_view text)
{
    unsigned v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || p != text.data() + text.size() || v > 65535)
        throw Error(Errc::bad_value, "bad port '" + std::string(text) + "'");
    return Port(v);
}

int parse_int(std::string_view text)
{
    int v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || p != text.data() + text.size())
        throw Error(Errc::bad_value, "bad integer '" + std::string(text) + "'");
    return v;
}

ConnStateSet parse_states(std::string_view text)
{
    ConnStateSet set;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        auto s = parse_conn_state(item);
        if (!s)
            throw Error(Errc::bad_value, "unknown connection state '" + std::string(item) + "'");
        set.insert(*s);
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return set;
}

RateLimit parse_rate(std::string_view text, Tick tps)
{
    const auto slash = text.find('/');
    if (slash == std::string_view::npos)
        throw Error(Errc::bad_value, "connection rate must be <count>/<duration>");
    const int count = parse_int(text.substr(0, slash));
    if (count < 0)
        throw Error(Errc::bad_value, "negative connection rate");
    return {std::uint32_t(count), parse_duration(text.substr(slash + 1), tps)};
}

const std::string& required(const Directive& d, std::string_view key)
{
    if (const auto* v = d.arg(key))
        return *v;
    throw Error(Errc::missing_key, "'" + std::string(key) + "' is required", d.line);
}

std::string optional_text(const Directive& d, std::string_view key)
{
    const auto* v = d.arg(key);
    return v ? *v : std::string();
}

FilterRule lower_filter(const Directive& d, Tick tps)
{
    FilterRule r;
    r.chain = required(d, "chain");
    if (r.chain.empty())
        throw Error(Errc::bad_value, "empty chain name");
    if (const auto* v = d.arg("protocol"))
        r.protocol = parse_protocol_value(*v);
    if (const auto* v = d.arg("dst-port"))
        r.dst_ports = PortSet::parse(*v);
    if (const auto* v = d.arg("src-address"))
        r.src = parse_cidr_or_host(*v);
    if (const auto* v = d.arg("dst-address"))
        r.dst = parse_cidr_or_host(*v);
    if (const auto* v = d.arg("src-address-list"))
        r.src_address_list = *v;
    if (const auto* v = d.arg("connection-state"))
        r.conn_states = parse_states(*v);
    if (const auto* v = d.arg("new-connection-rate"))
        r.new_conn_rate = parse_rate(*v, tps);

    const std::string action = d.arg("action") ? *d.arg("action") : "accept";
    if (action == "accept") {
        r.action.kind = ActionKind::accept;
    } else if (action == "drop") {
        r.action.kind = ActionKind::drop;
    } else if (action == "reject") {
        r.action.kind = ActionKind::reject_with_rst;
        if (const auto* v = d.arg("reject-with"); v && *v != "tcp-reset")
            throw Error(Errc::bad_value, "only reject-with=tcp-reset is supported");
    } else if (action == "add-src-to-address-list") {
        r.action.kind = ActionKind::add_src_to_address_list;
        r.action.list = required(d, "address-list");
        if (const auto* v = d.arg("address-list-timeout"))
            r.action.timeout = parse_duration(*v, tps);
    } else if (action == "jump") {
        r.action.kind = ActionKind::jump;
        r.action.target = required(d, "jump-target");
    } else {
        throw Error(Errc::bad_value, "unknown action '" + action + "'");
    }
    if (r.action.kind != ActionKind::add_src_to_address_list && (d.arg("address-list") || d.arg("address-list-timeout")))
        throw Error(Errc::semantic, "address-list needs action=add-src-to-address-list");
    if (r.action.kind != ActionKind::jump && d.arg("jump-target"))
        throw Error(Errc::semantic, "jump-target needs action=jump");
    if (r.action.kind != ActionKind::reject_with_rst && d.arg("reject-with"))
        throw Error(Errc::semantic, "reject-with needs action=reject");
    r.comment = optional_text(d, "comment");
    r.validate();
    return r;
}

NatRule lower_nat(const Directive& d)
{
    NatRule r;
    const auto& chain = required(d, "chain");
    const auto& action = required(d, "action");
    if (chain == "dstnat" && action == "dst-nat")
        r.kind = NatKind::dstnat;
    else if (chain == "srcnat" && action == "masquerade")
        r.kind = NatKind::srcnat_masquerade;
    else
        throw Error(Errc::semantic, "unsupported nat combination chain=" + chain + " action=" + action);
    if (const auto* v = d.arg("protocol"))
        r.protocol = parse_protocol_value(*v);
    if (const auto* v = d.arg("dst-port"))
        r.dst_ports = PortSet::parse(*v);
    if (const auto* v = d.arg("src-address"))
        r.src = parse_cidr_or_host(*v);
    if (const auto* v = d.arg("dst-address"))
        r.dst = parse_cidr_or_host(*v);
    if (const auto* v = d.arg("out-interface"))
        r.out_interface = *v;
    if (const auto* v = d.arg("to-addresses"))
        r.to_address = Ipv4Address::parse(*v);
    if (const auto* v = d.arg("to-ports"))
        r.to_port = parse_single_port(*v);
    if (r.kind == NatKind::srcnat_masquerade && (r.to_address || r.to_port))
        throw Error(Errc::semantic, "masquerade takes no to-addresses/to-ports");
    r.comment = optional_text(d, "comment");
    r.validate();
    return r;
}

} // namespace

bool ConfigIR::empty() const noexcept
{
    return addresses.empty() && routes.empty() && list_entries.empty() && filter_rules.empty() && nat_rules.empty() &&
           prints.empty();
}

bool operator==(const ConfigIR& a, const ConfigIR& b)
{
    return a.addresses == b.addresses && a.routes == b.routes && a.list_entries == b.list_entries &&
           a.filter_rules == b.filter_rules && a.nat_rules == b.nat_rules && a.prints == b.prints;
}

ConfigIR lower(const ConfigScript& script, const LowerOptions& options)
{
    ConfigIR ir;
    const Tick tps = options.ticks_per_second;
    for (const auto& d : script.directives) {
        try {
            if (d.verb == Verb::print) {
                ir.prints.push_back(d.context == "ip/address" ? PrintTarget::addresses : PrintTarget::routes);
                ir.lines.prints.push_back(d.line);
            } else if (d.context == "ip/address") {
                AddressAssignment a;
                a.address = CidrBlock::parse(required(d, "address"));
                a.interface = required(d, "interface");
                a.comment = optional_text(d, "comment");
                ir.addresses.push_back(std::move(a));
                ir.lines.addresses.push_back(d.line);
            } else if (d.context == "ip/route") {
                RouteSpec r;
                if (const auto* v = d.arg("dst-address"))
                    r.destination = parse_cidr_or_host(*v);
                const auto& gw = required(d, "gateway");
                try {
                    r.gateway = Ipv4Address::parse(gw);
                } catch (const Error&) {
                    if (gw.empty() || std::isdigit(static_cast<unsigned char>(gw.front())))
                        throw Error(Errc::bad_value, "bad gateway '" + gw + "'");
                    r.gateway = gw;
                }
                if (const auto* v = d.arg("distance")) {
                    r.distance = parse_int(*v);
                    if (r.distance < 1)
                        throw Error(Errc::bad_value, "distance must be positive");
                }
                r.comment = optional_text(d, "comment");
                ir.routes.push_back(std::move(r));
                ir.lines.routes.push_back(d.line);
            } else if (d.context == "ip/firewall/address-list") {
                ListEntrySpec e;
                e.list = required(d, "list");
                e.address = Ipv4Address::parse(required(d, "address"));
                if (const auto* v = d.arg("timeout"))
                    e.timeout = parse_duration(*v, tps);
                e.comment = optional_text(d, "comment");
                ir.list_entries.push_back(std::move(e));
                ir.lines.list_entries.push_back(d.line);
            } else if (d.context == "ip/firewall/filter") {
                ir.filter_rules.push_back(lower_filter(d, tps));
                ir.lines.filter_rules.push_back(d.line);
            } else if (d.context == "ip/firewall/nat") {
                ir.nat_rules.push_back(lower_nat(d));
                ir.lines.nat_rules.push_back(d.line);
            } else {
                throw Error(Errc::unknown_context, "/" + d.context);
            }
        } catch (const Error& e) {
            if (e.line() > 0)
                throw;
            throw Error(e.code(), e.detail(), d.line);
        }
    }
    return ir;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

bool needs_quotes(std::string_view v)
{
    if (v.empty())
        return true;
    return std::any_of(v.begin(), v.end(), [](char c) {
        return is_space(c) || c == '"' || c == '\\' || c == '=' || c == '#' || c == '\n';
    });
}

std::string quote(std::string_view v)
{
    std::string out = "\"";
    for (char c : v) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + '"';
}

class LineBuilder {
public:
    explicit LineBuilder(std::string verb) : text_(std::move(verb)) {}
    LineBuilder& kv(std::string_view key, std::string_view value)
    {
        text_ += ' ';
        text_ += key;
        text_ += '=';
        text_ += needs_quotes(value) ? quote(value) : std::string(value);
        return *this;
    }
    LineBuilder& comment(std::string_view value)
    {
        if (!value.empty())
            text_ += " comment=" + quote(value);
        return *this;
    }
    std::string str() const { return text_ + '\n'; }

private:
    std::string text_;
};

} // namespace

std::string render(const ConfigIR& ir, const LowerOptions& options)
{
    const Tick tps = options.ticks_per_second;
    std::string out;

    if (!ir.addresses.empty()) {
        out += "/ip address\n";
        for (const auto& a : ir.addresses)
            out += LineBuilder("add").kv("address", a.address.to_string()).kv("interface", a.interface).comment(a.comment).str();
    }
    if (!ir.routes.empty()) {
        out += "/ip route\n";
        for (const auto& r : ir.routes) {
            LineBuilder b("add");
            if (r.destination != CidrBlock(Ipv4Address(), 0))
                b.kv("dst-address", r.destination.to_string());
            b.kv("gateway", std::holds_alternative<Ipv4Address>(r.gateway) ? std::get<Ipv4Address>(r.gateway).to_string()
                                                                          : std::get<std::string>(r.gateway));
            if (r.distance != 1)
                b.kv("distance", std::to_string(r.distance));
            out += b.comment(r.comment).str();
        }
    }
    if (!ir.list_entries.empty()) {
        out += "/ip firewall address-list\n";
        for (const auto& e : ir.list_entries) {
            LineBuilder b("add");
            b.kv("list", e.list).kv("address", e.address.to_string());
            if (e.timeout)
                b.kv("timeout", render_duration(*e.timeout, tps));
            out += b.comment(e.comment).str();
        }
    }
    if (!ir.filter_rules.empty()) {
        out += "/ip firewall filter\n";
        for (const auto& r : ir.filter_rules) {
            LineBuilder b("add");
            b.kv("chain", r.chain);
            if (r.protocol)
                b.kv("protocol", protocol_name(*r.protocol));
            if (r.src)
                b.kv("src-address", r.src->to_string());
            if (r.dst)
                b.kv("dst-address", r.dst->to_string());
            if (r.dst_ports)
                b.kv("dst-port", r.dst_ports->to_string());
            if (r.src_address_list)
                b.kv("src-address-list", *r.src_address_list);
            if (r.conn_states)
                b.kv("connection-state", r.conn_states->to_string());
            if (r.new_conn_rate)
                b.kv("new-connection-rate",
                     std::to_string(r.new_conn_rate->threshold) + "/" + render_duration(r.new_conn_rate->window, tps));
            switch (r.action.kind) {
            case ActionKind::accept:
                break;
            case ActionKind::drop:
                b.kv("action", "drop");
                break;
            case ActionKind::reject_with_rst:
                b.kv("action", "reject").kv("reject-with", "tcp-reset");
                break;
            case ActionKind::add_src_to_address_list:
                b.kv("action", "add-src-to-address-list").kv("address-list", r.action.list);
                if (r.action.timeout)
                    b.kv("address-list-timeout", render_duration(*r.action.timeout, tps));
                break;
            case ActionKind::jump:
                b.kv("action", "jump").kv("jump-target", r.action.target);
                break;
            }
            out += b.comment(r.comment).str();
        }
    }
    if (!ir.nat_rules.empty()) {
        out += "/ip firewall nat\n";
        for (const auto& r : ir.nat_rules) {
            LineBuilder b("add");
            const bool dst = r.kind == NatKind::dstnat;
            b.kv("chain", dst ? "dstnat" : "srcnat");
            if (r.protocol)
                b.kv("protocol", protocol_name(*r.protocol));
            if (r.src)
                b.kv("src-address", r.src->to_string());
            if (r.dst)
                b.kv("dst-address", r.dst->to_string());
            if (r.dst_ports)
                b.kv("dst-port", r.dst_ports->to_string());
            if (r.out_interface)
                b.kv("out-interface", *r.out_interface);
            b.kv("action", dst ? "dst-nat" : "masquerade");
            if (r.to_address)
                b.kv("to-addresses", r.to_address->to_string());
            if (r.to_port)
                b.kv("to-ports", std::to_string(*r.to_port));
            out += b.comment(r.comment).str();
        }
    }
    for (auto p : ir.prints)
        out += p == PrintTarget::addresses ? "/ip address print\n" : "/ip route print\n";
    return out;
}

void apply_topology(const ConfigIR& ir, Node& node)
{
    for (std::size_t i = 0; i < ir.addresses.size(); ++i) {
        const int line = i < ir.lines.addresses.size() ? ir.lines.addresses[i] : 0;
        try {
            node.add_address(ir.addresses[i].interface, ir.addresses[i].address);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
    }
    for (std::size_t i = 0; i < ir.routes.size(); ++i) {
        const int line = i < ir.lines.routes.size() ? ir.lines.routes[i] : 0;
        const auto& r = ir.routes[i];
        try {
            if (std::holds_alternative<Ipv4Address>(r.gateway))
                node.add_route(r.destination, std::get<Ipv4Address>(r.gateway), r.distance);
            else
                node.add_interface_route(r.destination, std::get<std::string>(r.gateway), r.distance);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
    }
}

} // namespace dmzsim
