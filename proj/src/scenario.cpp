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

#include "dmzsim/scenario.hpp"

#include "dmzsim/error.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <initializer_list>
#include <regex>
#include <sstream>

namespace dmzsim {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& at, const std::string& message)
{
    throw Error(Errc::scenario, message, line_of(at));
}

void check_keys(const YAML::Node& map, std::string_view what, std::initializer_list<std::string_view> allowed)
{
    if (!map.IsMap())
        fail(map, fmt::format("{} must be a mapping", what));
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(kv.first, fmt::format("unknown key '{}' in {}", key, what));
    }
}

YAML::Node required(const YAML::Node& map, std::string_view key, std::string_view what)
{
    YAML::Node v = map[std::string(key)];
    if (!v)
        fail(map, fmt::format("{} needs '{}'", what, key));
    return v;
}

std::string text(const YAML::Node& n)
{
    if (!n.IsScalar())
        fail(n, "expected a scalar");
    return n.Scalar();
}

template <class T>
T integer(const YAML::Node& n)
{
    const std::string s = text(n);
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        fail(n, fmt::format("'{}' is not a valid integer", s));
    return v;
}

// Bare integers are ticks; anything with a unit goes through parse_duration.
Tick duration(const YAML::Node& n, Tick tps)
{
    const std::string s = text(n);
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
        return integer<Tick>(n);
    try {
        return parse_duration(s, tps);
    } catch (const Error& e) {
        throw Error(e.code(), e.detail(), line_of(n));
    }
}

template <class F>
auto guarded(const YAML::Node& at, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        if (e.line() > 0)
            throw;
        throw Error(e.code(), e.detail(), line_of(at));
    }
}

Ipv4Address address(const YAML::Node& n)
{
    return guarded(n, [&] { return Ipv4Address::parse(text(n)); });
}

std::vector<std::string> split_path(std::string_view path)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        parts.emplace_back(path.substr(start, dot - start));
        if (dot == std::string_view::npos)
            break;
        start = dot + 1;
    }
    return parts;
}

bool is_index(const std::string& s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// yaml-cpp nodes are handles; assignment through operator[] edits the tree.
void set_path(YAML::Node node, const std::vector<std::string>& keys, std::size_t i, const YAML::Node& value)
{
    const std::string& key = keys[i];
    const bool last = i + 1 == keys.size();
    if (node.IsSequence() && is_index(key)) {
        const std::size_t idx = std::stoul(key);
        if (idx >= node.size())
            throw Error(Errc::invalid_argument, fmt::format("index {} out of range in override", idx));
        if (last)
            node[idx] = value;
        else
            set_path(node[idx], keys, i + 1, value);
        return;
    }
    if (last) {
        node[key] = value;
        return;
    }
    if (!node[key] || !(node[key].IsMap() || node[key].IsSequence()))
        node[key] = YAML::Node(YAML::NodeType::Map);
    set_path(node[key], keys, i + 1, value);
}

YAML::Node lookup_path(const YAML::Node& root, const std::vector<std::string>& keys)
{
    YAML::Node cur;
    cur.reset(root);
    for (const auto& k : keys) {
        const YAML::Node& here = cur;
        // Missing keys on a const node come back invalid; reset() would throw.
        const YAML::Node next = here.IsSequence() && is_index(k) ? here[std::stoul(k)]
                                : here.IsMap()                   ? here[k]
                                                                 : YAML::Node(YAML::NodeType::Undefined);
        if (!next)
            return YAML::Node(YAML::NodeType::Undefined);
        cur.reset(next);
    }
    return cur;
}

std::string substitute(const std::string& script, const YAML::Node& root, int first_line)
{
    static const std::regex placeholder(R"(\$\{([A-Za-z0-9_.\-]+)\})");
    std::string out;
    std::size_t line = 0;
    auto it = std::sregex_iterator(script.begin(), script.end(), placeholder);
    std::size_t last = 0;
    for (; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const auto pos = static_cast<std::size_t>(m.position(0));
        line += static_cast<std::size_t>(std::count(script.begin() + last, script.begin() + pos, '\n'));
        out.append(script, last, pos - last);
        YAML::Node v = lookup_path(root, split_path(m[1].str()));
        if (!v || !v.IsScalar())
            throw Error(Errc::scenario, fmt::format("placeholder ${{{}}} does not name a scalar", m[1].str()),
                        first_line + int(line));
        out += v.Scalar();
        last = pos + static_cast<std::size_t>(m.length(0));
    }
    out.append(script, last);
    return out;
}

EngineParams read_engine(const YAML::Node& root, std::optional<Tick>& horizon, Tick& hop_delay)
{
    EngineParams p;
    if (auto seed = root["seed"])
        p.seed = integer<std::uint64_t>(seed);
    YAML::Node eng = root["engine"];
    if (!eng)
        return p;
    check_keys(eng, "engine", {"ticks_per_second", "hop_delay", "horizon", "gc_interval", "conntrack"});
    if (auto t = eng["ticks_per_second"]) {
        p.ticks_per_second = integer<Tick>(t);
        if (p.ticks_per_second <= 0)
            fail(t, "ticks_per_second must be positive");
    }
    const Tick tps = p.ticks_per_second;
    if (auto d = eng["hop_delay"])
        hop_delay = duration(d, tps);
    if (auto h = eng["horizon"])
        horizon = duration(h, tps);
    if (auto g = eng["gc_interval"])
        p.gc_interval = duration(g, tps);
    if (auto ct = eng["conntrack"]) {
        check_keys(ct, "engine.conntrack", {"syn_sent", "confirmed", "closing", "capacity"});
        if (auto v = ct["syn_sent"])
            p.conntrack_timeouts.syn_sent = duration(v, tps);
        if (auto v = ct["confirmed"])
            p.conntrack_timeouts.confirmed = duration(v, tps);
        if (auto v = ct["closing"])
            p.conntrack_timeouts.closing = duration(v, tps);
        if (auto v = ct["capacity"])
            p.conntrack_capacity = integer<std::size_t>(v);
    }
    return p;
}

void read_links(const YAML::Node& root, Topology& topo, Tick hop_delay)
{
    YAML::Node links = root["links"];
    if (!links)
        return;
    if (!links.IsSequence())
        fail(links, "links must be a list");
    for (const auto& l : links) {
        if (l.IsScalar()) {
            topo.add_link(text(l), hop_delay);
            continue;
        }
        check_keys(l, "link", {"id", "delay"});
        const Tick delay = l["delay"] ? integer<Tick>(l["delay"]) : hop_delay;
        if (delay < 0)
            fail(l, "link delay must not be negative");
        topo.add_link(text(required(l, "id", "link")), delay);
    }
}

struct NodeScripts {
    std::string id;
    std::string script;
    int first_line = 0;
};

ConfigIR lower_script(const NodeScripts& s, Tick tps)
{
    try {
        return parse_and_lower(s.script, ParseOptions{}, LowerOptions{tps});
    } catch (const Error& e) {
        throw Error(e.code(), fmt::format("node {}: {}", s.id, e.detail()), e.line() > 0 ? s.first_line + e.line() - 1 : s.first_line);
    }
}

void read_nodes(const YAML::Node& root, Scenario& sc)
{
    YAML::Node nodes = required(root, "nodes", "scenario");
    if (!nodes.IsSequence())
        fail(nodes, "nodes must be a list");
    const Tick tps = sc.params.ticks_per_second;

    std::vector<std::pair<std::string, YAML::Node>> gateways;
    for (const auto& n : nodes) {
        check_keys(n, "node", {"id", "role", "interfaces", "services", "gateway", "config"});
        const std::string id = text(required(n, "id", "node"));
        const std::string role = n["role"] ? text(n["role"]) : "host";
        if (role != "host" && role != "router")
            fail(n["role"], fmt::format("role must be host or router, not '{}'", role));
        if (sc.topology.has_node(id))
            fail(n, fmt::format("duplicate node '{}'", id));
        Node& node = sc.topology.add_node(id, role == "router" ? NodeRole::router : NodeRole::host);

        if (auto ifs = n["interfaces"]) {
            for (const auto& i : ifs) {
                check_keys(i, "interface", {"name", "link", "address"});
                const std::string name = text(required(i, "name", "interface"));
                guarded(i, [&] {
                    sc.topology.attach(id, name, text(required(i, "link", "interface")));
                    if (auto a = i["address"])
                        node.add_address(name, CidrBlock::parse(text(a)));
                });
            }
        }
        if (auto svcs = n["services"]) {
            for (const auto& s : svcs) {
                check_keys(s, "service", {"port", "protocol", "name", "banner"});
                ServiceBinding b;
                b.port = integer<Port>(required(s, "port", "service"));
                if (auto p = s["protocol"]) {
                    auto proto = parse_protocol(text(p));
                    if (!proto)
                        fail(p, fmt::format("unknown protocol '{}'", text(p)));
                    b.protocol = *proto;
                }
                b.service_name = s["name"] ? text(s["name"]) : std::string(service_name(b.port));
                if (auto banner = s["banner"])
                    b.banner = text(banner);
                guarded(s, [&] { node.add_service(b); });
            }
        }
        if (auto cfg = n["config"]) {
            // Block scalars start on the line after their indicator.
            const int first = line_of(cfg) + (text(cfg).empty() ? 0 : 1);
            NodeScripts s{id, substitute(text(cfg), root, first), first};
            ConfigIR ir = lower_script(s, tps);
            if (!node.is_router() && (!ir.filter_rules.empty() || !ir.nat_rules.empty() || !ir.list_entries.empty()))
                fail(cfg, fmt::format("host {} cannot carry firewall configuration", id));
            try {
                apply_topology(ir, node);
            } catch (const Error& e) {
                throw Error(e.code(), fmt::format("node {}: {}", id, e.detail()), first + e.line() - 1);
            }
            if (node.is_router())
                sc.configs.emplace(id, std::move(ir));
        }
        if (auto gw = n["gateway"])
            gateways.emplace_back(id, gw);
    }
    for (const auto& [id, gw] : gateways) {
        Node& node = sc.topology.node(id);
        guarded(gw, [&] { node.add_route(CidrBlock(Ipv4Address(), 0), address(gw)); });
    }
    for (const auto& [id, node] : sc.topology.nodes()) {
        if (node.is_router() && !sc.configs.contains(id))
            sc.configs.emplace(id, ConfigIR{});
    }
}

void check_reachable(const Scenario& sc, const std::string& source, Ipv4Address target, const YAML::Node& at)
{
    if (!sc.topology.has_node(source))
        throw Error(Errc::unknown_node, fmt::format("unknown node '{}'", source), line_of(at));
    const Node& node = sc.topology.node(source);
    if (!node.primary_address())
        throw Error(Errc::unroutable_target, fmt::format("{} has no address", source), line_of(at));
    try {
        node.lookup_route(target);
    } catch (const Error&) {
        throw Error(Errc::unroutable_target, fmt::format("{} has no route to {}", source, target.to_string()),
                    line_of(at));
    }
}

void read_events(const YAML::Node& root, Scenario& sc)
{
    YAML::Node events = root["events"];
    if (!events)
        return;
    if (!events.IsSequence())
        fail(events, "events must be a list");
    const Tick tps = sc.params.ticks_per_second;
    for (const auto& e : events) {
        check_keys(e, "event", {"at", "scan", "flood", "request"});
        ScenarioEvent ev;
        ev.line = line_of(e);
        ev.at = e["at"] ? duration(e["at"], tps) : 0;
        if (ev.at < 0)
            fail(e, "event time must not be negative");
        const int kinds = int(bool(e["scan"])) + int(bool(e["flood"])) + int(bool(e["request"]));
        if (kinds != 1)
            fail(e, "event needs exactly one of scan, flood, request");

        if (auto s = e["scan"]) {
            check_keys(s, "scan", {"source", "target", "label", "ports", "timeout", "retries", "interval"});
            ScanSpec spec;
            spec.source = text(required(s, "source", "scan"));
            spec.target = address(required(s, "target", "scan"));
            if (auto v = s["label"])
                spec.label = text(v);
            if (auto v = s["ports"])
                spec.ports = guarded(v, [&] { return PortSet::parse(text(v)); });
            if (auto v = s["timeout"])
                spec.timeout = duration(v, tps);
            if (auto v = s["retries"])
                spec.retries = integer<int>(v);
            if (auto v = s["interval"])
                spec.interval = duration(v, tps);
            guarded(s, [&] { spec.validate(); });
            check_reachable(sc, spec.source, spec.target, s);
            ev.spec = std::move(spec);
        } else if (auto f = e["flood"]) {
            check_keys(f, "flood", {"source", "target", "port", "rate", "duration", "method"});
            FloodSpec spec;
            spec.source = text(required(f, "source", "flood"));
            spec.target = {address(required(f, "target", "flood")), integer<Port>(required(f, "port", "flood"))};
            spec.rate = integer<std::uint32_t>(required(f, "rate", "flood"));
            spec.duration = duration(required(f, "duration", "flood"), tps);
            if (auto m = f["method"]; m && text(m) != "tcp-syn")
                fail(m, fmt::format("unsupported flood method '{}'", text(m)));
            guarded(f, [&] { spec.validate(); });
            check_reachable(sc, spec.source, spec.target.addr, f);
            ev.spec = std::move(spec);
        } else {
            auto r = e["request"];
            check_keys(r, "request", {"source", "target", "port", "timeout", "retries", "source_port"});
            RequestSpec spec;
            spec.source = text(required(r, "source", "request"));
            spec.target = {address(required(r, "target", "request")), integer<Port>(required(r, "port", "request"))};
            if (auto v = r["timeout"])
                spec.timeout = duration(v, tps);
            if (auto v = r["retries"])
                spec.retries = integer<int>(v);
            spec.source_port = r["source_port"] ? integer<Port>(r["source_port"]) : Port(49152 + sc.events.size());
            guarded(r, [&] { spec.validate(); });
            check_reachable(sc, spec.source, spec.target.addr, r);
            ev.spec = std::move(spec);
        }
        sc.events.push_back(std::move(ev));
    }
}

void write_atomically(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp.replace_filename("." + path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(Errc::invalid_argument, fmt::format("cannot write {}", tmp.string()));
        out << content;
        out.flush();
        if (!out)
            throw Error(Errc::invalid_argument, fmt::format("write to {} failed", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

Override Override::parse(std::string_view text)
{
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw Error(Errc::invalid_argument, fmt::format("override '{}' is not key=value", text));
    return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

Scenario load_scenario_text(const std::string& text_in, const std::string& source, const std::vector<Override>& overrides)
{
    YAML::Node root;
    try {
        root = YAML::Load(text_in);
    } catch (const YAML::Exception& e) {
        throw Error(Errc::scenario, e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
    }
    if (!root.IsMap())
        throw Error(Errc::scenario, "scenario must be a mapping", 1);
    for (const auto& o : overrides) {
        YAML::Node value;
        try {
            value = YAML::Load(o.value);
        } catch (const YAML::Exception&) {
            value = YAML::Node(o.value);
        }
        set_path(root, split_path(o.path), 0, value);
    }
    check_keys(root, "scenario", {"name", "seed", "engine", "detection", "links", "nodes", "events"});

    Scenario sc;
    sc.source = source;
    sc.name = root["name"] ? text(root["name"]) : source;
    Tick hop_delay = 1;
    sc.params = read_engine(root, sc.horizon, hop_delay);
    read_links(root, sc.topology, hop_delay);
    read_nodes(root, sc);
    sc.warnings = sc.topology.validate();
    for (const auto& [id, ir] : sc.configs) {
        try {
            Ruleset check(ir.filter_rules);
        } catch (const Error& e) {
            throw Error(e.code(), fmt::format("node {}: {}", id, e.detail()),
                        ir.lines.filter_rules.empty() ? 0 : ir.lines.filter_rules.front());
        }
    }
    read_events(root, sc);
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::invalid_argument, fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scenario_text(ss.str(), path.filename().string(), overrides);
}

RunArtifacts run_scenario(const Scenario& sc)
{
    Engine engine(sc.topology, sc.params);
    for (const auto& [id, ir] : sc.configs)
        engine.configure_router(id, ir);

    struct Pending {
        std::size_t kind; // variant index
        GeneratorId id;
        std::size_t event;
    };
    std::vector<Pending> pending;
    for (std::size_t i = 0; i < sc.events.size(); ++i) {
        const auto& ev = sc.events[i];
        std::unique_ptr<Generator> g;
        if (const auto* s = std::get_if<ScanSpec>(&ev.spec))
            g = std::make_unique<SynScanner>(*s, source_address(engine, s->source));
        else if (const auto* f = std::get_if<FloodSpec>(&ev.spec))
            g = std::make_unique<Flooder>(*f, source_address(engine, f->source));
        else if (const auto* r = std::get_if<RequestSpec>(&ev.spec))
            g = std::make_unique<Requester>(*r, source_address(engine, r->source));
        pending.push_back({ev.spec.index(), engine.add_generator(std::move(g), ev.at), i});
    }

    RunArtifacts out;
    out.run = engine.run(sc.horizon);
    out.complete = out.run.idle;
    for (const auto& p : pending) {
        const Generator& g = engine.generator(p.id);
        out.complete = out.complete && g.finished();
        const auto& spec = sc.events[p.event].spec;
        switch (p.kind) {
        case 0: out.scans.push_back(static_cast<const SynScanner&>(g).report()); break;
        case 1:
            out.floods.push_back({std::get<FloodSpec>(spec), static_cast<const Flooder&>(g).outcome(engine)});
            break;
        case 2:
            out.requests.push_back({std::get<RequestSpec>(spec), static_cast<const Requester&>(g).outcome(engine)});
            break;
        }
    }
    out.trace = engine.trace().render();
    for (const auto& [id, st] : engine.routers()) {
        out.address_lists += "# " + id + "\n";
        out.address_lists += st.lists.dump(engine.now());
    }
    return out;
}

void write_artifacts(const RunArtifacts& a, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < a.scans.size(); ++i) {
        write_atomically(dir / fmt::format("scan-{}.txt", i + 1), render_scan_report(a.scans[i]));
        write_atomically(dir / fmt::format("scan-{}.records", i + 1), render_scan_records(a.scans[i]));
    }
    write_atomically(dir / "trace.log", a.trace);
    write_atomically(dir / "address-lists.txt", a.address_lists);
}

std::string summarize(const Scenario& sc, const RunArtifacts& a)
{
    std::string out = fmt::format("scenario {}: {} events, end tick {}, {}\n", sc.name, sc.events.size(), a.run.end_tick,
                                  a.complete ? "complete" : "incomplete");
    for (std::size_t i = 0; i < a.scans.size(); ++i) {
        const auto& r = a.scans[i];
        out += fmt::format("scan {}: {} open={} closed={} filtered={} identity={}\n", i + 1, r.label, r.counts.open,
                           r.counts.closed, r.counts.filtered, r.identity_disclosed ? "disclosed" : "concealed");
    }
    for (std::size_t i = 0; i < a.floods.size(); ++i) {
        const auto& f = a.floods[i];
        out += fmt::format("flood {}: {} -> {} sent={} delivered={} blocked={} delivered_after_block={}\n", i + 1,
                           f.spec.source, f.spec.target.to_string(), f.outcome.sent, f.outcome.delivered,
                           f.outcome.blocked_tick ? std::to_string(*f.outcome.blocked_tick) : "never",
                           f.outcome.delivered_after_block);
    }
    for (std::size_t i = 0; i < a.requests.size(); ++i) {
        const auto& r = a.requests[i];
        out += fmt::format("request {}: {} -> {} {} attempts={} delivered={}\n", i + 1, r.spec.source,
                           r.spec.target.to_string(), request_status_name(r.outcome.status), r.outcome.attempts,
                           r.outcome.delivered);
    }
    if (a.run.pending > 0)
        out += fmt::format("horizon reached with {} events pending\n", a.run.pending);
    return out;
}

} // namespace dmzsim
