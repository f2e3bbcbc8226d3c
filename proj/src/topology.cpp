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

#include "dmzsim/topology.hpp"

#include "dmzsim/error.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace dmzsim {

Node::Node(std::string id, NodeRole role) : id_(std::move(id)), role_(role) {}

void Node::add_interface(std::string name, std::string link_id)
{
    if (find_interface(name))
        throw Error(Errc::duplicate_interface, id_ + ": interface '" + name + "' already exists");
    interfaces_.push_back({std::move(name), std::nullopt, std::move(link_id)});
}

void Node::add_service(ServiceBinding service)
{
    if (find_service(service.port, service.protocol))
        throw Error(Errc::duplicate_service,
                    id_ + ": " + std::to_string(service.port) + "/" + std::string(protocol_name(service.protocol)) +
                        " bound twice");
    services_.push_back(std::move(service));
}

void Node::add_address(std::string_view interface_name, const CidrBlock& block)
{
    auto* iface = find_interface_mut(interface_name);
    if (!iface)
        throw Error(Errc::unknown_interface, id_ + ": no interface '" + std::string(interface_name) + "'");
    if (iface->address)
        throw Error(Errc::already_addressed, id_ + ": '" + iface->name + "' already has " + iface->address->to_string());
    iface->address = block;

    Route r;
    r.destination = block.network_block();
    r.via = iface->name;
    r.distance = 0;
    r.origin = RouteOrigin::connected;
    r.pref_src = block.base();
    r.insertion = next_insertion_++;
    routes_.push_back(std::move(r));
}

std::optional<std::string> Node::connected_interface_for(Ipv4Address addr) const
{
    const Route* best = nullptr;
    for (const auto& r : routes_) {
        if (r.origin != RouteOrigin::connected || !r.destination.contains(addr))
            continue;
        if (!best || r.destination.prefix_len() > best->destination.prefix_len())
            best = &r;
    }
    if (!best)
        return std::nullopt;
    return std::get<std::string>(best->via);
}

void Node::add_route(const CidrBlock& destination, Ipv4Address gateway, int distance)
{
    if (distance < 1)
        throw Error(Errc::bad_value, "static route distance must be positive");
    if (!connected_interface_for(gateway))
        throw Error(Errc::unreachable_gateway, id_ + ": gateway " + gateway.to_string() + " is not on a connected network");
    Route r;
    r.destination = destination.network_block();
    r.via = gateway;
    r.distance = distance;
    r.origin = RouteOrigin::static_;
    r.insertion = next_insertion_++;
    routes_.push_back(std::move(r));
}

void Node::add_interface_route(const CidrBlock& destination, std::string interface_name, int distance)
{
    if (distance < 1)
        throw Error(Errc::bad_value, "static route distance must be positive");
    if (!find_interface(interface_name))
        throw Error(Errc::unknown_interface, id_ + ": no interface '" + interface_name + "'");
    Route r;
    r.destination = destination.network_block();
    r.via = std::move(interface_name);
    r.distance = distance;
    r.origin = RouteOrigin::static_;
    r.insertion = next_insertion_++;
    routes_.push_back(std::move(r));
}

namespace {

// True when a is the better route for a destination both cover.
bool better_route(const Route& a, const Route& b)
{
    if (a.destination.prefix_len() != b.destination.prefix_len())
        return a.destination.prefix_len() > b.destination.prefix_len();
    if (a.distance != b.distance)
        return a.distance < b.distance;
    return a.insertion < b.insertion;
}

} // namespace

RouteLookup Node::lookup_route(Ipv4Address dst) const
{
    const Route* best = nullptr;
    for (const auto& r : routes_)
        if (r.destination.contains(dst) && (!best || better_route(r, *best)))
            best = &r;
    if (!best)
        throw Error(Errc::no_route, id_ + ": no route to " + dst.to_string());

    if (!best->via_gateway())
        return {std::get<std::string>(best->via), dst, best};
    const auto gateway = std::get<Ipv4Address>(best->via);
    auto egress = connected_interface_for(gateway);
    if (!egress)
        throw Error(Errc::no_route, id_ + ": gateway " + gateway.to_string() + " unreachable");
    return {*egress, gateway, best};
}

bool Node::route_active(const Route& route) const noexcept
{
    for (const auto& r : routes_)
        if (&r != &route && r.destination == route.destination && better_route(r, route))
            return false;
    return true;
}

const Interface* Node::find_interface(std::string_view name) const noexcept
{
    for (const auto& i : interfaces_)
        if (i.name == name)
            return &i;
    return nullptr;
}

Interface* Node::find_interface_mut(std::string_view name) noexcept
{
    for (auto& i : interfaces_)
        if (i.name == name)
            return &i;
    return nullptr;
}

const Interface* Node::interface_for_address(Ipv4Address addr) const noexcept
{
    for (const auto& i : interfaces_)
        if (i.address && i.address->base() == addr)
            return &i;
    return nullptr;
}

const ServiceBinding* Node::find_service(Port port, Protocol protocol) const noexcept
{
    for (const auto& s : services_)
        if (s.port == port && s.protocol == protocol)
            return &s;
    return nullptr;
}

std::optional<Ipv4Address> Node::primary_address() const noexcept
{
    for (const auto& i : interfaces_)
        if (i.address)
            return i.address->base();
    return std::nullopt;
}

Node& Topology::add_node(std::string id, NodeRole role)
{
    if (nodes_.contains(id))
        throw Error(Errc::scenario, "duplicate node '" + id + "'");
    auto key = id;
    return nodes_.emplace(std::move(key), Node(std::move(id), role)).first->second;
}

void Topology::add_link(std::string id, Tick delay)
{
    if (delay < 0)
        throw Error(Errc::bad_value, "link '" + id + "' has negative delay");
    if (links_.contains(id))
        throw Error(Errc::scenario, "duplicate link '" + id + "'");
    auto key = id;
    links_.emplace(std::move(key), Link{std::move(id), delay, {}});
}

void Topology::attach(std::string_view node_id, std::string interface_name, std::string_view link_id)
{
    auto link = links_.find(link_id);
    if (link == links_.end())
        throw Error(Errc::unknown_link, "link '" + std::string(link_id) + "' is not declared");
    node(node_id).add_interface(interface_name, std::string(link_id));
    link->second.members.push_back({std::string(node_id), std::move(interface_name)});
}

Node& Topology::node(std::string_view id)
{
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw Error(Errc::unknown_node, "no node '" + std::string(id) + "'");
    return it->second;
}

const Node& Topology::node(std::string_view id) const
{
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        throw Error(Errc::unknown_node, "no node '" + std::string(id) + "'");
    return it->second;
}

bool Topology::has_node(std::string_view id) const noexcept
{
    return nodes_.find(id) != nodes_.end();
}

const Link& Topology::link(std::string_view id) const
{
    auto it = links_.find(id);
    if (it == links_.end())
        throw Error(Errc::unknown_link, "no link '" + std::string(id) + "'");
    return it->second;
}

std::optional<LinkMember> Topology::neighbor(std::string_view link_id, Ipv4Address addr) const
{
    for (const auto& m : link(link_id).members) {
        const auto* iface = node(m.node).find_interface(m.interface);
        if (iface && iface->address && iface->address->base() == addr)
            return m;
    }
    return std::nullopt;
}

std::vector<std::string> Topology::validate() const
{
    std::vector<std::string> warnings;
    for (const auto& [id, n] : nodes_)
        for (const auto& i : n.interfaces())
            if (!links_.contains(i.link_id))
                throw Error(Errc::unknown_link, id + "/" + i.name + " refers to undeclared link '" + i.link_id + "'");

    std::map<Ipv4Address, std::string> owners;
    for (const auto& [link_id, link] : links_) {
        std::vector<std::pair<std::string, CidrBlock>> addressed;
        for (const auto& m : link.members) {
            const auto* iface = node(m.node).find_interface(m.interface);
            if (iface && iface->address)
                addressed.emplace_back(m.node + "/" + m.interface, *iface->address);
        }
        for (std::size_t a = 0; a < addressed.size(); ++a)
            for (std::size_t b = a + 1; b < addressed.size(); ++b)
                if (!addressed[a].second.overlaps(addressed[b].second))
                    warnings.push_back("link " + link_id + ": " + addressed[a].first + " (" +
                                       addressed[a].second.to_string() + ") and " + addressed[b].first + " (" +
                                       addressed[b].second.to_string() + ") are on disjoint subnets");
        for (const auto& [who, block] : addressed) {
            auto [it, fresh] = owners.emplace(block.base(), who);
            if (!fresh)
                warnings.push_back("address " + block.base().to_string() + " assigned to both " + it->second + " and " + who);
        }
    }
    return warnings;
}

namespace {

std::string rtrim(std::string s)
{
    while (!s.empty() && s.back() == ' ')
        s.pop_back();
    return s;
}

} // namespace

std::string render_address_table(const Node& node)
{
    std::string out = "Flags: X - disabled, I - invalid, D - dynamic\n";
    out += rtrim(fmt::format("{:>2} {:<3} {:<18} {:<15} {}", "#", "", "ADDRESS", "NETWORK", "INTERFACE")) + '\n';
    int index = 0;
    for (const auto& i : node.interfaces()) {
        if (!i.address)
            continue;
        out += rtrim(fmt::format("{:>2} {:<3} {:<18} {:<15} {}", index++, "", i.address->to_string(),
                                 i.address->network().to_string(), i.name)) +
               '\n';
    }
    return out;
}

std::string render_route_table(const Node& node)
{
    std::string out = "Flags: X - disabled, A - active, D - dynamic, C - connect, S - static\n";
    out += rtrim(fmt::format("{:>2} {:<3} {:<18} {:<15} {:<15} {}", "#", "", "DST-ADDRESS", "PREF-SRC", "GATEWAY",
                             "DISTANCE")) +
           '\n';

    std::vector<const Route*> order;
    for (const auto& r : node.routes())
        order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const Route* a, const Route* b) {
        if (a->destination.network() != b->destination.network())
            return a->destination.network() < b->destination.network();
        return a->destination.prefix_len() < b->destination.prefix_len();
    });

    int index = 0;
    for (const auto* r : order) {
        std::string flags;
        flags += node.route_active(*r) ? 'A' : ' ';
        flags += r->origin == RouteOrigin::connected ? "DC" : " S";
        const auto gateway = r->via_gateway() ? std::get<Ipv4Address>(r->via).to_string() : std::get<std::string>(r->via);
        const auto pref = r->pref_src ? r->pref_src->to_string() : std::string();
        out += rtrim(fmt::format("{:>2} {:<3} {:<18} {:<15} {:<15} {}", index++, flags, r->destination.to_string(), pref,
                                 gateway, r->distance)) +
               '\n';
    }
    return out;
}

std::string render_tables(const Node& node)
{
    return render_address_table(node) + render_route_table(node);
}

} // namespace dmzsim
