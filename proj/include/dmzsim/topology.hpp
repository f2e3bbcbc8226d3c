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

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dmzsim {

struct Interface {
    std::string name;
    std::optional<CidrBlock> address;
    std::string link_id;
};

struct ServiceBinding {
    Port port = 0;
    Protocol protocol = Protocol::tcp;
    std::string service_name;
    std::optional<std::string> banner;
};

enum class NodeRole { host, router };
enum class RouteOrigin { connected, static_ };

struct Route {
    CidrBlock destination; // always stored as a network block
    std::variant<Ipv4Address, std::string> via; // gateway, or interface name
    int distance = 1;
    RouteOrigin origin = RouteOrigin::static_;
    std::optional<Ipv4Address> pref_src; // connected routes only
    std::size_t insertion = 0;

    bool via_gateway() const noexcept { return std::holds_alternative<Ipv4Address>(via); }
};

struct RouteLookup {
    std::string egress;
    Ipv4Address next_hop;
    const Route* route = nullptr;
};

class Node {
public:
    Node() = default;
    Node(std::string id, NodeRole role);

    const std::string& id() const noexcept { return id_; }
    NodeRole role() const noexcept { return role_; }
    bool is_router() const noexcept { return role_ == NodeRole::router; }

    const std::vector<Interface>& interfaces() const noexcept { return interfaces_; }
    const std::vector<ServiceBinding>& services() const noexcept { return services_; }
    const std::vector<Route>& routes() const noexcept { return routes_; }

    void add_interface(std::string name, std::string link_id);
    void add_service(ServiceBinding service);

    // Assigns an address and installs the connected route for its network.
    void add_address(std::string_view interface_name, const CidrBlock& block);
    // Appends a static route; the gateway must sit inside a connected network.
    void add_route(const CidrBlock& destination, Ipv4Address gateway, int distance = 1);
    void add_interface_route(const CidrBlock& destination, std::string interface_name, int distance = 1);

    // Longest prefix, then lowest distance, then earliest insertion.
    RouteLookup lookup_route(Ipv4Address dst) const;

    const Interface* find_interface(std::string_view name) const noexcept;
    const Interface* interface_for_address(Ipv4Address addr) const noexcept;
    const ServiceBinding* find_service(Port port, Protocol protocol) const noexcept;
    bool owns_address(Ipv4Address addr) const noexcept { return interface_for_address(addr) != nullptr; }
    std::optional<Ipv4Address> primary_address() const noexcept;

    // A route is active when no other route for the same destination beats it.
    bool route_active(const Route& route) const noexcept;

private:
    Interface* find_interface_mut(std::string_view name) noexcept;
    std::optional<std::string> connected_interface_for(Ipv4Address addr) const;

    std::string id_;
    NodeRole role_ = NodeRole::host;
    std::vector<Interface> interfaces_;
    std::vector<ServiceBinding> services_;
    std::vector<Route> routes_;
    std::size_t next_insertion_ = 0;
};

struct LinkMember {
    std::string node;
    std::string interface;
};

struct Link {
    std::string id;
    Tick delay = 1;
    std::vector<LinkMember> members;
};

class Topology {
public:
    Node& add_node(std::string id, NodeRole role);
    void add_link(std::string id, Tick delay = 1);
    // Adds the interface to the node and attaches it to an existing link.
    void attach(std::string_view node_id, std::string interface_name, std::string_view link_id);

    Node& node(std::string_view id);
    const Node& node(std::string_view id) const;
    bool has_node(std::string_view id) const noexcept;
    const Link& link(std::string_view id) const;

    const std::map<std::string, Node, std::less<>>& nodes() const noexcept { return nodes_; }
    const std::map<std::string, Link, std::less<>>& links() const noexcept { return links_; }

    // Node and interface on `link_id` that own `addr`.
    std::optional<LinkMember> neighbor(std::string_view link_id, Ipv4Address addr) const;

    // Structural problems become errors; suspicious addressing becomes warnings.
    std::vector<std::string> validate() const;

private:
    std::map<std::string, Node, std::less<>> nodes_;
    std::map<std::string, Link, std::less<>> links_;
};

std::string render_tables(const Node& node);
std::string render_address_table(const Node& node);
std::string render_route_table(const Node& node);

} // namespace dmzsim
