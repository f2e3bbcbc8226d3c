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

#include "dmzsim/error.hpp"

namespace dmzsim {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::malformed_octet: return "malformed-octet";
    case Errc::wrong_arity: return "wrong-arity";
    case Errc::malformed_cidr: return "malformed-cidr";
    case Errc::unknown_interface: return "unknown-interface";
    case Errc::duplicate_interface: return "duplicate-interface";
    case Errc::already_addressed: return "already-addressed";
    case Errc::duplicate_service: return "duplicate-service";
    case Errc::unreachable_gateway: return "unreachable-gateway";
    case Errc::no_route: return "no-route";
    case Errc::unknown_node: return "unknown-node";
    case Errc::unknown_link: return "unknown-link";
    case Errc::unknown_chain: return "unknown-chain";
    case Errc::jump_depth_exceeded: return "jump-depth-exceeded";
    case Errc::port_exhaustion: return "port-exhaustion";
    case Errc::unterminated_quote: return "unterminated-quote";
    case Errc::unknown_context: return "unknown-context";
    case Errc::unknown_key: return "unknown-key";
    case Errc::duplicate_key: return "duplicate-key";
    case Errc::missing_key: return "missing-key";
    case Errc::bad_value: return "bad-value";
    case Errc::semantic: return "semantic";
    case Errc::unroutable_target: return "unroutable-target";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::scenario: return "scenario";
    }
    return "unknown";
}

namespace {

std::string decorate(Errc code, const std::string& message, int line)
{
    std::string out;
    if (line > 0)
        out = "line " + std::to_string(line) + ": ";
    out += std::string(errc_name(code));
    if (!message.empty())
        out += ": " + message;
    return out;
}

} // namespace

Error::Error(Errc code, const std::string& message, int line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line), detail_(message)
{
}

} // namespace dmzsim
