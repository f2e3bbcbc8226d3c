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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmzsim {

enum class Errc {
    malformed_octet,
    wrong_arity,
    malformed_cidr,
    unknown_interface,
    duplicate_interface,
    already_addressed,
    duplicate_service,
    unreachable_gateway,
    no_route,
    unknown_node,
    unknown_link,
    unknown_chain,
    jump_depth_exceeded,
    port_exhaustion,
    unterminated_quote,
    unknown_context,
    unknown_key,
    duplicate_key,
    missing_key,
    bad_value,
    semantic,
    unroutable_target,
    invalid_argument,
    scenario,
};

std::string_view errc_name(Errc code) noexcept;

// Carries a machine-checkable code and, for text inputs, the 1-based source
// line (0 when not tied to a line).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, int line = 0);

    Errc code() const noexcept { return code_; }
    int line() const noexcept { return line_; }
    // The message without the line/code decoration.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    int line_;
    std::string detail_;
};

} // namespace dmzsim
