// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace warp::cli {

std::vector<std::string> preset_names();

/// Config text of a shipped preset; throws ValidationError for an unknown name.
std::string preset_text(std::string_view name);

}  // namespace warp::cli
