// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string_view>

namespace fgvp {

using WarningSink = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink (stderr by default). Returns the
/// previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace fgvp
