#pragma once

#include <functional>
#include <string_view>

namespace d3g {

using WarningSink = std::function<void(std::string_view)>;

/// Routes library warnings; the default sink writes to stderr.
/// Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace d3g
