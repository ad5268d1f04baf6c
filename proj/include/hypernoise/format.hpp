#pragma once

#include <string>

namespace hypernoise {

/// Shortest decimal text that round-trips to the same double ("nan", "inf", "-inf" for non-finite).
std::string format_number(double v);

}  // namespace hypernoise
