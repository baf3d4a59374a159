#pragma once

#include <string>

namespace capflow {

/// Round-trip decimal text for a double (%.17g).
std::string format_number(double x);

}  // namespace capflow
