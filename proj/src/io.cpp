#include "capflow/io.hpp"

#include <cstdio>

namespace capflow {

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace capflow
