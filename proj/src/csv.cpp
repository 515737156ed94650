#include "driftlab/csv.hpp"

#include <cstdio>
#include <ostream>

namespace driftlab {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_metadata(std::ostream& out, const Metadata& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
}

}  // namespace driftlab
