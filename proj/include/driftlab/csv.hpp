#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace driftlab {

/// Ordered key/value pairs emitted as "# key=value" header lines.
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Shortest round-trippable form ("%.17g"); identical on every run.
std::string format_number(double value);

void write_metadata(std::ostream& out, const Metadata& metadata);

}  // namespace driftlab
