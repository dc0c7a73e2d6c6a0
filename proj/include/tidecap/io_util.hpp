// Deterministic number formatting and atomic file output.
#pragma once

#include <string>

namespace tidecap {

// Shortest-faithful double formatting with 17 significant digits; reproducible
// across runs (no locale, no wall clock).
std::string fmt_g17(double v);

// Like fmt_g17 but JSON-safe: non-finite values become "null".
std::string json_num(double v);

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);

} // namespace tidecap
