#pragma once

#include <iosfwd>
#include <string>

#include "medgmm/dataset.hpp"

namespace medgmm {

// RFC-4180-style CSV: first row is the header, fields may be double-quoted
// with "" escapes, reals use a decimal point. Empty cells and NA/NaN tokens
// become NaN (missing); any other non-numeric cell is a ParseError.
Table read_csv(std::istream& in);
Table read_csv_file(const std::string& path);

}  // namespace medgmm
