#pragma once

#include <string>
#include <vector>

#include "specalign/tensor.hpp"

namespace specalign {

/// Binary PGM (P5), 8-bit. Values are mapped linearly from [lo, hi] onto
/// [0, 255] and clamped; the output is byte-exact for identical inputs.
void write_pgm(const std::string& path, const Tensor& image, double lo = 0.0, double hi = 1.0);

/// Full-precision CSV writer ("%.17g"); one header line, then rows.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

std::string format_full(double v);

}  // namespace specalign
