#include "specalign/imageio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace specalign {

void write_pgm(const std::string& path, const Tensor& image, double lo, double hi) {
  if (image.rank() != 2) throw ValidationError("write_pgm: image must be rank 2");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_pgm: cannot open " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  double span = hi - lo;
  if (span <= 0) span = 1.0;
  for (std::size_t i = 0; i < image.numel(); ++i) {
    double v = (image[i] - lo) / span;
    int byte = static_cast<int>(std::lround(v * 255.0));
    byte = std::min(255, std::max(0, byte));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw IoError("write_pgm: write failed for " + path);
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_csv: cannot open " + path);
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << format_full(row[i]);
    }
    out << "\n";
  }
  if (!out) throw IoError("write_csv: write failed for " + path);
}

}  // namespace specalign
