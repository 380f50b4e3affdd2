#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lqmf {

// Writes via a temp file + rename so partially written outputs never appear
// under the final name.
void write_file_atomic(const std::string& path, const std::string& content);

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// Minimal hand-emitted SVG line charts; enough for the cost / error / parameter
// panels. Series with matching band_lo/band_hi get a shaded mean +- std band;
// dashed series are reference levels.
struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> band_lo, band_hi;  // optional, same length as x
  bool dashed = false;
};

struct LinePlot {
  std::string title, xlabel, ylabel;
  bool log_y = false;
  std::vector<Series> series;
  std::string config_hash;  // embedded as metadata

  std::string to_svg() const;
};

}  // namespace lqmf
