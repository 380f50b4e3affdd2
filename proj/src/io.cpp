#include "lqmf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "lqmf/errors.hpp"

namespace lqmf {

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

constexpr double kW = 640.0, kH = 420.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 36.0, kBottom = 48.0;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool valid() const { return lo <= hi; }
};

std::vector<double> ticks(double lo, double hi, int target = 5) {
  std::vector<double> out;
  if (!(hi > lo)) {
    out.push_back(lo);
    return out;
  }
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 0.5 * step; v += step) out.push_back(v);
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string LinePlot::to_svg() const {
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y)
      if (!log_y || v > 0.0) yr.add(log_y ? std::log10(v) : v);
    for (double v : s.band_lo)
      if (!log_y || v > 0.0) yr.add(log_y ? std::log10(v) : v);
    for (double v : s.band_hi)
      if (!log_y || v > 0.0) yr.add(log_y ? std::log10(v) : v);
  }
  if (!xr.valid()) xr = {0.0, 1.0};
  if (!yr.valid()) yr = {0.0, 1.0};
  if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;
  if (yr.hi == yr.lo) yr.hi = yr.lo + 1.0;
  const double ypad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= ypad;
  yr.hi += ypad;

  auto px = [&](double v) {
    return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kW - kLeft - kRight);
  };
  auto py = [&](double v) {
    double t = log_y ? std::log10(std::max(v, 1e-300)) : v;
    t = std::clamp(t, yr.lo, yr.hi);
    return kH - kBottom - (t - yr.lo) / (yr.hi - yr.lo) * (kH - kTop - kBottom);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  os << "<metadata>config_hash=" << config_hash << "</metadata>\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n";

  // axes
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (double t : ticks(xr.lo, xr.hi)) {
    os << "<line x1=\"" << px(t) << "\" y1=\"" << kH - kBottom << "\" x2=\"" << px(t) << "\" y2=\""
       << kH - kBottom + 4 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(t) << "\" y=\"" << kH - kBottom + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(yr.lo, yr.hi)) {
    const double y = kH - kBottom - (t - yr.lo) / (yr.hi - yr.lo) * (kH - kTop - kBottom);
    os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 3
       << "\" text-anchor=\"end\" font-size=\"10\">" << (log_y ? "1e" + num(t) : num(t))
       << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (kTop + kH - kBottom) / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << (kTop + kH - kBottom) / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";

  int color = 0;
  double legend_y = kTop + 8;
  for (const auto& s : series) {
    const char* c = kPalette[color % 8];
    ++color;
    if (!s.band_lo.empty() && s.band_lo.size() == s.x.size() &&
        s.band_hi.size() == s.x.size()) {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        pts << px(s.x[i]) << "," << py(s.band_hi[i]) << " ";
      for (std::size_t j = s.x.size(); j-- > 0;) pts << px(s.x[j]) << "," << py(s.band_lo[j]) << " ";
      os << "<polygon points=\"" << pts.str() << "\" fill=\"" << c
         << "\" opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << c
       << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    os << "<line x1=\"" << kW - kRight - 150 << "\" y1=\"" << legend_y << "\" x2=\""
       << kW - kRight - 130 << "\" y2=\"" << legend_y << "\" stroke=\"" << c << "\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    os << "<text x=\"" << kW - kRight - 126 << "\" y=\"" << legend_y + 3
       << "\" font-size=\"10\">" << xml_escape(s.label) << "</text>\n";
    legend_y += 14;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lqmf
