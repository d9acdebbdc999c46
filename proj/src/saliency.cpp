#include "xaitrust/saliency.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

namespace xtrust {

SaliencyMap::SaliencyMap(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width == 0 || height == 0) throw SaliencyError("saliency map must be non-empty");
  if (values_.size() != width * height)
    throw SaliencyError("saliency grid has " + std::to_string(values_.size()) +
                        " values, expected " + std::to_string(width * height));
}

NormalizedSaliency normalize(const SaliencyMap& map) {
  const auto values = map.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw SaliencyError("non-finite saliency value at (" + std::to_string(i % map.width()) +
                          ", " + std::to_string(i / map.width()) + ")");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (lo == hi) return {SaliencyMap(map.width(), map.height(), std::move(out)), true};

  const double span = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Pin the extremes so a renormalized map comes back bitwise identical.
    if (values[i] == lo)
      out[i] = 0.0;
    else if (values[i] == hi)
      out[i] = 1.0;
    else
      out[i] = std::clamp((values[i] - lo) / span, 0.0, 1.0);
  }
  return {SaliencyMap(map.width(), map.height(), std::move(out)), false};
}

std::size_t ThresholdMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::optional<MaskBounds> ThresholdMask::bounds() const {
  std::optional<MaskBounds> b;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!at(x, y)) continue;
      if (!b) {
        b = MaskBounds{x, y, x, y};
      } else {
        b->x0 = std::min(b->x0, x);
        b->x1 = std::max(b->x1, x);
        b->y1 = y;
      }
    }
  }
  return b;
}

bool ThresholdMask::subset_of(const ThresholdMask& other) const {
  if (width != other.width || height != other.height) return false;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] && !other.bits[i]) return false;
  return true;
}

namespace {

void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw SaliencyError("threshold " + std::to_string(threshold) + " outside [0,1]");
}

}  // namespace

ThresholdMask binarize(const NormalizedSaliency& normalized, double threshold) {
  check_threshold(threshold);
  const auto& map = normalized.map();
  ThresholdMask mask{map.width(), map.height(), threshold, {}};
  mask.bits.reserve(map.values().size());
  for (double v : map.values()) mask.bits.push_back(v > threshold ? 1 : 0);
  return mask;
}

std::vector<ThresholdMask> mask_series(const SaliencyMap& map, std::span<const double> thresholds) {
  for (double t : thresholds) check_threshold(t);
  const std::set<double> ordered(thresholds.begin(), thresholds.end());
  std::vector<ThresholdMask> masks;
  if (ordered.empty()) return masks;
  const auto normalized = normalize(map);
  masks.reserve(ordered.size());
  for (double t : ordered) masks.push_back(binarize(normalized, t));
  return masks;
}

std::map<double, TrustMetricsReport> per_threshold_reports(std::span<const TrustRecord> records) {
  std::map<double, TrustConfusionMatrix> groups;
  for (const auto& r : records) {
    if (!r.threshold)
      throw SaliencyError("record for item '" + r.item_id + "' (user '" + r.user_id +
                          "') carries no threshold");
    groups[*r.threshold].add(r);
  }
  std::map<double, TrustMetricsReport> out;
  for (const auto& [t, m] : groups) out.emplace(t, report(m));
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SaliencyError("grid: missing 'width height' header");
  std::istringstream hs(line);
  long long w = 0, h = 0;
  std::string extra;
  if (!(hs >> w >> h) || (hs >> extra) || w <= 0 || h <= 0)
    throw SaliencyError("grid: malformed header '" + line + "'");
  return {static_cast<std::size_t>(w), static_cast<std::size_t>(h)};
}

template <typename Fn>
void read_rows(std::istream& in, std::size_t width, std::size_t height, Fn&& cell) {
  std::string line;
  for (std::size_t y = 0; y < height; ++y) {
    if (!std::getline(in, line))
      throw SaliencyError("grid: expected " + std::to_string(height) + " rows, got " +
                          std::to_string(y));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream rs(line);
    std::string tok;
    std::size_t x = 0;
    while (rs >> tok) {
      if (x >= width)
        throw SaliencyError("grid: row " + std::to_string(y + 1) + " has more than " +
                            std::to_string(width) + " values");
      cell(x, y, tok);
      ++x;
    }
    if (x != width)
      throw SaliencyError("grid: row " + std::to_string(y + 1) + " has " + std::to_string(x) +
                          " values, expected " + std::to_string(width));
  }
}

}  // namespace

SaliencyMap read_saliency_grid(std::istream& in) {
  const auto [w, h] = read_header(in);
  std::vector<double> values(w * h);
  read_rows(in, w, h, [&](std::size_t x, std::size_t y, const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size())
      throw SaliencyError("grid: bad number '" + tok + "' at (" + std::to_string(x) + ", " +
                          std::to_string(y) + ")");
    values[y * w + x] = v;
  });
  return SaliencyMap(w, h, std::move(values));
}

void write_saliency_grid(std::ostream& out, const SaliencyMap& map) {
  out << map.width() << ' ' << map.height() << '\n';
  char buf[32];
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      auto res = std::to_chars(buf, buf + sizeof buf, map.at(x, y));
      if (x) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void write_mask(std::ostream& out, const ThresholdMask& mask) {
  out << mask.width << ' ' << mask.height << '\n';
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (x) out << ' ';
      out << (mask.at(x, y) ? '1' : '0');
    }
    out << '\n';
  }
}

ThresholdMask read_mask(std::istream& in, double threshold) {
  const auto [w, h] = read_header(in);
  ThresholdMask mask{w, h, threshold, std::vector<std::uint8_t>(w * h, 0)};
  read_rows(in, w, h, [&](std::size_t x, std::size_t y, const std::string& tok) {
    if (tok != "0" && tok != "1")
      throw SaliencyError("mask: expected 0 or 1 at (" + std::to_string(x) + ", " +
                          std::to_string(y) + ")");
    mask.bits[y * w + x] = tok == "1" ? 1 : 0;
  });
  return mask;
}

}  // namespace xtrust
