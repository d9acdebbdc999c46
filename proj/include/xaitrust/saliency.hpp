#pragma once

// Threshold simplification of saliency maps. A mask keeps the pixels whose
// normalized importance is strictly greater than the threshold, so masks at
// higher thresholds nest inside masks at lower ones.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "xaitrust/trust_core.hpp"

namespace xtrust {

inline constexpr double kDefaultThresholds[] = {0.25, 0.5, 0.75, 0.9};

class SaliencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major grid of importances. Construction checks the shape only.
class SaliencyMap {
 public:
  SaliencyMap(std::size_t width, std::size_t height, std::vector<double> values);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::span<const double> values() const { return values_; }
  double at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  bool operator==(const SaliencyMap&) const = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> values_;
};

// A map rescaled into [0,1]. Only normalize() produces one.
class NormalizedSaliency {
 public:
  const SaliencyMap& map() const { return map_; }
  // Input had a single repeated value; every output pixel is 0.
  bool constant() const { return constant_; }

 private:
  friend NormalizedSaliency normalize(const SaliencyMap&);
  NormalizedSaliency(SaliencyMap map, bool constant) : map_(std::move(map)), constant_(constant) {}
  SaliencyMap map_;
  bool constant_;
};

// Min-max rescale. Throws SaliencyError naming (x, y) for a non-finite value.
NormalizedSaliency normalize(const SaliencyMap& map);

struct MaskBounds {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

struct ThresholdMask {
  std::size_t width = 0;
  std::size_t height = 0;
  double threshold = 0.0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  std::size_t count() const;
  // Bounding box of set pixels, empty when no pixel survives.
  std::optional<MaskBounds> bounds() const;
  // True if every pixel set here is also set in `other`.
  bool subset_of(const ThresholdMask& other) const;

  bool operator==(const ThresholdMask&) const = default;
};

// Throws SaliencyError if threshold is outside [0,1].
ThresholdMask binarize(const NormalizedSaliency& map, double threshold);

// Normalizes once and returns one mask per distinct threshold, ascending.
std::vector<ThresholdMask> mask_series(const SaliencyMap& map, std::span<const double> thresholds);

// Groups records by exact threshold value and reports each group. Throws
// SaliencyError naming the first record without a threshold.
std::map<double, TrustMetricsReport> per_threshold_reports(std::span<const TrustRecord> records);

// Grid text format: a "width height" line followed by `height` rows of
// `width` space-separated reals.
SaliencyMap read_saliency_grid(std::istream& in);
void write_saliency_grid(std::ostream& out, const SaliencyMap& map);
// Same header, rows of 0/1.
void write_mask(std::ostream& out, const ThresholdMask& mask);
ThresholdMask read_mask(std::istream& in, double threshold);

}  // namespace xtrust
