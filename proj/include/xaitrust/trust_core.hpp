#pragma once

// Behavioral trust measure: every (prediction, reviewer decision) pair lands in
// one cell of a 2x2 matrix crossing trust with prediction correctness.
//
//                      incorrect   correct
//   untrusted             UF          UT
//   trusted               TF          TT
//
// Precision, recall and F1 are the classification metrics transposed onto that
// matrix. The Lai-Tan baseline (share of items trusted) is carried alongside
// for comparison because it ignores correctness entirely.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace xtrust {

enum class TrustDecision { Trusted, Untrusted };
enum class PredictionOutcome { Correct, Incorrect };
enum class TrustCell { TT, UT, TF, UF };

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

std::string_view to_string(TrustCell cell);
std::string_view to_string(TrustDecision decision);
std::string_view to_string(PredictionOutcome outcome);

struct TrustRecord {
  std::string item_id;
  std::string user_id;
  PredictionOutcome outcome = PredictionOutcome::Correct;
  TrustDecision decision = TrustDecision::Untrusted;
  std::optional<double> threshold;
  Timestamp timestamp{};

  bool operator==(const TrustRecord&) const = default;
};

TrustCell classify_record(PredictionOutcome outcome, TrustDecision decision);

struct TrustConfusionMatrix {
  std::uint64_t tt = 0;
  std::uint64_t ut = 0;
  std::uint64_t tf = 0;
  std::uint64_t uf = 0;

  std::uint64_t total() const { return tt + ut + tf + uf; }
  std::uint64_t& at(TrustCell cell);
  std::uint64_t at(TrustCell cell) const;
  void add(TrustCell cell) { ++at(cell); }
  void add(const TrustRecord& record) { add(classify_record(record.outcome, record.decision)); }

  bool operator==(const TrustConfusionMatrix&) const = default;
};

TrustConfusionMatrix tally(std::span<const TrustRecord> records);

// Throws std::overflow_error if any cell would wrap.
TrustConfusionMatrix merge(const TrustConfusionMatrix& a, const TrustConfusionMatrix& b);

// A ratio whose denominator may be zero. Degenerate ratios report 0.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

// TT / (TT + UT)
Metric precision(const TrustConfusionMatrix& m);
// TT / (TT + TF)
Metric recall(const TrustConfusionMatrix& m);
// Harmonic mean of precision and recall.
Metric f1(const TrustConfusionMatrix& m);

// (TT + TF) / total. Throws std::domain_error on an empty matrix.
double lai_tan(const TrustConfusionMatrix& m);

struct TrustMetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double lai_tan = 0.0;  // 0 for an empty matrix
  TrustConfusionMatrix matrix;
  bool degenerate_precision = false;
  bool degenerate_recall = false;
  bool degenerate_f1 = false;

  bool operator==(const TrustMetricsReport&) const = default;
};

TrustMetricsReport report(const TrustConfusionMatrix& m);

}  // namespace xtrust
