#include "xaitrust/trust_core.hpp"

#include <limits>
#include <stdexcept>

namespace xtrust {

std::string_view to_string(TrustCell cell) {
  switch (cell) {
    case TrustCell::TT: return "TT";
    case TrustCell::UT: return "UT";
    case TrustCell::TF: return "TF";
    case TrustCell::UF: return "UF";
  }
  return "?";
}

std::string_view to_string(TrustDecision decision) {
  return decision == TrustDecision::Trusted ? "trusted" : "untrusted";
}

std::string_view to_string(PredictionOutcome outcome) {
  return outcome == PredictionOutcome::Correct ? "correct" : "incorrect";
}

TrustCell classify_record(PredictionOutcome outcome, TrustDecision decision) {
  const bool trusted = decision == TrustDecision::Trusted;
  if (outcome == PredictionOutcome::Correct) return trusted ? TrustCell::TT : TrustCell::UT;
  return trusted ? TrustCell::TF : TrustCell::UF;
}

std::uint64_t& TrustConfusionMatrix::at(TrustCell cell) {
  switch (cell) {
    case TrustCell::TT: return tt;
    case TrustCell::UT: return ut;
    case TrustCell::TF: return tf;
    case TrustCell::UF: break;
  }
  return uf;
}

std::uint64_t TrustConfusionMatrix::at(TrustCell cell) const {
  return const_cast<TrustConfusionMatrix&>(*this).at(cell);
}

TrustConfusionMatrix tally(std::span<const TrustRecord> records) {
  TrustConfusionMatrix m;
  for (const auto& r : records) m.add(r);
  return m;
}

namespace {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  if (a > std::numeric_limits<std::uint64_t>::max() - b)
    throw std::overflow_error("trust matrix count overflow");
  return a + b;
}

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

TrustConfusionMatrix merge(const TrustConfusionMatrix& a, const TrustConfusionMatrix& b) {
  return {checked_add(a.tt, b.tt), checked_add(a.ut, b.ut), checked_add(a.tf, b.tf),
          checked_add(a.uf, b.uf)};
}

Metric precision(const TrustConfusionMatrix& m) { return ratio(m.tt, m.tt + m.ut); }

Metric recall(const TrustConfusionMatrix& m) { return ratio(m.tt, m.tt + m.tf); }

Metric f1(const TrustConfusionMatrix& m) {
  // P + R > 0 exactly when TT > 0, and then 2PR/(P+R) reduces to
  // 2TT/(2TT+UT+TF). The count form rounds once.
  if (m.tt == 0) return {0.0, true};
  const double tt2 = 2.0 * static_cast<double>(m.tt);
  return {tt2 / (tt2 + static_cast<double>(m.ut) + static_cast<double>(m.tf)), false};
}

double lai_tan(const TrustConfusionMatrix& m) {
  if (m.total() == 0) throw std::domain_error("Lai-Tan proportion undefined for an empty matrix");
  return static_cast<double>(m.tt + m.tf) / static_cast<double>(m.total());
}

TrustMetricsReport report(const TrustConfusionMatrix& m) {
  const auto p = precision(m);
  const auto r = recall(m);
  const auto f = f1(m);
  TrustMetricsReport out;
  out.matrix = m;
  out.precision = p.value;
  out.recall = r.value;
  out.f1 = f.value;
  out.degenerate_precision = p.degenerate;
  out.degenerate_recall = r.degenerate;
  out.degenerate_f1 = f.degenerate;
  out.lai_tan = m.total() == 0 ? 0.0 : lai_tan(m);
  return out;
}

}  // namespace xtrust
