#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "support/fixtures.hpp"
#include "xaitrust/trust_core.hpp"

using namespace xtrust;

namespace {

TrustConfusionMatrix M(std::uint64_t tt, std::uint64_t ut, std::uint64_t tf, std::uint64_t uf) {
  return {tt, ut, tf, uf};
}

std::vector<TrustRecord> records_for(const TrustConfusionMatrix& m) {
  std::vector<TrustRecord> out;
  auto push = [&](std::uint64_t n, PredictionOutcome o, TrustDecision d) {
    for (std::uint64_t i = 0; i < n; ++i) out.push_back({"i" + std::to_string(out.size()), "u", o, d});
  };
  push(m.tt, PredictionOutcome::Correct, TrustDecision::Trusted);
  push(m.ut, PredictionOutcome::Correct, TrustDecision::Untrusted);
  push(m.tf, PredictionOutcome::Incorrect, TrustDecision::Trusted);
  push(m.uf, PredictionOutcome::Incorrect, TrustDecision::Untrusted);
  return out;
}

TrustConfusionMatrix random_matrix(std::mt19937_64& rng, std::uint64_t max = 200) {
  std::uniform_int_distribution<std::uint64_t> d(0, max);
  std::uniform_int_distribution<int> zero(0, 5);
  auto cell = [&] { return zero(rng) == 0 ? 0 : d(rng); };
  return M(cell(), cell(), cell(), cell());
}

}  // namespace

TEST(Classify, AllFourCells) {
  EXPECT_EQ(classify_record(PredictionOutcome::Correct, TrustDecision::Trusted), TrustCell::TT);
  EXPECT_EQ(classify_record(PredictionOutcome::Incorrect, TrustDecision::Untrusted), TrustCell::UF);
  EXPECT_EQ(classify_record(PredictionOutcome::Correct, TrustDecision::Untrusted), TrustCell::UT);
  EXPECT_EQ(classify_record(PredictionOutcome::Incorrect, TrustDecision::Trusted), TrustCell::TF);
  EXPECT_EQ(to_string(TrustCell::UT), "UT");
}

TEST(Tally, PerfectUserCounts) {
  const auto m = tally(records_for(M(50, 0, 0, 50)));
  EXPECT_EQ(m, M(50, 0, 0, 50));
}

TEST(Tally, EmptySequence) { EXPECT_EQ(tally({}), M(0, 0, 0, 0)); }

TEST(Tally, MixedCounts) { EXPECT_EQ(tally(records_for(M(7, 57, 14, 2))), M(7, 57, 14, 2)); }

TEST(Precision, Examples) {
  EXPECT_DOUBLE_EQ(precision(M(50, 0, 50, 0)).value, 1.0);
  EXPECT_NEAR(precision(M(7, 57, 14, 2)).value, 0.109, 0.001);
  const auto d = precision(M(0, 0, 5, 5));
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.degenerate);
}

TEST(Recall, Examples) {
  EXPECT_DOUBLE_EQ(recall(M(50, 0, 50, 0)).value, 0.5);
  EXPECT_NEAR(recall(M(757, 0, 52, 0)).value, 0.9357, 0.0005);
  const auto d = recall(M(0, 50, 0, 50));
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.degenerate);
}

TEST(F1, Examples) {
  EXPECT_NEAR(f1(M(50, 0, 50, 0)).value, 0.667, 0.005);
  EXPECT_NEAR(f1(M(757, 0, 52, 0)).value, 0.9667, 0.0005);
  const auto d = f1(M(0, 32, 8, 0));
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.degenerate);
  EXPECT_FALSE(precision(M(0, 32, 8, 0)).degenerate);
  EXPECT_FALSE(recall(M(0, 32, 8, 0)).degenerate);
}

TEST(LaiTan, Examples) {
  EXPECT_DOUBLE_EQ(lai_tan(M(50, 0, 0, 50)), 0.5);
  EXPECT_DOUBLE_EQ(lai_tan(M(757, 0, 52, 0)), 1.0);
  EXPECT_DOUBLE_EQ(lai_tan(M(7, 57, 14, 2)), 0.2625);
  EXPECT_THROW(lai_tan(M(0, 0, 0, 0)), std::domain_error);
}

TEST(Report, PerfectUser) {
  const auto r = report(M(50, 0, 0, 50));
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.lai_tan, 0.5);
  EXPECT_FALSE(r.degenerate_precision || r.degenerate_recall || r.degenerate_f1);
}

TEST(Report, SuspiciousUser) {
  const auto r = report(M(0, 50, 0, 50));
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.lai_tan, 0.0);
  EXPECT_TRUE(r.degenerate_f1);
}

TEST(Report, EmptyMatrix) {
  const auto r = report(M(0, 0, 0, 0));
  EXPECT_EQ(r.precision + r.recall + r.f1 + r.lai_tan, 0.0);
  EXPECT_TRUE(r.degenerate_precision);
  EXPECT_TRUE(r.degenerate_recall);
  EXPECT_TRUE(r.degenerate_f1);
}

TEST(Merge, IdentityAndSharedColumns) {
  EXPECT_EQ(merge(M(3, 4, 5, 6), M(0, 0, 0, 0)), M(3, 4, 5, 6));
  EXPECT_EQ(merge(M(4, 28, 6, 2), M(0, 32, 8, 0)), M(4, 60, 14, 2));
}

TEST(Merge, OverflowThrows) {
  const auto big = std::numeric_limits<std::uint64_t>::max();
  EXPECT_THROW(merge(M(big, 0, 0, 0), M(1, 0, 0, 0)), std::overflow_error);
  EXPECT_THROW(merge(M(0, 0, 0, big), M(0, 0, 0, 1)), std::overflow_error);
}

TEST(Merge, CommutativeAndAssociative) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_matrix(rng), b = random_matrix(rng), c = random_matrix(rng);
    EXPECT_EQ(merge(a, b), merge(b, a));
    EXPECT_EQ(merge(merge(a, b), c), merge(a, merge(b, c)));
  }
}

TEST(Properties, AgreesWithReferenceFormulas) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_matrix(rng);
    const auto r = report(m);
    const auto e = fixtures::oracle(m.tt, m.ut, m.tf, m.uf);
    ASSERT_NEAR(r.precision, e.precision, 1e-12);
    ASSERT_NEAR(r.recall, e.recall, 1e-12);
    ASSERT_NEAR(r.f1, e.f1, 1e-12);
    ASSERT_NEAR(r.lai_tan, e.lai_tan, 1e-12);
  }
}

TEST(Properties, BoundsAndHarmonicMean) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_matrix(rng);
    const auto p = precision(m), r = recall(m), f = f1(m);
    for (double v : {p.value, r.value, f.value}) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    if (m.total() > 0) {
      const double l = lai_tan(m);
      ASSERT_TRUE(l >= 0.0 && l <= 1.0);
    }
    if (!p.degenerate && !r.degenerate && p.value > 0 && r.value > 0) {
      ASSERT_LE(std::min(p.value, r.value), f.value + 1e-15);
      ASSERT_LE(f.value, std::max(p.value, r.value) + 1e-15);
    }
  }
}

TEST(Properties, MonotoneInTrustedCorrect) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_matrix(rng);
    auto up = m;
    ++up.tt;
    ASSERT_GE(precision(up).value, precision(m).value);
    ASSERT_GE(recall(up).value, recall(m).value);
    ASSERT_GE(f1(up).value, f1(m).value);
  }
}

TEST(Properties, LaiTanIgnoresCorrectness) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    auto m = random_matrix(rng);
    if (m.total() == 0) continue;
    const double before = lai_tan(m);
    const std::uint64_t trusted = m.tt + m.tf;
    const std::uint64_t shift = trusted ? rng() % (trusted + 1) : 0;
    m.tt = shift;
    m.tf = trusted - shift;
    ASSERT_EQ(lai_tan(m), before);
  }
}

TEST(Properties, TallyPreservesCountAndIgnoresOrder) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto m = random_matrix(rng, 40);
    auto recs = records_for(m);
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto t = tally(recs);
    ASSERT_EQ(t.total(), recs.size());
    ASSERT_EQ(t, m);
  }
}

TEST(Properties, StreamingEqualsBatch) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    auto recs = records_for(random_matrix(rng, 30));
    std::shuffle(recs.begin(), recs.end(), rng);
    TrustConfusionMatrix running;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      running.add(recs[k]);
      const auto batch = tally(std::span(recs).first(k + 1));
      ASSERT_EQ(running, batch);
      const auto a = report(running), b = report(batch);
      ASSERT_LE(std::abs(a.f1 - b.f1), 1e-12);
      ASSERT_LE(std::abs(a.precision - b.precision), 1e-12);
    }
  }
}
