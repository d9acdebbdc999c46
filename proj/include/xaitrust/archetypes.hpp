#pragma once

// Simulated reviewers. A BehaviorProfile is stationary: the probability of
// trusting an item depends only on whether the prediction was correct.

#include <cstdint>
#include <string>
#include <vector>

#include "xaitrust/trust_core.hpp"

namespace xtrust {

// Counter-based generator: draw i of stream k is a pure function of
// (seed, k, i), so results do not depend on the platform's <random>.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double next_unit();
  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  CounterRng split(std::uint64_t stream) const;
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
// FNV-1a; stable across platforms, used to derive per-user substreams.
std::uint64_t stable_hash(std::string_view text);

struct BehaviorProfile {
  double p_trust_correct = 0.0;
  double p_trust_incorrect = 0.0;
  std::string label;

  // Throws std::invalid_argument if a probability is outside [0,1] or NaN.
  static BehaviorProfile make(double p_trust_correct, double p_trust_incorrect, std::string label);

  static BehaviorProfile perfect();     // trusts correct, rejects incorrect
  static BehaviorProfile entrusted();   // trusts everything
  static BehaviorProfile suspicious();  // trusts nothing

  // Looks up "perfect", "entrusted" or "suspicious"; throws std::invalid_argument otherwise.
  static BehaviorProfile named(std::string_view name);
};

struct OutcomeStream {
  std::vector<PredictionOutcome> outcomes;
  std::string source_label;

  std::size_t size() const { return outcomes.size(); }
  std::size_t count_correct() const;
  std::size_t count_incorrect() const { return size() - count_correct(); }
};

// All Correct outcomes first, then all Incorrect.
OutcomeStream stream_from_counts(std::uint64_t n_correct, std::uint64_t n_incorrect,
                                 std::string source_label = "counts");

// Probabilities of exactly 0 or 1 never consult the generator's value, so the
// named archetypes are deterministic for any rng state.
TrustDecision decide(const BehaviorProfile& profile, PredictionOutcome outcome, CounterRng& rng);

struct SimulationOptions {
  std::string user_id;          // defaults to the profile label
  std::string item_prefix = "item-";
  Timestamp start{};            // record i is stamped start + i seconds
};

// One record per outcome, in stream order. Pure in (profile, stream, seed, options).
std::vector<TrustRecord> simulate(const BehaviorProfile& profile, const OutcomeStream& stream,
                                  std::uint64_t seed, const SimulationOptions& options = {});

}  // namespace xtrust
