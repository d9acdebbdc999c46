#include "xaitrust/archetypes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xtrust {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t key = mix64(seed_ ^ mix64(stream_ + 0x632BE59BD9B4E019ULL));
  return mix64(key + counter_++ * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= limit) return x % bound;
  }
}

CounterRng CounterRng::split(std::uint64_t stream) const {
  return CounterRng(mix64(seed_ ^ mix64(stream_)), stream);
}

BehaviorProfile BehaviorProfile::make(double p_trust_correct, double p_trust_incorrect,
                                      std::string label) {
  auto valid = [](double p) { return p >= 0.0 && p <= 1.0; };  // false for NaN
  if (!valid(p_trust_correct) || !valid(p_trust_incorrect))
    throw std::invalid_argument("behavior probabilities must lie in [0,1]");
  return {p_trust_correct, p_trust_incorrect, std::move(label)};
}

BehaviorProfile BehaviorProfile::perfect() { return {1.0, 0.0, "perfect"}; }
BehaviorProfile BehaviorProfile::entrusted() { return {1.0, 1.0, "entrusted"}; }
BehaviorProfile BehaviorProfile::suspicious() { return {0.0, 0.0, "suspicious"}; }

BehaviorProfile BehaviorProfile::named(std::string_view name) {
  if (name == "perfect") return perfect();
  if (name == "entrusted") return entrusted();
  if (name == "suspicious") return suspicious();
  throw std::invalid_argument("unknown archetype '" + std::string(name) +
                              "' (expected perfect, entrusted or suspicious)");
}

std::size_t OutcomeStream::count_correct() const {
  return static_cast<std::size_t>(
      std::count(outcomes.begin(), outcomes.end(), PredictionOutcome::Correct));
}

OutcomeStream stream_from_counts(std::uint64_t n_correct, std::uint64_t n_incorrect,
                                 std::string source_label) {
  OutcomeStream s;
  s.source_label = std::move(source_label);
  s.outcomes.reserve(n_correct + n_incorrect);
  s.outcomes.insert(s.outcomes.end(), n_correct, PredictionOutcome::Correct);
  s.outcomes.insert(s.outcomes.end(), n_incorrect, PredictionOutcome::Incorrect);
  return s;
}

TrustDecision decide(const BehaviorProfile& profile, PredictionOutcome outcome, CounterRng& rng) {
  const double p = outcome == PredictionOutcome::Correct ? profile.p_trust_correct
                                                          : profile.p_trust_incorrect;
  // Always advance so record i uses draw i regardless of the profile.
  const double u = rng.next_unit();
  if (p >= 1.0) return TrustDecision::Trusted;
  if (p <= 0.0) return TrustDecision::Untrusted;
  return u < p ? TrustDecision::Trusted : TrustDecision::Untrusted;
}

std::vector<TrustRecord> simulate(const BehaviorProfile& profile, const OutcomeStream& stream,
                                  std::uint64_t seed, const SimulationOptions& options) {
  CounterRng rng(seed);
  const std::string user = options.user_id.empty() ? profile.label : options.user_id;
  std::vector<TrustRecord> records;
  records.reserve(stream.size());
  for (std::size_t i = 0; i < stream.outcomes.size(); ++i) {
    TrustRecord r;
    r.item_id = options.item_prefix + std::to_string(i);
    r.user_id = user.empty() ? "simulated" : user;
    r.outcome = stream.outcomes[i];
    r.decision = decide(profile, r.outcome, rng);
    r.timestamp = options.start + std::chrono::seconds(i);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace xtrust
