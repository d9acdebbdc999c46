#pragma once

// Scripted studies and a reference metric oracle shared by the unit and
// acceptance tests.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xaitrust/study.hpp"
#include "xaitrust/study_service.hpp"

namespace fixtures {

// Metrics recomputed from raw counts in the textbook form
// F1 = 2PR / (P + R); kept apart from the library on purpose.
struct Expected {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double lai_tan = 0.0;
};
Expected oracle(std::uint64_t tt, std::uint64_t ut, std::uint64_t tf, std::uint64_t uf);

struct Counts {
  std::uint64_t tt = 0, ut = 0, tf = 0, uf = 0;
  void add(bool correct, bool trusted) {
    if (correct) (trusted ? tt : ut)++;
    else (trusted ? tf : uf)++;
  }
  bool operator==(const Counts&) const = default;
};

struct ScriptedDecision {
  xtrust::QueueEntry entry;
  bool trusted = false;
};

// A study plus, per user, the decisions to submit in queue order. Users may
// stop before the end of their queue.
struct Plan {
  xtrust::StudyConfig config;
  std::map<std::string, std::vector<ScriptedDecision>> decisions;
};

// Opens every user's session and submits their scripted decisions,
// alternating between users one decision at a time.
void drive(xtrust::StudyService& service, const Plan& plan);

// Counts the plan implies, computed from the config labels directly.
Counts expected_counts(const Plan& plan, const std::optional<std::string>& user, bool shared_only,
                       std::optional<double> threshold = std::nullopt);

// 120 chest x-ray style items: 40 shared, 40 exclusive to each of two users.
// usr1 decides all 80 of theirs; usr2 leaves two items undecided (78 records).
// Resulting matrices: usr1 {7,57,14,2}, usr2 {1,63,13,1}, usr1 shared
// {4,28,6,2}, usr2 shared {0,32,8,0}.
Plan table5_plan();

// One user, 20 items (16 correct, 4 incorrect) each judged at the four
// default thresholds. Per-threshold matrices:
//   0.25 {1,15,3,1}  0.5 {2,14,4,0}  0.75 {2,14,3,1}  0.9 {2,14,4,0}
Plan fig5_plan();

// Random study: a few users, random shared/exclusive split, optional
// thresholds and saliency maps, random decisions and early stops.
Plan random_plan(std::mt19937_64& rng, const std::string& study_id);

// Small random saliency grid.
xtrust::SaliencyMap random_map(std::mt19937_64& rng, std::size_t max_side = 12);

}  // namespace fixtures
