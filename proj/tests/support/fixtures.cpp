#include "fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace fixtures {

using namespace xtrust;

Expected oracle(std::uint64_t tt, std::uint64_t ut, std::uint64_t tf, std::uint64_t uf) {
  Expected e;
  const double n = double(tt + ut + tf + uf);
  e.precision = (tt + ut) ? double(tt) / double(tt + ut) : 0.0;
  e.recall = (tt + tf) ? double(tt) / double(tt + tf) : 0.0;
  e.f1 = (e.precision + e.recall) > 0 ? 2 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
  e.lai_tan = n > 0 ? double(tt + tf) / n : 0.0;
  return e;
}

namespace {

std::string id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%02d", prefix, i);
  return buf;
}

StudyItem make_item(const std::string& item_id, bool correct) {
  StudyItem item;
  item.item_id = item_id;
  item.image_ref = item_id + ".png";
  item.predicted_label = "covid";
  item.true_label = correct ? "covid" : "normal";
  return item;
}

bool is_correct(const StudyConfig& c, const std::string& item_id) {
  return c.find_item(item_id)->outcome() == PredictionOutcome::Correct;
}

// Walks a queue and trusts the first quota[(pool, correct)] entries of each
// kind, where pool tells shared and exclusive items apart.
struct Quota {
  std::size_t shared_correct = 0, shared_incorrect = 0;
  std::size_t own_correct = 0, own_incorrect = 0;
};

std::vector<ScriptedDecision> script(const StudyConfig& c, const std::vector<QueueEntry>& queue,
                                     std::size_t stop_after, Quota q) {
  const std::set<std::string> shared(c.shared_items.begin(), c.shared_items.end());
  std::vector<ScriptedDecision> out;
  for (std::size_t i = 0; i < std::min(stop_after, queue.size()); ++i) {
    const auto& e = queue[i];
    const bool correct = is_correct(c, e.item_id);
    std::size_t& left = shared.count(e.item_id)
                            ? (correct ? q.shared_correct : q.shared_incorrect)
                            : (correct ? q.own_correct : q.own_incorrect);
    const bool trusted = left > 0;
    if (trusted) --left;
    out.push_back({e, trusted});
  }
  return out;
}

}  // namespace

void drive(StudyService& service, const Plan& plan) {
  std::map<std::string, std::string> sessions;
  for (const auto& [user, _] : plan.decisions)
    sessions[user] = service.open_session(plan.config.study_id, user).session_id;
  std::size_t round = 0;
  for (bool any = true; any; ++round) {
    any = false;
    for (const auto& [user, list] : plan.decisions) {
      if (round >= list.size()) continue;
      any = true;
      DecisionRequest r;
      r.item_id = list[round].entry.item_id;
      r.threshold = list[round].entry.threshold;
      r.position = round;
      r.decision = list[round].trusted ? TrustDecision::Trusted : TrustDecision::Untrusted;
      service.submit_decision(sessions[user], r);
    }
  }
}

Counts expected_counts(const Plan& plan, const std::optional<std::string>& user, bool shared_only,
                       std::optional<double> threshold) {
  const std::set<std::string> shared(plan.config.shared_items.begin(), plan.config.shared_items.end());
  Counts c;
  for (const auto& [u, list] : plan.decisions) {
    if (user && *user != u) continue;
    for (const auto& d : list) {
      if (shared_only && !shared.count(d.entry.item_id)) continue;
      if (threshold && d.entry.threshold != threshold) continue;
      c.add(is_correct(plan.config, d.entry.item_id), d.trusted);
    }
  }
  return c;
}

Plan table5_plan() {
  // usr2 stops two entries short; pick a seed whose last two queue entries
  // for usr2 are exclusive items, then make exactly those incorrect-and-undecided.
  for (std::uint64_t seed = 1;; ++seed) {
    StudyConfig c;
    c.study_id = "covid-cxr";
    c.seed = seed;
    for (int i = 0; i < 40; ++i) c.items.push_back(make_item(id("shared", i), i < 32));
    for (int i = 0; i < 40; ++i) c.items.push_back(make_item(id("usr1", i), i < 32));
    for (int i = 0; i < 40; ++i) c.items.push_back(make_item(id("usr2", i), true));
    for (int i = 0; i < 40; ++i) {
      c.shared_items.push_back(id("shared", i));
      c.assignment["usr1"].push_back(id("usr1", i));
      c.assignment["usr2"].push_back(id("usr2", i));
    }
    c.questionnaire = {{"q1", "Did the explanation help you decide?", id("shared", 0)},
                       {"q2", "Would you use the system in practice?", ""}};

    const auto q2 = build_queue(c, "usr2");
    const auto& last1 = q2[q2.size() - 1].item_id;
    const auto& last2 = q2[q2.size() - 2].item_id;
    if (last1.rfind("usr2", 0) != 0 || last2.rfind("usr2", 0) != 0) continue;

    // usr2 exclusive: 8 incorrect, two of them the undecided tail.
    std::set<std::string> wrong = {last1, last2};
    for (int i = 0; wrong.size() < 8; ++i) wrong.insert(id("usr2", i));
    for (auto& item : c.items)
      if (wrong.count(item.item_id)) item.true_label = "normal";

    Plan p;
    p.config = c;
    p.decisions["usr1"] = script(c, build_queue(c, "usr1"), 80, {4, 6, 3, 8});
    p.decisions["usr2"] = script(c, build_queue(c, "usr2"), 78, {0, 8, 1, 5});
    return p;
  }
}

Plan fig5_plan() {
  Plan p;
  auto& c = p.config;
  c.study_id = "fig5";
  c.seed = 5;
  c.thresholds = {0.25, 0.5, 0.75, 0.9};
  c.threshold_policy = ThresholdPolicy::AllPerItem;
  for (int i = 0; i < 20; ++i) {
    auto item = make_item(id("img", i), i < 16);
    std::vector<double> v(16);
    for (int k = 0; k < 16; ++k) v[k] = double((k * 7 + i) % 16);
    item.saliency = SaliencyMap(4, 4, v);
    c.items.push_back(item);
    c.assignment["usr1"].push_back(item.item_id);
  }
  // trusted (correct, incorrect) per threshold
  const std::map<double, std::pair<std::size_t, std::size_t>> quota = {
      {0.25, {1, 3}}, {0.5, {2, 4}}, {0.75, {2, 3}}, {0.9, {2, 4}}};
  std::map<double, std::pair<std::size_t, std::size_t>> used;
  for (const auto& e : build_queue(c, "usr1")) {
    const bool correct = is_correct(c, e.item_id);
    auto& [tc, ti] = used[*e.threshold];
    const auto& [qc, qi] = quota.at(*e.threshold);
    bool trusted = false;
    if (correct && tc < qc) trusted = true, ++tc;
    if (!correct && ti < qi) trusted = true, ++ti;
    p.decisions["usr1"].push_back({e, trusted});
  }
  return p;
}

SaliencyMap random_map(std::mt19937_64& rng, std::size_t max_side) {
  std::uniform_int_distribution<std::size_t> side(1, max_side);
  const auto w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> value(-5.0, 50.0);
  std::uniform_int_distribution<int> coarse(0, 3);
  std::vector<double> v(w * h);
  for (auto& x : v) x = coarse(rng) == 0 ? double(coarse(rng)) : value(rng);  // some ties
  return SaliencyMap(w, h, std::move(v));
}

Plan random_plan(std::mt19937_64& rng, const std::string& study_id) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Plan p;
  auto& c = p.config;
  c.study_id = study_id;
  c.seed = rng();
  const int users = pick(1, 4);
  const int items = pick(1, 25);
  const bool with_thresholds = pick(0, 1) == 1;
  if (with_thresholds) {
    std::set<double> ts;
    for (int i = pick(1, 4); i > 0; --i) ts.insert(double(pick(0, 20)) / 20.0);
    c.thresholds.assign(ts.begin(), ts.end());
    c.threshold_policy = pick(0, 1) ? ThresholdPolicy::AllPerItem : ThresholdPolicy::OnePerItem;
  }
  for (int i = 0; i < items; ++i) {
    auto item = make_item(id("it", i), pick(0, 2) != 0);
    if (with_thresholds && pick(0, 1)) item.saliency = random_map(rng, 6);
    c.items.push_back(item);
    const int owner = pick(0, users);  // == users means shared
    if (owner == users) c.shared_items.push_back(item.item_id);
    else c.assignment["u" + std::to_string(owner)].push_back(item.item_id);
  }
  for (int u = 0; u < users; ++u) c.assignment.try_emplace("u" + std::to_string(u));
  for (const auto& [user, _] : c.assignment) {
    const auto queue = build_queue(c, user);
    if (queue.empty()) continue;
    const std::size_t stop = pick(0, 3) == 0 ? std::size_t(pick(0, int(queue.size()))) : queue.size();
    auto& list = p.decisions[user];
    for (std::size_t i = 0; i < stop; ++i) list.push_back({queue[i], pick(0, 1) == 1});
  }
  return p;
}

}  // namespace fixtures
