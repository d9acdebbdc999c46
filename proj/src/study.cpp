#include "xaitrust/study.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "xaitrust/archetypes.hpp"

namespace xtrust {

using nlohmann::json;
using nlohmann::ordered_json;

const StudyItem* StudyConfig::find_item(std::string_view item_id) const {
  for (const auto& it : items)
    if (it.item_id == item_id) return &it;
  return nullptr;
}

const QuestionSpec* StudyConfig::find_question(std::string_view question_id) const {
  for (const auto& q : questionnaire)
    if (q.question_id == question_id) return &q;
  return nullptr;
}

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "invalid study config";
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  }) && id != "." && id != "..";
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate(const StudyConfig& config) {
  std::vector<std::string> v;
  if (!valid_id(config.study_id))
    v.push_back("study_id must be 1-128 characters of [A-Za-z0-9._-]");
  if (config.items.empty()) v.push_back("items must not be empty");

  std::set<std::string> ids;
  bool any_saliency = false;
  for (std::size_t i = 0; i < config.items.size(); ++i) {
    const auto& it = config.items[i];
    const std::string where = "items[" + std::to_string(i) + "]";
    if (it.item_id.empty()) v.push_back(where + ": item_id is empty");
    else if (!ids.insert(it.item_id).second) v.push_back(where + ": duplicate item_id '" + it.item_id + "'");
    if (it.predicted_label.empty()) v.push_back(where + ": predicted_label is empty");
    if (it.true_label.empty()) v.push_back(where + ": true_label is empty");
    any_saliency = any_saliency || it.saliency.has_value();
  }

  std::set<double> seen_thresholds;
  for (double t : config.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) v.push_back("threshold " + std::to_string(t) + " outside [0,1]");
    else if (!seen_thresholds.insert(t).second) v.push_back("duplicate threshold " + std::to_string(t));
  }
  if (any_saliency && config.thresholds.empty())
    v.push_back("thresholds must be non-empty when any item has a saliency map");

  std::set<std::string> covered;
  for (const auto& s : config.shared_items) {
    if (!ids.count(s)) v.push_back("shared item '" + s + "' is not in items");
    covered.insert(s);
  }
  for (const auto& [user, subset] : config.assignment) {
    if (user.empty()) v.push_back("assignment has an empty user id");
    for (const auto& s : subset) {
      if (!ids.count(s)) v.push_back("item '" + s + "' assigned to '" + user + "' is not in items");
      covered.insert(s);
    }
  }
  for (const auto& id : ids)
    if (!covered.count(id)) v.push_back("item '" + id + "' is neither shared nor assigned");
  if (config.assignment.empty() && config.shared_items.empty() && !config.items.empty())
    v.push_back("no users: assignment and shared_items are both empty");

  std::set<std::string> qids;
  for (const auto& q : config.questionnaire) {
    if (q.question_id.empty()) v.push_back("questionnaire entry with empty question_id");
    else if (!qids.insert(q.question_id).second) v.push_back("duplicate question_id '" + q.question_id + "'");
    if (!q.item_id.empty() && !ids.count(q.item_id))
      v.push_back("question '" + q.question_id + "' refers to unknown item '" + q.item_id + "'");
  }
  return v;
}

std::string_view to_string(ThresholdPolicy policy) {
  return policy == ThresholdPolicy::OnePerItem ? "one-per-item" : "all-per-item";
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

ordered_json to_json(const StudyConfig& c) {
  ordered_json j;
  j["study_id"] = c.study_id;
  j["seed"] = c.seed;
  j["thresholds"] = c.thresholds;
  j["threshold_policy"] = std::string(to_string(c.threshold_policy));
  ordered_json items = ordered_json::array();
  for (const auto& it : c.items) {
    ordered_json ji;
    ji["item_id"] = it.item_id;
    ji["image_ref"] = it.image_ref;
    ji["predicted_label"] = it.predicted_label;
    ji["true_label"] = it.true_label;
    if (it.saliency) {
      ji["saliency"] = {{"width", it.saliency->width()},
                        {"height", it.saliency->height()},
                        {"values", std::vector<double>(it.saliency->values().begin(),
                                                       it.saliency->values().end())}};
    }
    items.push_back(std::move(ji));
  }
  j["items"] = std::move(items);
  j["shared_items"] = c.shared_items;
  ordered_json assignment = ordered_json::object();
  for (const auto& [user, subset] : c.assignment) assignment[user] = subset;
  j["assignment"] = std::move(assignment);
  ordered_json questions = ordered_json::array();
  for (const auto& q : c.questionnaire)
    questions.push_back({{"question_id", q.question_id}, {"prompt", q.prompt}, {"item_id", q.item_id}});
  j["questionnaire"] = std::move(questions);
  return j;
}

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where, std::vector<std::string>& errs,
        T fallback = T{}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    errs.push_back(where + key + ": wrong type");
    return fallback;
  }
}

std::string required_string(const json& j, const char* key, const std::string& where,
                            std::vector<std::string>& errs) {
  if (!j.contains(key)) {
    errs.push_back(where + key + ": missing");
    return {};
  }
  return field<std::string>(j, key, where, errs);
}

}  // namespace

StudyConfig study_config_from_json(const json& j) {
  std::vector<std::string> errs;
  if (!j.is_object()) throw ValidationError({"study config must be a JSON object"});
  StudyConfig c;
  c.study_id = required_string(j, "study_id", "", errs);
  c.seed = field<std::uint64_t>(j, "seed", "", errs);
  c.thresholds = field<std::vector<double>>(j, "thresholds", "", errs);
  const auto policy = field<std::string>(j, "threshold_policy", "", errs, "all-per-item");
  if (policy == "one-per-item") c.threshold_policy = ThresholdPolicy::OnePerItem;
  else if (policy == "all-per-item") c.threshold_policy = ThresholdPolicy::AllPerItem;
  else errs.push_back("threshold_policy: expected one-per-item or all-per-item");

  if (auto it = j.find("items"); it != j.end()) {
    if (!it->is_array()) {
      errs.push_back("items: wrong type");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& ji = (*it)[i];
        const std::string where = "items[" + std::to_string(i) + "].";
        if (!ji.is_object()) {
          errs.push_back(where + ": not an object");
          continue;
        }
        StudyItem item;
        item.item_id = required_string(ji, "item_id", where, errs);
        item.image_ref = field<std::string>(ji, "image_ref", where, errs);
        item.predicted_label = required_string(ji, "predicted_label", where, errs);
        item.true_label = required_string(ji, "true_label", where, errs);
        if (auto s = ji.find("saliency"); s != ji.end() && !s->is_null()) {
          try {
            item.saliency.emplace(s->at("width").get<std::size_t>(), s->at("height").get<std::size_t>(),
                                  s->at("values").get<std::vector<double>>());
          } catch (const std::exception& e) {
            errs.push_back(where + "saliency: " + e.what());
          }
        }
        c.items.push_back(std::move(item));
      }
    }
  }
  c.shared_items = field<std::vector<std::string>>(j, "shared_items", "", errs);
  c.assignment = field<std::map<std::string, std::vector<std::string>>>(j, "assignment", "", errs);
  if (auto it = j.find("questionnaire"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) {
      errs.push_back("questionnaire: wrong type");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& jq = (*it)[i];
        const std::string where = "questionnaire[" + std::to_string(i) + "].";
        if (!jq.is_object()) {
          errs.push_back(where + ": not an object");
          continue;
        }
        QuestionSpec q;
        q.question_id = required_string(jq, "question_id", where, errs);
        q.prompt = field<std::string>(jq, "prompt", where, errs);
        q.item_id = field<std::string>(jq, "item_id", where, errs);
        c.questionnaire.push_back(std::move(q));
      }
    }
  }
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return c;
}

// ---------------------------------------------------------------------------
// Queue
// ---------------------------------------------------------------------------

std::vector<QueueEntry> build_queue(const StudyConfig& config, std::string_view user_id) {
  std::vector<std::string> items;
  std::set<std::string> seen;
  auto push = [&](const std::string& id) {
    if (seen.insert(id).second) items.push_back(id);
  };
  for (const auto& id : config.shared_items) push(id);
  if (auto it = config.assignment.find(std::string(user_id)); it != config.assignment.end())
    for (const auto& id : it->second) push(id);

  std::vector<double> thresholds = config.thresholds;
  std::sort(thresholds.begin(), thresholds.end());

  const CounterRng study_rng(config.seed);
  std::vector<QueueEntry> queue;
  for (const auto& id : items) {
    if (thresholds.empty()) {
      queue.push_back({id, std::nullopt});
    } else if (config.threshold_policy == ThresholdPolicy::AllPerItem) {
      for (double t : thresholds) queue.push_back({id, t});
    } else {
      // Per item, not per user: reviewers of a shared item see the same view.
      auto rng = study_rng.split(stable_hash(id));
      queue.push_back({id, thresholds[rng.next_below(thresholds.size())]});
    }
  }

  auto rng = study_rng.split(stable_hash(user_id) ^ 0x5bd1e995ULL);
  for (std::size_t i = queue.size(); i > 1; --i) std::swap(queue[i - 1], queue[rng.next_below(i)]);
  return queue;
}

std::string session_id_for(std::string_view study_id, std::string_view user_id) {
  std::string key(study_id);
  key += '\x1f';
  key += user_id;
  char buf[24];
  std::snprintf(buf, sizeof buf, "s-%016llx",
                static_cast<unsigned long long>(mix64(stable_hash(key))));
  return buf;
}

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const auto tod = ts - day;
  const auto h = duration_cast<hours>(tod);
  const auto m = duration_cast<minutes>(tod - h);
  const auto s = duration_cast<seconds>(tod - h - m);
  const auto ms = duration_cast<milliseconds>(tod - h - m - s);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(h.count()), static_cast<int>(m.count()),
                static_cast<int>(s.count()), static_cast<int>(ms.count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  auto fail = [&]() -> Timestamp {
    throw EventParseError("bad RFC3339 timestamp '" + std::string(text) + "'");
  };
  auto digits = [&](std::size_t pos, std::size_t n, int& out) {
    if (pos + n > text.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int Y, M, D, h, m, s;
  if (!digits(0, 4, Y) || text.size() < 20 || text[4] != '-' || !digits(5, 2, M) || text[7] != '-' ||
      !digits(8, 2, D) || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !digits(11, 2, h) || text[13] != ':' || !digits(14, 2, m) || text[16] != ':' ||
      !digits(17, 2, s))
    return fail();
  std::size_t pos = 19;
  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int scale = 100;
    std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      millis += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return fail();
  }
  int offset_min = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int oh, om;
    if (!digits(pos + 1, 2, oh) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
        !digits(pos + 4, 2, om))
      return fail();
    offset_min = (oh * 60 + om) * (text[pos] == '-' ? -1 : 1);
    pos += 6;
  } else {
    return fail();
  }
  if (pos != text.size()) return fail();
  const year_month_day ymd{year{Y}, month{static_cast<unsigned>(M)}, day{static_cast<unsigned>(D)}};
  if (!ymd.ok() || h > 23 || m > 59 || s > 60) return fail();
  return sys_days{ymd} + hours{h} + minutes{m} + seconds{s} + milliseconds{millis} -
         minutes{offset_min};
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

const std::string& event_study_id(const Event& event) {
  return std::visit(
      [](const auto& e) -> const std::string& {
        if constexpr (std::is_same_v<std::decay_t<decltype(e)>, StudyCreatedEvent>)
          return e.config.study_id;
        else
          return e.study_id;
      },
      event);
}

namespace {

struct Serializer {
  ordered_json operator()(const StudyCreatedEvent& e) const {
    ordered_json j;
    j["v"] = kEventSchemaVersion;
    j["kind"] = "study_created";
    j["study"] = e.config.study_id;
    j["config"] = to_json(e.config);
    j["ts"] = format_timestamp(e.ts);
    return j;
  }
  ordered_json operator()(const SessionOpenedEvent& e) const {
    ordered_json j;
    j["v"] = kEventSchemaVersion;
    j["kind"] = "session_opened";
    j["study"] = e.study_id;
    j["session"] = e.session_id;
    j["user"] = e.user_id;
    j["ts"] = format_timestamp(e.ts);
    return j;
  }
  ordered_json operator()(const DecisionEvent& e) const {
    ordered_json j;
    j["v"] = kEventSchemaVersion;
    j["kind"] = "decision";
    j["study"] = e.study_id;
    j["session"] = e.session_id;
    j["user"] = e.user_id;
    j["item"] = e.item_id;
    j["threshold"] = e.threshold ? ordered_json(*e.threshold) : ordered_json(nullptr);
    j["trusted"] = e.trusted;
    j["ts"] = format_timestamp(e.ts);
    return j;
  }
  ordered_json operator()(const QuestionnaireAnswerEvent& e) const {
    ordered_json j;
    j["v"] = kEventSchemaVersion;
    j["kind"] = "questionnaire_answer";
    j["study"] = e.study_id;
    j["user"] = e.user_id;
    j["question"] = e.question_id;
    j["answer"] = e.yes ? "yes" : "no";
    j["ts"] = format_timestamp(e.ts);
    return j;
  }
};

std::string str(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
    throw EventParseError(std::string("missing or empty string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

std::string serialize_event(const Event& event) { return std::visit(Serializer{}, event).dump(); }

std::variant<Event, UnknownEvent> parse_event(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw EventParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw EventParseError("event is not a JSON object");
  auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer()) throw EventParseError("missing schema version 'v'");
  const int version = v->get<int>();
  if (version < 1) throw EventParseError("unsupported schema version " + std::to_string(version));
  auto k = j.find("kind");
  if (k == j.end() || !k->is_string()) throw EventParseError("missing 'kind'");
  const auto kind = k->get<std::string>();
  if (kind != "study_created" && kind != "session_opened" && kind != "decision" &&
      kind != "questionnaire_answer") {
    if (version > kEventSchemaVersion) return UnknownEvent{version, kind};
    throw EventParseError("unknown event kind '" + kind + "'");
  }
  const auto ts = parse_timestamp(str(j, "ts"));

  try {
    if (kind == "study_created") {
      auto cfg = j.find("config");
      if (cfg == j.end()) throw EventParseError("study_created without 'config'");
      StudyCreatedEvent e{study_config_from_json(*cfg), ts};
      if (e.config.study_id != str(j, "study"))
        throw EventParseError("study_created: 'study' does not match config.study_id");
      return Event{std::move(e)};
    }
    if (kind == "session_opened")
      return Event{SessionOpenedEvent{str(j, "study"), str(j, "session"), str(j, "user"), ts}};
    if (kind == "decision") {
      DecisionEvent e{str(j, "study"), str(j, "session"), str(j, "user"), str(j, "item"),
                      std::nullopt, false, ts};
      auto t = j.find("threshold");
      if (t != j.end() && !t->is_null()) {
        if (!t->is_number()) throw EventParseError("decision: 'threshold' is not a number");
        e.threshold = t->get<double>();
      }
      auto tr = j.find("trusted");
      if (tr == j.end() || !tr->is_boolean()) throw EventParseError("decision: 'trusted' must be a boolean");
      e.trusted = tr->get<bool>();
      return Event{std::move(e)};
    }
    if (kind == "questionnaire_answer") {
      const auto answer = str(j, "answer");
      if (answer != "yes" && answer != "no")
        throw EventParseError("questionnaire_answer: 'answer' must be yes or no");
      return Event{QuestionnaireAnswerEvent{str(j, "study"), str(j, "user"), str(j, "question"),
                                            answer == "yes", ts}};
    }
  } catch (const ValidationError& e) {
    throw EventParseError(std::string("study_created: ") + e.what());
  }
  throw EventParseError("unknown event kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

StudyLedger::StudyLedger(const StudyCreatedEvent& created)
    : config_(created.config), shared_(created.config.shared_items.begin(),
                                       created.config.shared_items.end()) {}

const SessionState* StudyLedger::session(std::string_view session_id) const {
  auto it = sessions_.find(std::string(session_id));
  return it == sessions_.end() ? nullptr : &it->second;
}

const SessionState* StudyLedger::session_for_user(std::string_view user_id) const {
  auto it = user_sessions_.find(user_id);
  return it == user_sessions_.end() ? nullptr : session(it->second);
}

bool StudyLedger::knows_user(std::string_view user_id) const {
  return config_.assignment.count(std::string(user_id)) > 0 ||
         user_sessions_.find(user_id) != user_sessions_.end();
}

void StudyLedger::apply(const Event& event) {
  if (event_study_id(event) != config_.study_id)
    throw std::invalid_argument("event for study '" + event_study_id(event) +
                                "' applied to study '" + config_.study_id + "'");

  auto open = [&](const std::string& session_id, const std::string& user) -> SessionState& {
    auto it = sessions_.find(session_id);
    if (it != sessions_.end()) {
      if (it->second.user_id != user)
        throw std::invalid_argument("session '" + session_id + "' belongs to user '" +
                                    it->second.user_id + "', not '" + user + "'");
      return it->second;
    }
    if (user_sessions_.count(user))
      throw std::invalid_argument("user '" + user + "' already has a session");
    SessionState s;
    s.session_id = session_id;
    s.user_id = user;
    s.queue = build_queue(config_, user);
    user_sessions_.emplace(user, session_id);
    return sessions_.emplace(session_id, std::move(s)).first->second;
  };

  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, StudyCreatedEvent>) {
          throw std::invalid_argument("study '" + config_.study_id + "' created twice");
        } else if constexpr (std::is_same_v<T, SessionOpenedEvent>) {
          open(e.session_id, e.user_id);
        } else if constexpr (std::is_same_v<T, DecisionEvent>) {
          const auto* item = config_.find_item(e.item_id);
          if (!item)
            throw std::invalid_argument("decision references unknown item '" + e.item_id + "'");
          auto& s = open(e.session_id, e.user_id);
          TrustRecord r;
          r.item_id = e.item_id;
          r.user_id = e.user_id;
          r.outcome = item->outcome();
          r.decision = e.trusted ? TrustDecision::Trusted : TrustDecision::Untrusted;
          r.threshold = e.threshold;
          r.timestamp = e.ts;
          records_.push_back(std::move(r));
          s.decided.push_back(records_.size() - 1);
          s.cursor = s.decided.size();
        } else {
          if (!config_.find_question(e.question_id))
            throw std::invalid_argument("answer to unknown question '" + e.question_id + "'");
          if (!answers_.emplace(std::pair{e.user_id, e.question_id}, e.yes).second)
            throw std::invalid_argument("user '" + e.user_id + "' answered question '" +
                                        e.question_id + "' twice");
        }
      },
      event);
}

std::vector<TrustRecord> StudyLedger::filtered_records(const ReportFilter& filter) const {
  if (filter.user_id && !knows_user(*filter.user_id)) throw UnknownUserError(*filter.user_id);
  std::vector<TrustRecord> out;
  for (const auto& r : records_) {
    if (filter.user_id && r.user_id != *filter.user_id) continue;
    if (filter.shared_only && !is_shared(r.item_id)) continue;
    if (filter.threshold && r.threshold != filter.threshold) continue;
    out.push_back(r);
  }
  return out;
}

TrustMetricsReport StudyLedger::report(const ReportFilter& filter) const {
  const auto records = filtered_records(filter);
  return xtrust::report(tally(records));
}

// ---------------------------------------------------------------------------

std::string synthesize_log(std::string_view study_id, std::span<const TrustRecord> records) {
  StudyConfig config;
  config.study_id = std::string(study_id);
  std::map<std::string, PredictionOutcome> outcomes;
  std::set<double> thresholds;
  std::vector<std::string> user_order;
  for (const auto& r : records) {
    auto [it, fresh] = outcomes.emplace(r.item_id, r.outcome);
    if (!fresh && it->second != r.outcome)
      throw std::invalid_argument("item '" + r.item_id + "' has conflicting correctness");
    if (fresh) {
      StudyItem item;
      item.item_id = r.item_id;
      item.predicted_label = "positive";
      item.true_label = r.outcome == PredictionOutcome::Correct ? "positive" : "negative";
      config.items.push_back(std::move(item));
    }
    if (r.threshold) thresholds.insert(*r.threshold);
    auto& subset = config.assignment[r.user_id];
    if (subset.empty()) user_order.push_back(r.user_id);
    if (std::find(subset.begin(), subset.end(), r.item_id) == subset.end())
      subset.push_back(r.item_id);
  }
  config.thresholds.assign(thresholds.begin(), thresholds.end());

  const Timestamp start = records.empty() ? Timestamp{} : records.front().timestamp;
  std::string out;
  auto emit = [&](const Event& e) {
    out += serialize_event(e);
    out += '\n';
  };
  emit(StudyCreatedEvent{config, start});
  for (const auto& user : user_order)
    emit(SessionOpenedEvent{config.study_id, session_id_for(study_id, user), user, start});
  for (const auto& r : records)
    emit(DecisionEvent{config.study_id, session_id_for(study_id, r.user_id), r.user_id, r.item_id,
                       r.threshold, r.decision == TrustDecision::Trusted, r.timestamp});
  return out;
}

}  // namespace xtrust
