#pragma once

// Study configuration and the event-sourced study ledger. The ledger is the
// pure fold of a study's event log; the HTTP service, log ingestion and the
// CLI all derive their state and reports from it.

#include <map>
#include <json.hpp>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "xaitrust/saliency.hpp"
#include "xaitrust/trust_core.hpp"

namespace xtrust {

enum class ThresholdPolicy { OnePerItem, AllPerItem };

struct StudyItem {
  std::string item_id;
  std::string image_ref;
  std::string predicted_label;
  std::string true_label;  // server side only
  std::optional<SaliencyMap> saliency;

  PredictionOutcome outcome() const {
    return predicted_label == true_label ? PredictionOutcome::Correct
                                         : PredictionOutcome::Incorrect;
  }
};

struct QuestionSpec {
  std::string question_id;
  std::string prompt;
  std::string item_id;  // may be empty for a question not tied to an image
};

struct StudyConfig {
  std::string study_id;
  std::uint64_t seed = 0;
  std::vector<StudyItem> items;
  std::vector<double> thresholds;
  ThresholdPolicy threshold_policy = ThresholdPolicy::AllPerItem;
  std::map<std::string, std::vector<std::string>> assignment;  // user -> exclusive items
  std::vector<std::string> shared_items;
  std::vector<QuestionSpec> questionnaire;

  const StudyItem* find_item(std::string_view item_id) const;
  const QuestionSpec* find_question(std::string_view question_id) const;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Empty when the config is usable.
std::vector<std::string> validate(const StudyConfig& config);

nlohmann::ordered_json to_json(const StudyConfig& config);
// Structural errors (wrong JSON types, missing fields) throw ValidationError.
// Semantic checks are left to validate().
StudyConfig study_config_from_json(const nlohmann::json& j);

std::string_view to_string(ThresholdPolicy policy);

// One unit of reviewer work: an item, shown at one threshold when the study
// configures thresholds.
struct QueueEntry {
  std::string item_id;
  std::optional<double> threshold;

  bool operator==(const QueueEntry&) const = default;
};

// Deterministic presentation queue for a user: shared items plus the user's
// exclusive items, expanded by threshold policy, shuffled by the study seed.
std::vector<QueueEntry> build_queue(const StudyConfig& config, std::string_view user_id);

std::string session_id_for(std::string_view study_id, std::string_view user_id);

// ---------------------------------------------------------------------------
// Events. One JSON object per line, schema-versioned.
// ---------------------------------------------------------------------------

inline constexpr int kEventSchemaVersion = 1;

struct StudyCreatedEvent {
  StudyConfig config;
  Timestamp ts{};
};

struct SessionOpenedEvent {
  std::string study_id;
  std::string session_id;
  std::string user_id;
  Timestamp ts{};
};

struct DecisionEvent {
  std::string study_id;
  std::string session_id;
  std::string user_id;
  std::string item_id;
  std::optional<double> threshold;
  bool trusted = false;
  Timestamp ts{};
};

struct QuestionnaireAnswerEvent {
  std::string study_id;
  std::string user_id;
  std::string question_id;
  bool yes = false;
  Timestamp ts{};
};

using Event =
    std::variant<StudyCreatedEvent, SessionOpenedEvent, DecisionEvent, QuestionnaireAnswerEvent>;

const std::string& event_study_id(const Event& event);

// Compact single-line JSON, no trailing newline. Key order is fixed so
// identical events serialize to identical bytes.
std::string serialize_event(const Event& event);

class EventParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown kind with a schema version newer than ours: the caller may skip it.
struct UnknownEvent {
  int version = 0;
  std::string kind;
};

// Throws EventParseError on malformed input or an unknown kind at a schema
// version we should understand.
std::variant<Event, UnknownEvent> parse_event(std::string_view line);

std::string format_timestamp(Timestamp ts);
Timestamp parse_timestamp(std::string_view text);  // throws EventParseError

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

struct SessionState {
  std::string session_id;
  std::string user_id;
  std::vector<QueueEntry> queue;
  std::size_t cursor = 0;
  // Index into StudyLedger::records() for each decision made, by position.
  std::vector<std::size_t> decided;

  bool completed() const { return cursor >= queue.size(); }
};

struct ReportFilter {
  std::optional<std::string> user_id;
  bool shared_only = false;
  std::optional<double> threshold;
};

class UnknownUserError : public std::runtime_error {
 public:
  explicit UnknownUserError(const std::string& user)
      : std::runtime_error("unknown user '" + user + "'") {}
};

class StudyLedger {
 public:
  explicit StudyLedger(const StudyCreatedEvent& created);

  // Folds one event of this study. Throws std::invalid_argument when the event
  // does not fit the study (unknown item, question or session).
  void apply(const Event& event);

  const StudyConfig& config() const { return config_; }
  const std::vector<TrustRecord>& records() const { return records_; }
  const std::map<std::string, SessionState>& sessions() const { return sessions_; }
  const SessionState* session(std::string_view session_id) const;
  const SessionState* session_for_user(std::string_view user_id) const;
  // (user, question) -> answer
  const std::map<std::pair<std::string, std::string>, bool>& answers() const { return answers_; }

  bool knows_user(std::string_view user_id) const;
  bool is_shared(std::string_view item_id) const { return shared_.count(std::string(item_id)) > 0; }

  // Throws UnknownUserError for a user who is neither assigned nor has a session.
  std::vector<TrustRecord> filtered_records(const ReportFilter& filter) const;
  TrustMetricsReport report(const ReportFilter& filter) const;

 private:
  StudyConfig config_;
  std::set<std::string> shared_;
  std::vector<TrustRecord> records_;
  std::map<std::string, SessionState> sessions_;
  std::map<std::string, std::string, std::less<>> user_sessions_;
  std::map<std::pair<std::string, std::string>, bool> answers_;
};

// Builds a self-contained event log (study_created, session_opened, decisions)
// that replays to exactly `records`. Items take their correctness from the
// records; each user is assigned the items they judged.
std::string synthesize_log(std::string_view study_id, std::span<const TrustRecord> records);

}  // namespace xtrust
