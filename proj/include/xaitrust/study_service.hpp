#pragma once

// Live annotation studies. Every state change is an event appended to the
// study's log and flushed before the call returns; in-memory state is the fold
// of those events, so a restarted service replays its logs and carries on.
//
// Locking: one mutex per study serializes appends and the sessions inside it.
// Reads take the same lock and therefore see a consistent prefix of the log.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "xaitrust/saliency.hpp"
#include "xaitrust/study.hpp"

namespace xtrust {

class EventStore {
 public:
  virtual ~EventStore() = default;
  // Must not return before the line is durable.
  virtual void append(const std::string& study_id, const std::string& line) = 0;
  // Raw log text per study id.
  virtual std::map<std::string, std::string> load() = 0;
};

class MemoryEventStore : public EventStore {
 public:
  void append(const std::string& study_id, const std::string& line) override;
  std::map<std::string, std::string> load() override;

 private:
  std::mutex mutex_;
  std::map<std::string, std::string> logs_;
};

// One "<study_id>.jsonl" file per study under `dir`; fsync after every line.
class FileEventStore : public EventStore {
 public:
  explicit FileEventStore(std::filesystem::path dir);
  ~FileEventStore() override;
  FileEventStore(const FileEventStore&) = delete;
  FileEventStore& operator=(const FileEventStore&) = delete;

  void append(const std::string& study_id, const std::string& line) override;
  std::map<std::string, std::string> load() override;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, int> fds_;
};

enum class ServiceErrorKind { NotFound, Conflict, Invalid };

class ServiceError : public std::runtime_error {
 public:
  ServiceError(ServiceErrorKind kind, const std::string& message,
               std::vector<std::string> violations = {})
      : std::runtime_error(message), kind_(kind), violations_(std::move(violations)) {}
  ServiceErrorKind kind() const { return kind_; }
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  ServiceErrorKind kind_;
  std::vector<std::string> violations_;
};

struct SessionInfo {
  std::string session_id;
  std::string study_id;
  std::string user_id;
  std::size_t cursor = 0;
  std::size_t queue_length = 0;
  bool completed = false;
  bool resumed = false;
};

// What a reviewer is shown. Carries no ground truth.
struct ReviewerView {
  std::string session_id;
  std::size_t position = 0;
  std::size_t total = 0;
  std::string item_id;
  std::string image_ref;
  std::string predicted_label;
  std::optional<double> threshold;
  std::optional<ThresholdMask> mask;
};

struct QuestionView {
  std::string question_id;
  std::string prompt;
  std::string item_id;
  std::string image_ref;
  bool answered = false;
};

struct CompletedView {
  std::string session_id;
  std::size_t total = 0;
  std::vector<QuestionView> questionnaire;
};

using NextItem = std::variant<ReviewerView, CompletedView>;

struct DecisionRequest {
  std::string item_id;
  TrustDecision decision = TrustDecision::Untrusted;
  // When set, must match the queue entry being answered.
  std::optional<std::size_t> position;
  std::optional<double> threshold;
};

struct DecisionAck {
  bool duplicate = false;
  std::size_t cursor = 0;
  bool completed = false;
};

struct AnswerRequest {
  std::string question_id;
  bool yes = false;
};

class StudyService {
 public:
  using Clock = std::function<Timestamp()>;

  // Replays everything the store already holds.
  explicit StudyService(std::shared_ptr<EventStore> store, Clock clock = {});

  std::string create_study(const StudyConfig& config);
  SessionInfo open_session(const std::string& study_id, const std::string& user_id);
  NextItem next_item(const std::string& session_id) const;
  DecisionAck submit_decision(const std::string& session_id, const DecisionRequest& request);
  void submit_questionnaire(const std::string& study_id, const std::string& user_id,
                            const std::vector<AnswerRequest>& answers);
  TrustMetricsReport get_report(const std::string& study_id, const ReportFilter& filter) const;
  std::string export_log(const std::string& study_id) const;

  std::vector<std::string> study_ids() const;
  // Warnings gathered while replaying the store at construction.
  const std::vector<std::string>& replay_warnings() const { return replay_warnings_; }

 private:
  struct Study {
    explicit Study(StudyLedger l) : ledger(std::move(l)) {}
    mutable std::mutex mutex;
    StudyLedger ledger;
    std::string log;
  };

  Study& study(const std::string& study_id) const;
  Study& study_for_session(const std::string& session_id) const;
  void commit(Study& s, const Event& event);
  Timestamp now() const { return clock_(); }

  std::shared_ptr<EventStore> store_;
  Clock clock_;
  mutable std::shared_mutex index_mutex_;
  std::map<std::string, std::unique_ptr<Study>> studies_;
  std::map<std::string, std::string> session_index_;  // session -> study
  std::vector<std::string> replay_warnings_;
};

}  // namespace xtrust
