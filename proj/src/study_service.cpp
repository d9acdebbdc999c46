#include "xaitrust/study_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>

#include "xaitrust/ingest.hpp"

namespace xtrust {

namespace fs = std::filesystem;

void MemoryEventStore::append(const std::string& study_id, const std::string& line) {
  std::lock_guard lock(mutex_);
  auto& log = logs_[study_id];
  log += line;
  log += '\n';
}

std::map<std::string, std::string> MemoryEventStore::load() {
  std::lock_guard lock(mutex_);
  return logs_;
}

FileEventStore::FileEventStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

FileEventStore::~FileEventStore() {
  for (auto& [_, fd] : fds_) ::close(fd);
}

void FileEventStore::append(const std::string& study_id, const std::string& line) {
  std::lock_guard lock(mutex_);
  auto it = fds_.find(study_id);
  if (it == fds_.end()) {
    const auto path = dir_ / (study_id + ".jsonl");
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0)
      throw std::runtime_error("cannot open event log " + path.string() + ": " + std::strerror(errno));
    it = fds_.emplace(study_id, fd).first;
  }
  std::string buf = line + '\n';
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(it->second, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("event log write failed: ") + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(it->second) != 0)
    throw std::runtime_error(std::string("event log fsync failed: ") + std::strerror(errno));
}

std::map<std::string, std::string> FileEventStore::load() {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string text = read_all(in);
    // A line without its newline was never acknowledged; cut it so later
    // appends start on a fresh line.
    const auto last_nl = text.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != text.size()) {
      text.resize(keep);
      fs::resize_file(entry.path(), keep);
    }
    out.emplace(entry.path().stem().string(), std::move(text));
  }
  return out;
}

// ---------------------------------------------------------------------------

StudyService::StudyService(std::shared_ptr<EventStore> store, Clock clock)
    : store_(std::move(store)), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [] {
      return std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
    };
  }
  for (auto& [name, text] : store_->load()) {
    auto loaded = load_event_log(text, LoadOptions{true});
    for (auto& w : loaded.warnings) replay_warnings_.push_back(name + ": " + w);
    if (loaded.studies.empty()) continue;
    if (loaded.studies.size() != 1 || loaded.study_order.front() != name)
      throw std::runtime_error("event log '" + name + "' does not hold exactly study '" + name + "'");
    auto s = std::make_unique<Study>(std::move(loaded.studies.begin()->second));
    s->log = std::move(text);
    for (const auto& [sid, _] : s->ledger.sessions()) session_index_.emplace(sid, name);
    studies_.emplace(name, std::move(s));
  }
}

StudyService::Study& StudyService::study(const std::string& study_id) const {
  std::shared_lock lock(index_mutex_);
  auto it = studies_.find(study_id);
  if (it == studies_.end())
    throw ServiceError(ServiceErrorKind::NotFound, "unknown study '" + study_id + "'");
  return *it->second;
}

StudyService::Study& StudyService::study_for_session(const std::string& session_id) const {
  std::string study_id;
  {
    std::shared_lock lock(index_mutex_);
    auto it = session_index_.find(session_id);
    if (it == session_index_.end())
      throw ServiceError(ServiceErrorKind::NotFound, "unknown session '" + session_id + "'");
    study_id = it->second;
  }
  return study(study_id);
}

void StudyService::commit(Study& s, const Event& event) {
  const auto line = serialize_event(event);
  store_->append(s.ledger.config().study_id, line);
  s.ledger.apply(event);
  s.log += line;
  s.log += '\n';
}

std::vector<std::string> StudyService::study_ids() const {
  std::shared_lock lock(index_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : studies_) ids.push_back(id);
  return ids;
}

std::string StudyService::create_study(const StudyConfig& config) {
  auto violations = validate(config);
  if (!violations.empty())
    throw ServiceError(ServiceErrorKind::Invalid, "invalid study config", std::move(violations));

  std::unique_lock lock(index_mutex_);
  if (studies_.count(config.study_id))
    throw ServiceError(ServiceErrorKind::Conflict, "study '" + config.study_id + "' already exists");
  const StudyCreatedEvent created{config, now()};
  const auto line = serialize_event(created);
  store_->append(config.study_id, line);
  auto s = std::make_unique<Study>(StudyLedger(created));
  s->log = line + '\n';
  studies_.emplace(config.study_id, std::move(s));
  return config.study_id;
}

namespace {

SessionInfo info_of(const StudyLedger& ledger, const SessionState& s, bool resumed) {
  return {s.session_id, ledger.config().study_id, s.user_id, s.cursor, s.queue.size(),
          s.completed(), resumed};
}

}  // namespace

SessionInfo StudyService::open_session(const std::string& study_id, const std::string& user_id) {
  auto& s = study(study_id);
  std::lock_guard lock(s.mutex);
  if (const auto* existing = s.ledger.session_for_user(user_id))
    return info_of(s.ledger, *existing, true);

  const auto& config = s.ledger.config();
  if (user_id.empty() || (!config.assignment.count(user_id) && config.shared_items.empty()))
    throw ServiceError(ServiceErrorKind::NotFound,
                       "unknown user '" + user_id + "' in study '" + study_id + "'");

  const auto session_id = session_id_for(study_id, user_id);
  commit(s, SessionOpenedEvent{study_id, session_id, user_id, now()});
  {
    std::unique_lock index_lock(index_mutex_);
    session_index_.emplace(session_id, study_id);
  }
  return info_of(s.ledger, *s.ledger.session(session_id), false);
}

NextItem StudyService::next_item(const std::string& session_id) const {
  auto& s = study_for_session(session_id);
  std::lock_guard lock(s.mutex);
  const auto* session = s.ledger.session(session_id);
  const auto& config = s.ledger.config();
  if (session->completed()) {
    CompletedView done{session_id, session->queue.size(), {}};
    for (const auto& q : config.questionnaire) {
      QuestionView view{q.question_id, q.prompt, q.item_id, {}, false};
      if (const auto* item = config.find_item(q.item_id)) view.image_ref = item->image_ref;
      view.answered = s.ledger.answers().count({session->user_id, q.question_id}) > 0;
      done.questionnaire.push_back(std::move(view));
    }
    return done;
  }
  const auto& entry = session->queue[session->cursor];
  const auto* item = config.find_item(entry.item_id);
  ReviewerView view;
  view.session_id = session_id;
  view.position = session->cursor;
  view.total = session->queue.size();
  view.item_id = item->item_id;
  view.image_ref = item->image_ref;
  view.predicted_label = item->predicted_label;
  view.threshold = entry.threshold;
  if (item->saliency && entry.threshold) view.mask = binarize(normalize(*item->saliency), *entry.threshold);
  return view;
}

DecisionAck StudyService::submit_decision(const std::string& session_id,
                                          const DecisionRequest& request) {
  auto& s = study_for_session(session_id);
  std::lock_guard lock(s.mutex);
  const auto* session = s.ledger.session(session_id);

  auto ack = [&](bool duplicate) {
    return DecisionAck{duplicate, session->cursor, session->completed()};
  };
  auto is_duplicate_of = [&](std::size_t pos) {
    if (pos >= session->decided.size()) return false;
    const auto& rec = s.ledger.records()[session->decided[pos]];
    return rec.item_id == request.item_id && rec.decision == request.decision &&
           (!request.threshold || rec.threshold == request.threshold);
  };
  auto matches_current = [&] {
    if (session->completed()) return false;
    const auto& entry = session->queue[session->cursor];
    return entry.item_id == request.item_id &&
           (!request.threshold || entry.threshold == request.threshold);
  };

  if (request.position) {
    const auto pos = *request.position;
    if (pos < session->cursor) {
      if (is_duplicate_of(pos)) return ack(true);
      throw ServiceError(ServiceErrorKind::Conflict,
                         "position " + std::to_string(pos) + " was already decided differently");
    }
    if (session->completed())
      throw ServiceError(ServiceErrorKind::Conflict, "session is completed");
    if (pos > session->cursor || !matches_current())
      throw ServiceError(ServiceErrorKind::Conflict,
                         "out of order: current position is " + std::to_string(session->cursor) +
                             " (item '" + session->queue[session->cursor].item_id + "')");
  } else if (!matches_current()) {
    if (session->cursor > 0 && is_duplicate_of(session->cursor - 1)) return ack(true);
    if (session->completed())
      throw ServiceError(ServiceErrorKind::Conflict, "session is completed");
    throw ServiceError(ServiceErrorKind::Conflict,
                       "out of order: expected item '" + session->queue[session->cursor].item_id +
                           "', got '" + request.item_id + "'");
  }

  const auto& entry = session->queue[session->cursor];
  commit(s, DecisionEvent{s.ledger.config().study_id, session_id, session->user_id, entry.item_id,
                          entry.threshold, request.decision == TrustDecision::Trusted, now()});
  return ack(false);
}

void StudyService::submit_questionnaire(const std::string& study_id, const std::string& user_id,
                                        const std::vector<AnswerRequest>& answers) {
  auto& s = study(study_id);
  std::lock_guard lock(s.mutex);
  if (!s.ledger.knows_user(user_id))
    throw ServiceError(ServiceErrorKind::NotFound,
                       "unknown user '" + user_id + "' in study '" + study_id + "'");
  std::set<std::string> in_request;
  for (const auto& a : answers) {
    if (!s.ledger.config().find_question(a.question_id))
      throw ServiceError(ServiceErrorKind::Invalid, "unknown question '" + a.question_id + "'");
    if (!in_request.insert(a.question_id).second ||
        s.ledger.answers().count({user_id, a.question_id}))
      throw ServiceError(ServiceErrorKind::Conflict,
                         "question '" + a.question_id + "' already answered by '" + user_id + "'");
  }
  for (const auto& a : answers)
    commit(s, QuestionnaireAnswerEvent{study_id, user_id, a.question_id, a.yes, now()});
}

TrustMetricsReport StudyService::get_report(const std::string& study_id,
                                            const ReportFilter& filter) const {
  auto& s = study(study_id);
  std::lock_guard lock(s.mutex);
  try {
    return s.ledger.report(filter);
  } catch (const UnknownUserError& e) {
    throw ServiceError(ServiceErrorKind::NotFound, e.what());
  }
}

std::string StudyService::export_log(const std::string& study_id) const {
  auto& s = study(study_id);
  std::lock_guard lock(s.mutex);
  return s.log;
}

}  // namespace xtrust
