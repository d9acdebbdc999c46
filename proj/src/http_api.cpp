#include "xaitrust/http_api.hpp"

#include <charconv>

#include "xaitrust/report_format.hpp"

namespace xtrust {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const SessionInfo& info) {
  ordered_json j;
  j["session_id"] = info.session_id;
  j["study_id"] = info.study_id;
  j["user"] = info.user_id;
  j["cursor"] = info.cursor;
  j["queue_length"] = info.queue_length;
  j["status"] = info.completed ? "completed" : "active";
  j["resumed"] = info.resumed;
  return j;
}

ordered_json to_json(const ThresholdMask& mask) {
  ordered_json j;
  j["width"] = mask.width;
  j["height"] = mask.height;
  j["threshold"] = mask.threshold;
  j["count"] = mask.count();
  if (auto b = mask.bounds())
    j["bounds"] = {{"x0", b->x0}, {"y0", b->y0}, {"x1", b->x1}, {"y1", b->y1}};
  else
    j["bounds"] = nullptr;
  ordered_json rows = ordered_json::array();
  for (std::size_t y = 0; y < mask.height; ++y) {
    std::string row(mask.width, '0');
    for (std::size_t x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) row[x] = '1';
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

ordered_json to_json(const NextItem& next) {
  ordered_json j;
  if (const auto* done = std::get_if<CompletedView>(&next)) {
    j["status"] = "completed";
    j["session_id"] = done->session_id;
    j["total"] = done->total;
    ordered_json qs = ordered_json::array();
    for (const auto& q : done->questionnaire)
      qs.push_back({{"question_id", q.question_id},
                    {"prompt", q.prompt},
                    {"item_id", q.item_id},
                    {"image_ref", q.image_ref},
                    {"answered", q.answered}});
    j["questionnaire"] = std::move(qs);
    return j;
  }
  const auto& v = std::get<ReviewerView>(next);
  j["status"] = "active";
  j["session_id"] = v.session_id;
  j["position"] = v.position;
  j["total"] = v.total;
  j["item_id"] = v.item_id;
  j["image_ref"] = v.image_ref;
  j["predicted_label"] = v.predicted_label;
  j["threshold"] = v.threshold ? ordered_json(*v.threshold) : ordered_json(nullptr);
  j["mask"] = v.mask ? to_json(*v.mask) : ordered_json(nullptr);
  return j;
}

namespace {

int status_of(ServiceErrorKind kind) {
  switch (kind) {
    case ServiceErrorKind::NotFound: return 404;
    case ServiceErrorKind::Conflict: return 409;
    case ServiceErrorKind::Invalid: break;
  }
  return 400;
}

void send(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message, const std::vector<std::string>& violations = {}) {
  ordered_json body;
  body["error"] = code;
  body["message"] = message;
  if (!violations.empty()) body["violations"] = violations;
  send(res, status, body);
}

const char* code_of(ServiceErrorKind kind) {
  switch (kind) {
    case ServiceErrorKind::NotFound: return "not_found";
    case ServiceErrorKind::Conflict: return "conflict";
    case ServiceErrorKind::Invalid: break;
  }
  return "invalid";
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, status_of(e.kind()), code_of(e.kind()), e.what(), e.violations());
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid", "invalid study config", e.violations());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body);
  if (!j.is_object()) throw ServiceError(ServiceErrorKind::Invalid, "request body must be a JSON object");
  return j;
}

std::string required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
    throw ServiceError(ServiceErrorKind::Invalid, std::string("'") + key + "' must be a non-empty string");
  return it->get<std::string>();
}

}  // namespace

ReportFilter parse_report_filter(const httplib::Params& params) {
  ReportFilter f;
  for (const auto& [key, value] : params) {
    if (key == "user") {
      if (!value.empty()) f.user_id = value;
    } else if (key == "shared_only") {
      if (value == "true" || value == "1") f.shared_only = true;
      else if (value == "false" || value == "0" || value.empty()) f.shared_only = false;
      else throw ServiceError(ServiceErrorKind::Invalid, "shared_only must be true or false");
    } else if (key == "threshold") {
      if (value.empty()) continue;
      double t = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), t);
      if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ServiceError(ServiceErrorKind::Invalid, "threshold '" + value + "' is not a number");
      f.threshold = t;
    } else {
      throw ServiceError(ServiceErrorKind::Invalid, "unknown report parameter '" + key + "'");
    }
  }
  return f;
}

void register_routes(httplib::Server& server, StudyService& service, const HttpOptions& options) {
  server.Post("/studies", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto config = study_config_from_json(body_of(req));
    const auto id = service.create_study(config);
    send(res, 201, {{"study_id", id}});
  }));

  server.Post(R"(/studies/([^/]+)/sessions)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto user = required(body_of(req), "user");
                const auto info = service.open_session(req.matches[1], user);
                send(res, info.resumed ? 200 : 201, to_json(info));
              }));

  server.Get(R"(/sessions/([^/]+)/next)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, to_json(service.next_item(req.matches[1])));
             }));

  server.Post(R"(/sessions/([^/]+)/decisions)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                DecisionRequest d;
                d.item_id = required(body, "item");
                auto trusted = body.find("trusted");
                if (trusted == body.end() || !trusted->is_boolean())
                  throw ServiceError(ServiceErrorKind::Invalid, "'trusted' must be a boolean");
                d.decision = trusted->get<bool>() ? TrustDecision::Trusted : TrustDecision::Untrusted;
                if (auto p = body.find("position"); p != body.end() && !p->is_null()) {
                  if (!p->is_number_unsigned())
                    throw ServiceError(ServiceErrorKind::Invalid, "'position' must be a non-negative integer");
                  d.position = p->get<std::size_t>();
                }
                if (auto t = body.find("threshold"); t != body.end() && !t->is_null()) {
                  if (!t->is_number())
                    throw ServiceError(ServiceErrorKind::Invalid, "'threshold' must be a number");
                  d.threshold = t->get<double>();
                }
                const auto ack = service.submit_decision(req.matches[1], d);
                send(res, 200, {{"status", ack.duplicate ? "duplicate" : "recorded"},
                                {"cursor", ack.cursor},
                                {"completed", ack.completed}});
              }));

  server.Post(R"(/studies/([^/]+)/questionnaire)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                const auto user = required(body, "user");
                std::vector<AnswerRequest> answers;
                if (auto a = body.find("answers"); a != body.end()) {
                  if (!a->is_array())
                    throw ServiceError(ServiceErrorKind::Invalid, "'answers' must be an array");
                  for (const auto& item : *a) {
                    if (!item.is_object())
                      throw ServiceError(ServiceErrorKind::Invalid, "each answer must be an object");
                    const auto answer = required(item, "answer");
                    if (answer != "yes" && answer != "no")
                      throw ServiceError(ServiceErrorKind::Invalid, "'answer' must be yes or no");
                    answers.push_back({required(item, "question"), answer == "yes"});
                  }
                }
                service.submit_questionnaire(req.matches[1], user, answers);
                send(res, 200, {{"status", "recorded"}, {"answers", answers.size()}});
              }));

  server.Get(R"(/studies/([^/]+)/report)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto filter = parse_report_filter(req.params);
               const std::string study_id = req.matches[1];
               ordered_json body;
               body["study"] = study_id;
               body["filter"] = filter_to_json(filter);
               body["report"] = report_to_json(service.get_report(study_id, filter));
               send(res, 200, body);
             }));

  server.Get(R"(/studies/([^/]+)/log)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               res.status = 200;
               res.set_content(service.export_log(req.matches[1]), "application/x-ndjson");
             }));

  if (options.image_dir) server.set_mount_point(options.image_mount, options.image_dir->string());
}

}  // namespace xtrust
