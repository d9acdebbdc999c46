#pragma once

// HTTP+JSON front end for StudyService.
//
//   POST /studies                          create a study from a config body
//   POST /studies/{id}/sessions            {"user": ...} -> open or resume
//   GET  /sessions/{id}/next               reviewer view or completion marker
//   POST /sessions/{id}/decisions          {"item", "trusted", "position"?, "threshold"?}
//   POST /studies/{id}/questionnaire       {"user", "answers": [{"question", "answer"}]}
//   GET  /studies/{id}/report?user=&shared_only=&threshold=
//   GET  /studies/{id}/log                 NDJSON event log
//   GET  /images/...                       static image mount, when configured
//
// Reviewer-facing responses never carry true labels or correctness.

#include <filesystem>
#include <httplib.h>
#include <json.hpp>
#include <optional>
#include <string>

#include "xaitrust/study_service.hpp"

namespace xtrust {

struct HttpOptions {
  std::optional<std::filesystem::path> image_dir;
  std::string image_mount = "/images";
};

nlohmann::ordered_json to_json(const SessionInfo& info);
nlohmann::ordered_json to_json(const NextItem& next);
nlohmann::ordered_json to_json(const ThresholdMask& mask);

// Parses the report query string. Throws ServiceError(Invalid) on bad values.
ReportFilter parse_report_filter(const httplib::Params& params);

void register_routes(httplib::Server& server, StudyService& service, const HttpOptions& options = {});

}  // namespace xtrust
