#include "xaitrust/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "xaitrust/archetypes.hpp"
#include "xaitrust/http_api.hpp"
#include "xaitrust/ingest.hpp"
#include "xaitrust/report_format.hpp"
#include "xaitrust/saliency.hpp"
#include "xaitrust/study_service.hpp"

namespace xtrust::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path) {
  if (path == "-") return read_all(std::cin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  return read_all(in);
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f.flush()) throw DataError("write to '" + path + "' failed");
}

enum class Format { Table, Csv, Json };

const std::map<std::string, Format> kFormats = {
    {"table", Format::Table}, {"csv", Format::Csv}, {"json", Format::Json}};

std::string column_name(const BehaviorProfile& p) {
  if (p.label == "perfect") return "Perfect System User";
  if (p.label == "entrusted") return "Entrusted User";
  if (p.label == "suspicious") return "Suspicious User";
  return p.label;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string archetype;
  std::optional<double> p_correct;
  std::optional<double> p_incorrect;
  std::optional<std::uint64_t> n_correct;
  std::optional<std::uint64_t> n_incorrect;
  std::string confusion;
  std::string predictions;
  std::uint64_t seed = 0;
  std::string output;
  Format format = Format::Table;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const bool counts = a.n_correct || a.n_incorrect;
  const int sources = int(counts) + int(!a.confusion.empty()) + int(!a.predictions.empty());
  if (sources != 1)
    throw UsageError("give exactly one outcome source: --correct/--incorrect, --confusion or --predictions");
  const bool custom = a.p_correct || a.p_incorrect;
  if (custom && !a.archetype.empty())
    throw UsageError("--archetype conflicts with --p-correct/--p-incorrect");
  if (custom && !(a.p_correct && a.p_incorrect))
    throw UsageError("--p-correct and --p-incorrect must be given together");

  std::vector<BehaviorProfile> profiles;
  try {
    if (custom) {
      std::ostringstream label;
      label << "p(" << format_real(*a.p_correct) << "," << format_real(*a.p_incorrect) << ")";
      profiles.push_back(BehaviorProfile::make(*a.p_correct, *a.p_incorrect, label.str()));
    } else if (a.archetype.empty() || a.archetype == "all") {
      profiles = {BehaviorProfile::perfect(), BehaviorProfile::entrusted(),
                  BehaviorProfile::suspicious()};
    } else {
      profiles.push_back(BehaviorProfile::named(a.archetype));
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  OutcomeStream stream;
  if (counts) {
    stream = stream_from_counts(a.n_correct.value_or(0), a.n_incorrect.value_or(0));
  } else if (!a.confusion.empty()) {
    stream = to_stream(collapse(parse_confusion(read_input(a.confusion))), a.confusion);
  } else {
    stream = parse_prediction_log(read_input(a.predictions)).stream;
  }

  std::vector<std::pair<std::string, TrustMetricsReport>> columns;
  std::vector<TrustRecord> all_records;
  for (const auto& profile : profiles) {
    SimulationOptions opts;
    opts.user_id = profile.label;
    auto records = simulate(profile, stream, a.seed, opts);
    columns.emplace_back(column_name(profile), report(tally(records)));
    all_records.insert(all_records.end(), records.begin(), records.end());
  }

  switch (a.format) {
    case Format::Table:
      out << "outcomes: " << stream.count_correct() << " correct, " << stream.count_incorrect()
          << " incorrect\n\n"
          << render_table(columns);
      break;
    case Format::Csv:
      out << "user," << csv_header() << '\n';
      for (std::size_t i = 0; i < columns.size(); ++i)
        out << profiles[i].label << ',' << csv_row(columns[i].second) << '\n';
      break;
    case Format::Json: {
      ordered_json arr = ordered_json::array();
      for (std::size_t i = 0; i < columns.size(); ++i)
        arr.push_back({{"user", profiles[i].label}, {"report", report_to_json(columns[i].second)}});
      out << arr.dump(2) << '\n';
      break;
    }
  }
  if (!a.output.empty()) {
    std::ofstream f(a.output, std::ios::binary);
    if (!f) throw DataError("cannot write '" + a.output + "'");
    f << synthesize_log("simulated", all_records);
    if (!f.flush()) throw DataError("write to '" + a.output + "' failed");
    err << "wrote " << all_records.size() << " decisions to " << a.output << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze / sweep
// ---------------------------------------------------------------------------

struct LogArgs {
  std::string log = "-";
  std::string study;
  std::string user;
  bool shared_only = false;
  std::optional<double> threshold;
  Format format = Format::Table;
  std::string output;
};

struct Selection {
  LoadedLog loaded;
  const StudyLedger* ledger = nullptr;  // null when the log holds no study
};

Selection select(const LogArgs& a, std::ostream& err) {
  Selection sel;
  sel.loaded = load_event_log(read_input(a.log));
  for (const auto& w : sel.loaded.warnings) err << "warning: " << w << '\n';
  if (!a.study.empty()) {
    auto it = sel.loaded.studies.find(a.study);
    if (it == sel.loaded.studies.end()) throw DataError("unknown study '" + a.study + "'");
    sel.ledger = &it->second;
  } else if (sel.loaded.studies.size() == 1) {
    sel.ledger = &sel.loaded.studies.begin()->second;
  } else if (sel.loaded.studies.size() > 1) {
    throw UsageError("log holds several studies; pick one with --study");
  }
  return sel;
}

ReportFilter filter_of(const LogArgs& a) {
  ReportFilter f;
  if (!a.user.empty()) f.user_id = a.user;
  f.shared_only = a.shared_only;
  f.threshold = a.threshold;
  return f;
}

std::vector<TrustRecord> selected_records(const Selection& sel, const ReportFilter& f) {
  if (sel.ledger) {
    try {
      return sel.ledger->filtered_records(f);
    } catch (const UnknownUserError& e) {
      throw DataError(e.what());
    }
  }
  if (f.user_id) throw DataError("unknown user '" + *f.user_id + "'");
  return {};
}

std::string describe(const ReportFilter& f) {
  std::string d = f.user_id ? *f.user_id : "all users";
  d += f.shared_only ? " (shared items)" : " (all items)";
  if (f.threshold) d += " @ >" + format_real(*f.threshold);
  return d;
}

int cmd_analyze(const LogArgs& a, std::ostream& out, std::ostream& err) {
  const auto sel = select(a, err);
  const auto filter = filter_of(a);
  const auto r = report(tally(selected_records(sel, filter)));
  switch (a.format) {
    case Format::Table:
      if (sel.ledger) out << "study: " << sel.ledger->config().study_id << '\n';
      out << render_table({{describe(filter), r}});
      break;
    case Format::Csv:
      out << csv_header() << '\n' << csv_row(r) << '\n';
      break;
    case Format::Json: {
      ordered_json body;
      body["study"] = sel.ledger ? ordered_json(sel.ledger->config().study_id) : ordered_json(nullptr);
      body["filter"] = filter_to_json(filter);
      body["report"] = report_to_json(r);
      out << body.dump() << '\n';
      break;
    }
  }
  return kOk;
}

int cmd_sweep(const LogArgs& a, std::ostream& out, std::ostream& err) {
  const auto sel = select(a, err);
  auto filter = filter_of(a);
  filter.threshold.reset();
  const auto records = selected_records(sel, filter);
  std::map<double, TrustMetricsReport> sweep;
  try {
    sweep = per_threshold_reports(records);
  } catch (const SaliencyError& e) {
    throw DataError(e.what());
  }
  write_output(a.output, render_sweep_csv(sweep), out);
  return kOk;
}

// ---------------------------------------------------------------------------
// masks
// ---------------------------------------------------------------------------

struct MaskArgs {
  std::string grid;
  std::vector<double> thresholds{std::begin(kDefaultThresholds), std::end(kDefaultThresholds)};
  std::string out_dir;
};

int cmd_masks(const MaskArgs& a, std::ostream& out, std::ostream& err) {
  std::istringstream in(read_input(a.grid));
  const auto map = read_saliency_grid(in);
  const auto masks = mask_series(map, a.thresholds);
  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);
  for (const auto& m : masks) {
    std::ostringstream text;
    write_mask(text, m);
    if (a.out_dir.empty()) {
      out << "# threshold " << format_real(m.threshold) << " (" << m.count() << " pixels)\n"
          << text.str();
    } else {
      const auto path = fs::path(a.out_dir) / ("mask_" + format_real(m.threshold) + ".txt");
      write_output(path.string(), text.str(), out);
      err << "wrote " << path.string() << '\n';
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> configs;
  std::string images;
  std::string log_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  std::string log_dir = a.log_dir;
  if (log_dir.empty()) {
    const char* env = std::getenv(kLogDirEnv);
    log_dir = env && *env ? env : "xaitrust-logs";
  }
  std::string images = a.images;
  if (images.empty()) {
    if (const char* env = std::getenv(kImageDirEnv)) images = env;
  }

  std::vector<StudyConfig> configs;
  for (const auto& path : a.configs) {
    StudyConfig c;
    try {
      c = load_study_config_file(path);
    } catch (const ValidationError& e) {
      throw DataError(path + ": " + e.what());
    }
    if (auto v = validate(c); !v.empty()) throw DataError(path + ": " + ValidationError(v).what());
    configs.push_back(std::move(c));
  }

  // Block termination signals before any thread starts; a dedicated thread
  // waits for them and stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<FileEventStore>(log_dir);
  StudyService service(store);
  for (const auto& w : service.replay_warnings()) err << "warning: " << w << '\n';
  for (const auto& c : configs) {
    const auto ids = service.study_ids();
    if (std::find(ids.begin(), ids.end(), c.study_id) != ids.end()) {
      err << "resuming study '" << c.study_id << "' from " << log_dir << '\n';
      continue;
    }
    service.create_study(c);
    err << "created study '" << c.study_id << "'\n";
  }

  httplib::Server server;
  // SO_REUSEPORT (httplib's default) would let a second server share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  HttpOptions options;
  if (!images.empty()) options.image_dir = images;
  register_routes(server, service, options);
  if (!server.bind_to_port(a.host, a.port)) {
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    throw DataError("cannot listen on " + a.host + ":" + std::to_string(a.port) +
                    " (port in use?)");
  }

  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  out << "listening on http://" << a.host << ':' << a.port << " (logs: " << log_dir << ")"
      << std::endl;
  server.listen_after_bind();
  // Wake the watcher if the server stopped for another reason.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  err << "shut down\n";
  return kOk;
}

}  // namespace

StudyConfig load_study_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read study config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("not valid JSON: ") + e.what()});
  }
  if (auto items = j.find("items"); j.is_object() && items != j.end() && items->is_array()) {
    for (auto& item : *items) {
      auto file = item.find("saliency_file");
      if (!item.is_object() || file == item.end()) continue;
      const auto grid_path = path.parent_path() / file->get<std::string>();
      std::ifstream g(grid_path);
      if (!g) throw ValidationError({"cannot read saliency file '" + grid_path.string() + "'"});
      try {
        const auto map = read_saliency_grid(g);
        item["saliency"] = {{"width", map.width()},
                            {"height", map.height()},
                            {"values", std::vector<double>(map.values().begin(), map.values().end())}};
      } catch (const SaliencyError& e) {
        throw ValidationError({grid_path.string() + ": " + e.what()});
      }
      item.erase("saliency_file");
    }
  }
  return study_config_from_json(j);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavioral trust measurement for explainable-AI reviews", "xaitrust"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run simulated reviewers against an outcome stream");
  simulate_cmd->add_option("--archetype", sim.archetype, "perfect, entrusted, suspicious or all (default)");
  simulate_cmd->add_option("--p-correct", sim.p_correct, "P(trust | correct prediction)")->check(CLI::Range(0.0, 1.0));
  simulate_cmd->add_option("--p-incorrect", sim.p_incorrect, "P(trust | incorrect prediction)")->check(CLI::Range(0.0, 1.0));
  simulate_cmd->add_option("--correct", sim.n_correct, "number of correct predictions");
  simulate_cmd->add_option("--incorrect", sim.n_incorrect, "number of incorrect predictions");
  simulate_cmd->add_option("--confusion", sim.confusion, "multi-class confusion matrix CSV ('-' for stdin)");
  simulate_cmd->add_option("--predictions", sim.predictions, "per-item prediction log CSV ('-' for stdin)");
  simulate_cmd->add_option("--seed", sim.seed, "random seed");
  simulate_cmd->add_option("--output", sim.output, "write the simulated decisions as an event log");
  simulate_cmd->add_option("--format", sim.format, "output format")
      ->transform(CLI::CheckedTransformer(kFormats))
      ->option_text("table|csv|json");

  LogArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Report trust metrics from a study event log");
  analyze_cmd->add_option("log", analyze.log, "event log ('-' for stdin)")->required();
  analyze_cmd->add_option("--study", analyze.study, "study id when the log holds several");
  analyze_cmd->add_option("--user", analyze.user, "only this user's decisions");
  analyze_cmd->add_flag("--shared-only", analyze.shared_only, "only items shown to every user");
  analyze_cmd->add_option("--threshold", analyze.threshold, "only decisions at this threshold");
  analyze_cmd->add_option("--format", analyze.format, "output format")
      ->transform(CLI::CheckedTransformer(kFormats))
      ->option_text("table|csv|json");

  LogArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Per-threshold metrics as CSV");
  sweep_cmd->add_option("log", sweep.log, "event log ('-' for stdin)")->required();
  sweep_cmd->add_option("--study", sweep.study, "study id when the log holds several");
  sweep_cmd->add_option("--user", sweep.user, "only this user's decisions");
  sweep_cmd->add_flag("--shared-only", sweep.shared_only, "only items shown to every user");
  sweep_cmd->add_option("--output,-o", sweep.output, "CSV destination (default stdout)");

  MaskArgs masks;
  auto* masks_cmd = app.add_subcommand("masks", "Binarize a saliency grid at several thresholds");
  masks_cmd->add_option("grid", masks.grid, "saliency grid file ('-' for stdin)")->required();
  masks_cmd->add_option("--thresholds", masks.thresholds, "thresholds in [0,1]")->delimiter(',');
  masks_cmd->add_option("--out-dir", masks.out_dir, "write one mask file per threshold here");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation study HTTP service");
  serve_cmd->add_option("--host", serve.host, "bind address");
  serve_cmd->add_option("--port", serve.port, "listen port");
  serve_cmd->add_option("--config", serve.configs, "study config JSON to create at startup");
  serve_cmd->add_option("--images", serve.images, std::string("static image directory (env ") + kImageDirEnv + ")");
  serve_cmd->add_option("--log-dir", serve.log_dir, std::string("event log directory (env ") + kLogDirEnv + ")");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim, out, err);
    if (*analyze_cmd) return cmd_analyze(analyze, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep, out, err);
    if (*masks_cmd) return cmd_masks(masks, out, err);
    if (*serve_cmd) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace xtrust::cli
