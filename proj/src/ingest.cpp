#include "xaitrust/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <iterator>
#include <set>
#include <sstream>

namespace xtrust {

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(column ? "line " + std::to_string(line) + ", column " +
                                      std::to_string(column) + ": " + message
                                : "line " + std::to_string(line) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

std::string read_all(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::size_t i = 0;
  for (;;) {
    std::string cell;
    std::size_t start = i;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i < line.size() && line[i] == '"') {
      ++i;
      for (;;) {
        if (i >= line.size())
          throw ParseError(line_no, cells.size() + 1, "unterminated quoted field");
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cell += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        cell += line[i++];
      }
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i < line.size() && line[i] != ',')
        throw ParseError(line_no, cells.size() + 1, "unexpected text after quoted field");
    } else {
      i = start;
      std::size_t end = line.find(',', i);
      if (end == std::string_view::npos) end = line.size();
      cell = std::string(trim(line.substr(i, end - i)));
      i = end;
    }
    cells.push_back(std::move(cell));
    if (i >= line.size()) break;
    ++i;  // comma
  }
  return cells;
}

// Splits into non-blank rows. Blank lines are skipped.
std::vector<CsvRow> read_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    rows.push_back({line_no, split_csv_line(line, line_no)});
  }
  return rows;
}

std::string quote_csv(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos && trim(cell).size() == cell.size())
    return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

// ---------------------------------------------------------------------------
// Confusion matrices
// ---------------------------------------------------------------------------

std::uint64_t MultiClassConfusion::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::uint64_t MultiClassConfusion::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

MultiClassConfusion parse_confusion(std::string_view text) {
  const auto rows = read_csv(text);
  if (rows.empty()) throw ParseError(1, 0, "empty confusion matrix");

  MultiClassConfusion m;
  const auto& header = rows.front();
  if (header.cells.size() < 3)
    throw ParseError(header.line, 0, "confusion matrix needs at least two classes");
  m.corner = header.cells.front();
  std::set<std::string> seen;
  for (std::size_t c = 1; c < header.cells.size(); ++c) {
    const auto& label = header.cells[c];
    if (label.empty()) throw ParseError(header.line, c + 1, "empty class label");
    if (!seen.insert(label).second)
      throw ParseError(header.line, c + 1, "duplicate label '" + label + "'");
    m.labels.push_back(label);
  }

  const std::size_t n = m.labels.size();
  if (rows.size() - 1 != n)
    throw ParseError(rows.back().line, 0,
                     "non-square confusion matrix: " + std::to_string(n) + " columns, " +
                         std::to_string(rows.size() - 1) + " rows");

  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    if (row.cells.size() != n + 1)
      throw ParseError(row.line, 0,
                       "non-square confusion matrix: row has " +
                           std::to_string(row.cells.size() - 1) + " counts, expected " +
                           std::to_string(n));
    if (row.cells.front() != m.labels[r]) {
      if (seen.count(row.cells.front()) &&
          std::find(m.labels.begin(), m.labels.begin() + r, row.cells.front()) != m.labels.begin() + r)
        throw ParseError(row.line, 1, "duplicate label '" + row.cells.front() + "'");
      throw ParseError(row.line, 1, "row label '" + row.cells.front() +
                                        "' does not match column label '" + m.labels[r] + "'");
    }
    std::vector<std::uint64_t> counts;
    counts.reserve(n);
    for (std::size_t c = 1; c <= n; ++c) {
      const auto& cell = row.cells[c];
      std::uint64_t value = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError(row.line, c + 1,
                         "cell '" + cell + "' is not a non-negative integer count");
      counts.push_back(value);
    }
    m.counts.push_back(std::move(counts));
  }
  return m;
}

MultiClassConfusion parse_confusion(std::istream& in) { return parse_confusion(read_all(in)); }

std::string serialize_confusion(const MultiClassConfusion& m) {
  std::string out = quote_csv(m.corner);
  for (const auto& l : m.labels) out += "," + quote_csv(l);
  out += '\n';
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    out += quote_csv(m.labels[r]);
    for (auto c : m.counts[r]) out += "," + std::to_string(c);
    out += '\n';
  }
  return out;
}

CollapsedCounts collapse(const MultiClassConfusion& m) {
  const auto trace = m.trace();
  return {trace, m.total() - trace};
}

OutcomeStream to_stream(const CollapsedCounts& counts, std::string source_label) {
  return stream_from_counts(counts.n_correct, counts.n_incorrect, std::move(source_label));
}

// ---------------------------------------------------------------------------
// Prediction logs
// ---------------------------------------------------------------------------

PredictionLog parse_prediction_log(std::string_view text) {
  const auto rows = read_csv(text);
  if (rows.empty()) throw ParseError(1, 0, "missing header row");
  const auto& header = rows.front();
  std::optional<std::size_t> col_item, col_true, col_pred, col_score;
  for (std::size_t c = 0; c < header.cells.size(); ++c) {
    const auto& name = header.cells[c];
    auto bind = [&](std::optional<std::size_t>& slot) {
      if (slot) throw ParseError(header.line, c + 1, "duplicate column '" + name + "'");
      slot = c;
    };
    if (name == "item_id") bind(col_item);
    else if (name == "true_label") bind(col_true);
    else if (name == "predicted_label") bind(col_pred);
    else if (name == "score") bind(col_score);
  }
  for (auto [slot, name] : {std::pair{&col_item, "item_id"}, std::pair{&col_true, "true_label"},
                            std::pair{&col_pred, "predicted_label"}})
    if (!*slot) throw ParseError(header.line, 0, std::string("missing column '") + name + "'");

  PredictionLog log;
  log.stream.source_label = "predictions";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.cells.size() != header.cells.size())
      throw ParseError(row.line, 0, "row has " + std::to_string(row.cells.size()) +
                                        " fields, header has " + std::to_string(header.cells.size()));
    PredictionLogEntry e;
    e.item_id = row.cells[*col_item];
    e.true_label = row.cells[*col_true];
    e.predicted_label = row.cells[*col_pred];
    if (e.item_id.empty()) throw ParseError(row.line, *col_item + 1, "empty item_id");
    if (e.true_label.empty()) throw ParseError(row.line, *col_true + 1, "empty true_label");
    if (e.predicted_label.empty())
      throw ParseError(row.line, *col_pred + 1, "empty predicted_label");
    if (col_score && !row.cells[*col_score].empty()) {
      const auto& s = row.cells[*col_score];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(row.line, *col_score + 1, "score '" + s + "' is not a number");
      e.score = v;
    }
    log.stream.outcomes.push_back(e.outcome());
    log.entries.push_back(std::move(e));
  }
  return log;
}

PredictionLog parse_prediction_log(std::istream& in) { return parse_prediction_log(read_all(in)); }

// ---------------------------------------------------------------------------
// Event logs
// ---------------------------------------------------------------------------

const StudyLedger& LoadedLog::only_study() const {
  if (studies.size() != 1)
    throw std::runtime_error("log holds " + std::to_string(studies.size()) +
                             " studies; select one");
  return studies.begin()->second;
}

LoadedLog load_event_log(std::string_view text, const LoadOptions& options) {
  LoadedLog out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::variant<Event, UnknownEvent> parsed;
    try {
      parsed = parse_event(line);
    } catch (const EventParseError& e) {
      if (!terminated) {
        if (options.tolerate_truncated_tail) {
          out.warnings.push_back("dropped unterminated event at line " + std::to_string(line_no));
          break;
        }
        throw ParseError(line_no, 0, "unterminated event at line " + std::to_string(line_no));
      }
      throw ParseError(line_no, 0, std::string("malformed event: ") + e.what());
    }
    if (auto* unknown = std::get_if<UnknownEvent>(&parsed)) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": skipped unknown event kind '" +
                             unknown->kind + "' (schema v" + std::to_string(unknown->version) + ")");
      continue;
    }
    const auto& event = std::get<Event>(parsed);
    const auto& study = event_study_id(event);
    try {
      if (const auto* created = std::get_if<StudyCreatedEvent>(&event)) {
        if (out.studies.count(study))
          throw std::invalid_argument("study '" + study + "' created twice");
        out.studies.emplace(study, StudyLedger(*created));
        out.study_order.push_back(study);
        continue;
      }
      auto it = out.studies.find(study);
      if (it == out.studies.end())
        throw std::invalid_argument("event for study '" + study + "' before its study_created");
      const auto before = it->second.records().size();
      it->second.apply(event);
      if (it->second.records().size() > before) out.records.push_back(it->second.records().back());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, 0, e.what());
    }
  }
  return out;
}

LoadedLog load_event_log(std::istream& in, const LoadOptions& options) {
  return load_event_log(read_all(in), options);
}

SessionLogParse parse_session_log(std::string_view text) {
  auto loaded = load_event_log(text);
  return {std::move(loaded.records), std::move(loaded.warnings)};
}

SessionLogParse parse_session_log(std::istream& in) { return parse_session_log(read_all(in)); }

}  // namespace xtrust
