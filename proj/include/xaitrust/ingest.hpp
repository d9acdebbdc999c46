#pragma once

// Parsers for external inputs: multi-class confusion matrices, per-item
// prediction logs and study event logs.
//
// CSV conventions: UTF-8, comma delimiter, LF or CRLF line ends, optional
// trailing newline, optional double-quoted fields. Whitespace around a cell
// is not significant.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xaitrust/archetypes.hpp"
#include "xaitrust/study.hpp"
#include "xaitrust/trust_core.hpp"

namespace xtrust {

// Location is 1-based; column 0 means "whole line".
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

// counts[i][j]: items of true class labels[i] predicted as labels[j].
struct MultiClassConfusion {
  std::string corner;  // top-left header cell, kept for round-tripping
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t total() const;
  std::uint64_t trace() const;
  bool operator==(const MultiClassConfusion&) const = default;
};

// Header row holds the predicted classes, first column the true classes, in
// the same order. The matrix must be square with at least two classes.
MultiClassConfusion parse_confusion(std::string_view text);
MultiClassConfusion parse_confusion(std::istream& in);
std::string serialize_confusion(const MultiClassConfusion& m);

struct CollapsedCounts {
  std::uint64_t n_correct = 0;
  std::uint64_t n_incorrect = 0;
  bool operator==(const CollapsedCounts&) const = default;
};

// Any correct class counts as correct: the diagonal against everything else.
CollapsedCounts collapse(const MultiClassConfusion& m);
OutcomeStream to_stream(const CollapsedCounts& counts, std::string source_label);

struct PredictionLogEntry {
  std::string item_id;
  std::string true_label;
  std::string predicted_label;
  std::optional<double> score;

  PredictionOutcome outcome() const {
    return true_label == predicted_label ? PredictionOutcome::Correct : PredictionOutcome::Incorrect;
  }
};

struct PredictionLog {
  std::vector<PredictionLogEntry> entries;
  OutcomeStream stream;  // same order as entries
};

// Header must name item_id, true_label and predicted_label; score is optional.
PredictionLog parse_prediction_log(std::string_view text);
PredictionLog parse_prediction_log(std::istream& in);

// Fold of a whole event log, possibly holding several studies.
struct LoadedLog {
  std::map<std::string, StudyLedger> studies;
  std::vector<std::string> study_order;
  std::vector<TrustRecord> records;  // every decision, in log order
  std::vector<std::string> warnings;

  const StudyLedger& only_study() const;  // throws if not exactly one study
};

struct LoadOptions {
  // Drop an incomplete final line (a write interrupted before it was
  // acknowledged) with a warning instead of failing.
  bool tolerate_truncated_tail = false;
};

// Throws ParseError carrying the offending line number.
LoadedLog load_event_log(std::string_view text, const LoadOptions& options = {});
LoadedLog load_event_log(std::istream& in, const LoadOptions& options = {});

struct SessionLogParse {
  std::vector<TrustRecord> records;
  std::vector<std::string> warnings;
};

SessionLogParse parse_session_log(std::istream& in);
SessionLogParse parse_session_log(std::string_view text);

std::string read_all(std::istream& in);

}  // namespace xtrust
