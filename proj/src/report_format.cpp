#include "xaitrust/report_format.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace xtrust {

using nlohmann::ordered_json;

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ordered_json report_to_json(const TrustMetricsReport& r) {
  ordered_json j;
  j["tt"] = r.matrix.tt;
  j["ut"] = r.matrix.ut;
  j["tf"] = r.matrix.tf;
  j["uf"] = r.matrix.uf;
  j["total"] = r.matrix.total();
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["lai_tan"] = r.lai_tan;
  j["degenerate"] = {{"precision", r.degenerate_precision},
                     {"recall", r.degenerate_recall},
                     {"f1", r.degenerate_f1}};
  return j;
}

ordered_json filter_to_json(const ReportFilter& f) {
  ordered_json j;
  j["user"] = f.user_id ? ordered_json(*f.user_id) : ordered_json(nullptr);
  j["shared_only"] = f.shared_only;
  j["threshold"] = f.threshold ? ordered_json(*f.threshold) : ordered_json(nullptr);
  return j;
}

namespace {

std::string fixed(double v, bool degenerate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%s", v, degenerate ? "*" : "");
  return buf;
}

}  // namespace

std::string render_table(const std::vector<std::pair<std::string, TrustMetricsReport>>& columns) {
  std::vector<std::vector<std::string>> rows = {{"Metric"}, {"TT"},     {"UF"},       {"UT"},
                                                {"TF"},     {"Precision"}, {"Recall"}, {"F1-Score"},
                                                {"Lai & Tan"}};
  bool any_degenerate = false;
  for (const auto& [name, r] : columns) {
    rows[0].push_back(name);
    rows[1].push_back(std::to_string(r.matrix.tt));
    rows[2].push_back(std::to_string(r.matrix.uf));
    rows[3].push_back(std::to_string(r.matrix.ut));
    rows[4].push_back(std::to_string(r.matrix.tf));
    rows[5].push_back(fixed(r.precision, r.degenerate_precision));
    rows[6].push_back(fixed(r.recall, r.degenerate_recall));
    rows[7].push_back(fixed(r.f1, r.degenerate_f1));
    rows[8].push_back(fixed(r.lai_tan, false));
    any_degenerate = any_degenerate || r.degenerate_precision || r.degenerate_recall || r.degenerate_f1;
  }
  std::vector<std::size_t> widths(columns.size() + 1, 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

  std::ostringstream out;
  auto rule = [&] {
    std::size_t n = 0;
    for (auto w : widths) n += w + 2;
    out << std::string(n > 2 ? n - 2 : n, '-') << '\n';
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 1 || i == 8) rule();
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const auto& cell = rows[i][c];
      if (c == 0) {
        out << cell << std::string(widths[c] - cell.size(), ' ');
      } else {
        out << "  " << std::string(widths[c] - cell.size(), ' ') << cell;
      }
    }
    out << '\n';
  }
  if (any_degenerate) out << "* degenerate: zero denominator, reported as 0\n";
  return out.str();
}

std::string csv_header() {
  return "tt,ut,tf,uf,total,precision,recall,f1,lai_tan,degenerate_precision,degenerate_recall,"
         "degenerate_f1";
}

std::string csv_row(const TrustMetricsReport& r) {
  std::ostringstream out;
  out << r.matrix.tt << ',' << r.matrix.ut << ',' << r.matrix.tf << ',' << r.matrix.uf << ','
      << r.matrix.total() << ',' << format_real(r.precision) << ',' << format_real(r.recall) << ','
      << format_real(r.f1) << ',' << format_real(r.lai_tan) << ',' << r.degenerate_precision << ','
      << r.degenerate_recall << ',' << r.degenerate_f1;
  return out.str();
}

std::string render_sweep_csv(const std::map<double, TrustMetricsReport>& sweep) {
  std::string out = "threshold,precision,recall,f1,lai_tan,tt,ut,tf,uf\n";
  for (const auto& [t, r] : sweep) {
    out += format_real(t) + ',' + format_real(r.precision) + ',' + format_real(r.recall) + ',' +
           format_real(r.f1) + ',' + format_real(r.lai_tan) + ',' + std::to_string(r.matrix.tt) +
           ',' + std::to_string(r.matrix.ut) + ',' + std::to_string(r.matrix.tf) + ',' +
           std::to_string(r.matrix.uf) + '\n';
  }
  return out;
}

}  // namespace xtrust
