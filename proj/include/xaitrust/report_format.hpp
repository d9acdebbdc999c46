#pragma once

// Rendering of trust reports. The JSON form is shared by the HTTP service and
// the CLI so both emit the same numbers byte for byte.

#include <map>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "xaitrust/study.hpp"
#include "xaitrust/trust_core.hpp"

namespace xtrust {

nlohmann::ordered_json report_to_json(const TrustMetricsReport& r);
nlohmann::ordered_json filter_to_json(const ReportFilter& f);

// Side-by-side table, one column per report: TT, UF, UT, TF, Precision,
// Recall, F1-Score, then the Lai & Tan baseline. Degenerate ratios are marked
// with '*' and explained in a footnote.
std::string render_table(const std::vector<std::pair<std::string, TrustMetricsReport>>& columns);

std::string csv_header();
std::string csv_row(const TrustMetricsReport& r);

// threshold,precision,recall,f1,lai_tan,tt,ut,tf,uf; one row per threshold.
std::string render_sweep_csv(const std::map<double, TrustMetricsReport>& sweep);

// Shortest text that parses back to the same double.
std::string format_real(double v);

}  // namespace xtrust
