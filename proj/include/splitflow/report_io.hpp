#pragma once

// Machine and human renderings of study reports. Angles are radians in
// JSON and CSV, degrees in text.

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "splitflow/montecarlo.hpp"

namespace splitflow {

using Json = nlohmann::ordered_json;

Json to_json(const UncertaintySpec& spec);
Json to_json(const ConfInterval& ci);
Json to_json(const SolverOptions& opts);
Json to_json(const LimitSpec& limits);

/// Report as JSON. Excludes the worker count and anything timing-related,
/// so the text is identical for any number of workers.
Json report_to_json(const StudyReport& report);
std::string report_json_text(const StudyReport& report);

/// Aligned headline table: class, count, estimate and both intervals (percent).
void write_report_text(const StudyReport& report, std::ostream& out);

/// index,outcome,used_tx_stepping,iterations,<probe labels...>
void write_samples_csv(const StudyReport& report, std::ostream& out);

/// probe,bin_left,bin_right,<count per class...>,<density per class...>,density_total
void write_histograms_csv(const StudyReport& report, std::ostream& out);

}  // namespace splitflow
