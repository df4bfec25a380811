#include "splitflow/report_io.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace splitflow {

namespace {

std::string percent(double p) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * p;
    return s.str();
}

std::string csv_number(double v) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return s.str();
}

Json limit_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const UncertaintySpec& spec) {
    Json j;
    j["distribution"] = to_string(spec.distribution);
    j["width_pct"] = spec.width_pct;
    j["scope"] = spec.scope == LoadScope::AllLoads ? "all_loads" : "bus_list";
    j["buses"] = spec.buses;
    return j;
}

Json to_json(const ConfInterval& ci) {
    Json j;
    j["lower"] = ci.lower;
    j["upper"] = ci.upper;
    j["kind"] = to_string(ci.kind);
    j["small_sample"] = ci.small_sample;
    return j;
}

Json to_json(const SolverOptions& o) {
    Json j;
    j["tol"] = o.tol;
    j["max_iter"] = o.max_iter;
    j["v_limit_delta"] = o.v_limit_delta;
    j["tx_stepping"] = o.tx_stepping;
    j["tx_steps"] = o.tx_steps;
    j["tx_g_init"] = o.tx_g_init;
    j["tx_g_last"] = o.tx_g_last;
    j["tx_schedule"] = o.tx_schedule == TxSchedule::Geometric ? "geometric" : "linear";
    j["enforce_q_limits"] = o.enforce_q_limits;
    j["q_toggle_cap"] = o.q_toggle_cap;
    j["q_tol"] = o.q_tol;
    return j;
}

Json to_json(const LimitSpec& l) {
    Json j;
    j["angle_max_rad"] = l.angle_max;
    j["enforce_v_band"] = l.enforce_v_band;
    j["enforce_branch_rating"] = l.enforce_branch_rating;
    j["v_min"] = limit_or_null(l.v_min);
    j["v_max"] = limit_or_null(l.v_max);
    return j;
}

Json report_to_json(const StudyReport& r) {
    Json j;
    j["case"] = r.case_name;
    j["uncertainty"] = to_json(r.spec);
    Json cfg;
    cfg["seed"] = r.config.seed;
    cfg["max_samples"] = r.config.max_samples;
    cfg["check_every"] = r.config.check_every;
    cfg["warm_start"] = r.config.warm_start;
    if (r.config.ci_target) {
        cfg["ci_target"] = {{"outcome", to_string(r.config.ci_target->outcome)},
                            {"level", to_string(r.config.ci_target->level)},
                            {"half_width", r.config.ci_target->half_width}};
    } else {
        cfg["ci_target"] = nullptr;
    }
    Json probes = Json::array();
    for (const auto& p : r.config.probes) probes.push_back(p.label());
    cfg["probes"] = probes;
    j["config"] = cfg;
    j["base_feasible"] = r.base_feasible;
    j["base_diagnostic"] = r.base_diagnostic;
    j["n"] = r.n;
    j["stop_reason"] = to_string(r.stop_reason);
    j["tx_stepping_samples"] = r.tx_stepping_samples;
    Json classes = Json::array();
    for (const auto& c : r.classes) {
        Json cj;
        cj["class"] = to_string(c.kind);
        cj["count"] = c.count;
        cj["p_hat"] = c.p_hat;
        cj["ci95"] = to_json(c.ci95);
        cj["ci99"] = to_json(c.ci99);
        classes.push_back(cj);
    }
    j["classes"] = classes;
    Json hists = Json::array();
    for (const auto& h : r.histograms) {
        Json hj;
        hj["probe"] = h.probe.label();
        hj["unit"] = h.probe.kind == ProbeKind::BranchAngle ? "rad" : "pu";
        hj["edges"] = h.hist.edges;
        Json counts = Json::object();
        for (std::size_t k = 0; k < h.hist.counts.size(); ++k) {
            counts[to_string(static_cast<OutcomeKind>(k))] = h.hist.counts[k];
        }
        hj["counts"] = counts;
        hists.push_back(hj);
    }
    j["histograms"] = hists;
    return j;
}

std::string report_json_text(const StudyReport& report) {
    return report_to_json(report).dump(2) + "\n";
}

void write_report_text(const StudyReport& r, std::ostream& out) {
    out << "case " << r.case_name << ", " << to_string(r.spec.distribution) << " "
        << r.spec.width_pct << "%, seed " << r.config.seed << ", n = " << r.n << " ("
        << to_string(r.stop_reason) << ")\n";
    if (!r.base_feasible) out << "base case infeasible: " << r.base_diagnostic << "\n";
    out << std::left << std::setw(24) << "class" << std::right << std::setw(8) << "count"
        << std::setw(10) << "p_hat[%]" << std::setw(20) << "ci95[%]" << std::setw(20) << "ci99[%]"
        << "\n";
    for (const auto& c : r.classes) {
        const std::string ci95 = "[" + percent(c.ci95.lower) + ", " + percent(c.ci95.upper) + "]";
        const std::string ci99 = "[" + percent(c.ci99.lower) + ", " + percent(c.ci99.upper) + "]";
        out << std::left << std::setw(24) << to_string(c.kind) << std::right << std::setw(8)
            << c.count << std::setw(10) << percent(c.p_hat) << std::setw(20) << ci95
            << std::setw(20) << ci99 << "\n";
    }
    if (r.n > 0 && r.n < 100) out << "note: fewer than 100 samples, intervals are rough\n";
    out << "samples needing Tx-stepping: " << r.tx_stepping_samples << "\n";
}

void write_samples_csv(const StudyReport& r, std::ostream& out) {
    out << "index,outcome,used_tx_stepping,iterations";
    for (const auto& p : r.config.probes) out << "," << p.label();
    out << "\n";
    for (const auto& s : r.samples) {
        out << s.index << "," << to_string(s.outcome.kind) << "," << (s.used_tx_stepping ? 1 : 0)
            << "," << s.iterations;
        for (std::size_t k = 0; k < r.config.probes.size(); ++k) {
            out << ",";
            if (k < s.probe_values.size()) out << csv_number(s.probe_values[k]);
        }
        out << "\n";
    }
}

void write_histograms_csv(const StudyReport& r, std::ostream& out) {
    out << "probe,bin_left,bin_right";
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        out << ",count_" << to_string(static_cast<OutcomeKind>(k));
    }
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        out << ",density_" << to_string(static_cast<OutcomeKind>(k));
    }
    out << ",density_total\n";
    for (const auto& h : r.histograms) {
        for (std::size_t b = 0; b < h.hist.bin_count(); ++b) {
            out << h.probe.label() << "," << csv_number(h.hist.edges[b]) << ","
                << csv_number(h.hist.edges[b + 1]);
            for (std::size_t k = 0; k < kOutcomeCount; ++k) out << "," << h.hist.counts[k][b];
            for (std::size_t k = 0; k < kOutcomeCount; ++k) {
                out << "," << csv_number(h.hist.density(k, b));
            }
            out << "," << csv_number(h.hist.accumulated_density(b)) << "\n";
        }
    }
}

}  // namespace splitflow
