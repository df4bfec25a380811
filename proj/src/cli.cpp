#include "splitflow/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

namespace splitflow::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

// ---------------------------------------------------------------------------
// Value parsing shared by the config file and flags

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty()) {
        throw ConfigError("bad value '" + text + "' for " + key);
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("bad boolean '" + text + "' for " + key);
}

Format parse_format(const std::string& text) {
    if (text == "text") return Format::Text;
    if (text == "json") return Format::Json;
    if (text == "csv") return Format::Csv;
    throw ConfigError("unknown format '" + text + "' (expected text, json or csv)");
}

ConfidenceLevel parse_level(const std::string& text) {
    if (text == "95") return ConfidenceLevel::CL95;
    if (text == "99") return ConfidenceLevel::CL99;
    throw ConfigError("confidence level must be 95 or 99, got '" + text + "'");
}

/// "angular_unstable:99:0.005"
CiTarget parse_ci_target(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError("CI target must look like class:level:half_width");
    const auto kind = outcome_from_string(parts[0]);
    if (!kind) throw ConfigError("unknown outcome class '" + parts[0] + "'");
    return {*kind, parse_level(parts[1]), parse_number<double>("ci_target", parts[2])};
}

/// Outages separated by spaces or commas: "B130-131 B131-144".
OutageSet parse_outage_set(const std::string& text) {
    OutageSet set;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        try {
            set.push_back(parse_outage_label(token));
        } catch (const CaseError& e) {
            throw ConfigError(std::string("bad outage: ") + e.what());
        }
        token.clear();
    };
    for (const char ch : text) {
        if (ch == ' ' || ch == ',' || ch == '\t') {
            flush();
        } else {
            token += ch;
        }
    }
    flush();
    if (set.empty()) throw ConfigError("empty outage set");
    return set;
}

std::vector<Probe> parse_probes(const std::vector<std::string>& items) {
    std::vector<Probe> out;
    for (const auto& s : items) {
        try {
            out.push_back(Probe::parse(s));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config file

void apply_item(const std::string& section, const std::string& key,
                const std::vector<std::string>& values, RunConfig& cfg) {
    const std::string full = section + "." + key;
    auto one = [&]() -> const std::string& {
        if (values.size() != 1) throw ConfigError(full + " expects a single value");
        return values.front();
    };
    auto num = [&]<typename T>(T& target) { target = parse_number<T>(full, one()); };
    auto flag = [&](bool& target) { target = parse_bool(full, one()); };

    if (section == "case") {
        if (key == "path") return void(cfg.case_path = one());
    } else if (section == "solver") {
        auto& s = cfg.solver;
        if (key == "tol") return num(s.tol);
        if (key == "max_iter") return num(s.max_iter);
        if (key == "v_limit_delta") return num(s.v_limit_delta);
        if (key == "tx_stepping") return flag(s.tx_stepping);
        if (key == "tx_steps") return num(s.tx_steps);
        if (key == "tx_g_init") return num(s.tx_g_init);
        if (key == "tx_g_last") return num(s.tx_g_last);
        if (key == "enforce_q_limits") return flag(s.enforce_q_limits);
        if (key == "q_toggle_cap") return num(s.q_toggle_cap);
        if (key == "q_tol") return num(s.q_tol);
        if (key == "tx_schedule") {
            const auto& v = one();
            if (v == "geometric") return void(s.tx_schedule = TxSchedule::Geometric);
            if (v == "linear") return void(s.tx_schedule = TxSchedule::Linear);
            throw ConfigError("tx_schedule must be geometric or linear");
        }
    } else if (section == "limits") {
        auto& l = cfg.limits;
        if (key == "angle_max_deg") {
            double deg = 0.0;
            num(deg);
            return void(l.angle_max = deg * kDegree);
        }
        if (key == "v_min") return void(l.v_min = parse_number<double>(full, one()));
        if (key == "v_max") return void(l.v_max = parse_number<double>(full, one()));
        if (key == "enforce_v_band") return flag(l.enforce_v_band);
        if (key == "enforce_branch_rating") return flag(l.enforce_branch_rating);
    } else if (section == "uncertainty") {
        auto& u = cfg.uncertainty;
        if (key == "distribution") {
            const auto& v = one();
            if (v == "normal") return void(u.distribution = Distribution::Normal);
            if (v == "uniform") return void(u.distribution = Distribution::Uniform);
            throw ConfigError("distribution must be normal or uniform");
        }
        if (key == "width_pct") return num(u.width_pct);
        if (key == "buses") {
            u.buses.clear();
            for (const auto& v : values) u.buses.push_back(parse_number<BusId>(full, v));
            u.scope = u.buses.empty() ? LoadScope::AllLoads : LoadScope::BusList;
            return;
        }
    } else if (section == "study") {
        auto& s = cfg.study;
        if (key == "samples") return num(s.max_samples);
        if (key == "seed") return num(s.seed);
        if (key == "workers") return num(s.workers);
        if (key == "check_every") return num(s.check_every);
        if (key == "warm_start") return flag(s.warm_start);
        if (key == "probes") return void(s.probes = parse_probes(values));
        if (key == "ci_target") return void(s.ci_target = parse_ci_target(one()));
    } else if (section == "contingency") {
        auto& c = cfg.contingency;
        if (key == "n1_generators") return num(c.n1_generators);
        if (key == "n2_generators") return num(c.n2_generators);
        if (key == "n1_branches") return num(c.n1_branches);
        if (key == "gen_branch_generators") return num(c.gen_branch_generators);
        if (key == "gen_branch_branches") return num(c.gen_branch_branches);
        if (key == "outages") {
            c.explicit_sets.clear();
            for (const auto& v : values) c.explicit_sets.push_back(parse_outage_set(v));
            return;
        }
    } else if (section == "output") {
        if (key == "dir") return void(cfg.out_dir = fs::path(one()));
        if (key == "format") return void(cfg.format = parse_format(one()));
        if (key == "trace") return void(cfg.trace_path = one());
    }
    throw ConfigError("unknown config key '" + full + "'");
}

// ---------------------------------------------------------------------------
// Output helpers

fs::path resolve_out_dir(const RunConfig& cfg) {
    if (cfg.out_dir) return *cfg.out_dir;
    if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
    return "splitflow_out";
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!content.empty() && content.back() != '\n') f << '\n';
}

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream s;
    fn(s);
    return s.str();
}

std::string format_name(Format f) {
    switch (f) {
        case Format::Text: return "text";
        case Format::Json: return "json";
        case Format::Csv: return "csv";
    }
    return "text";
}

NetworkCase load_case(const RunConfig& cfg) {
    if (cfg.case_path.empty()) throw ConfigError("no case given (use --case or [case] path)");
    return load_matpower_file(cfg.case_path);
}

void check_options(const RunConfig& cfg) {
    try {
        cfg.solver.check();
        cfg.limits.check();
        cfg.study.check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

Json solution_json(const NetworkCase& c, const PFSolution& sol, const OperatingClass& cls) {
    Json j;
    j["case"] = c.name;
    j["base_mva"] = c.base_mva;
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    j["used_tx_stepping"] = sol.used_tx_stepping;
    j["residual_norm"] = sol.residual_norm;
    j["diagnostic"] = sol.diagnostic;
    j["class"] = to_string(cls.kind);
    j["angle_unit"] = "rad";
    Json buses = Json::array();
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const Complex v = sol.state.voltage(i);
        buses.push_back({{"id", c.buses[i].id}, {"vm", std::abs(v)}, {"va", std::arg(v)}});
    }
    j["buses"] = buses;
    Json gens = Json::array();
    if (sol.converged) {
        for (const auto& g : generator_outputs(c, sol)) {
            gens.push_back({{"index", g.index}, {"bus", g.bus}, {"p", g.p}, {"q", g.q}});
        }
    }
    j["generators"] = gens;
    Json clamped = Json::array();
    for (const auto& s : sol.q_limit_switches) {
        clamped.push_back({{"bus", s.bus}, {"at", s.side == QLimitSide::QMax ? "q_max" : "q_min"}});
    }
    j["q_limited"] = clamped;
    return j;
}

void solution_text(const NetworkCase& c, const PFSolution& sol, const OperatingClass& cls,
                   std::ostream& out) {
    out << "case " << c.name << ": " << (sol.converged ? "converged" : "NOT converged") << " in "
        << sol.iterations << " iterations, mismatch " << sol.residual_norm
        << (sol.used_tx_stepping ? ", via Tx-stepping" : "") << "\n";
    if (!sol.converged) {
        out << sol.diagnostic << "\n";
        return;
    }
    out << "class: " << to_string(cls.kind) << "\n";
    for (const auto& s : sol.q_limit_switches) {
        out << "bus " << s.bus << " held at " << (s.side == QLimitSide::QMax ? "q_max" : "q_min")
            << "\n";
    }
    out << "angles in degrees, powers in MW / MVAr\n";
    out << std::setw(8) << "bus" << std::setw(12) << "|V| [pu]" << std::setw(14) << "angle [deg]"
        << "\n";
    out << std::fixed;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const Complex v = sol.state.voltage(i);
        out << std::setw(8) << c.buses[i].id << std::setw(12) << std::setprecision(6) << std::abs(v)
            << std::setw(14) << std::setprecision(4) << std::arg(v) / kDegree << "\n";
    }
    out << std::setw(8) << "gen bus" << std::setw(12) << "P [MW]" << std::setw(14) << "Q [MVAr]"
        << "\n";
    for (const auto& g : generator_outputs(c, sol)) {
        out << std::setw(8) << g.bus << std::setw(12) << std::setprecision(3) << g.p * c.base_mva
            << std::setw(14) << g.q * c.base_mva << "\n";
    }
    out << std::defaultfloat;
}

void classes_csv(const StudyReport& r, std::ostream& out) {
    out << "class,count,p_hat,ci95_lower,ci95_upper,ci99_lower,ci99_upper\n";
    for (const auto& c : r.classes) {
        out << to_string(c.kind) << "," << c.count << "," << c.p_hat << "," << c.ci95.lower << ","
            << c.ci95.upper << "," << c.ci99.lower << "," << c.ci99.upper << "\n";
    }
}

// ---------------------------------------------------------------------------
// Flag definitions

struct Flags {
    std::string positional_case;
    std::string case_path;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<double> sigma_pct;
    std::optional<double> uniform_pct;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::string> format;
    bool no_txstep = false;
    bool no_qlim = false;
    std::optional<double> angle_max_deg;
    std::optional<double> vmin;
    std::optional<double> vmax;
    std::optional<std::string> trace;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::vector<std::string> probes;
    std::optional<std::string> ci_target;
    std::vector<BusId> buses;
    bool no_warm_start = false;
    std::optional<std::size_t> n1_gen;
    std::optional<std::size_t> n2_gen;
    std::optional<std::size_t> n1_branch;
    std::optional<std::size_t> gen_branch_gens;
    std::optional<std::size_t> gen_branch_branches;
    std::vector<std::string> outages;
    std::string start = "case";
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("case_file", f.positional_case, "MATPOWER case file");
    app->add_option("--case", f.case_path, "MATPOWER case file");
    app->add_option("--config", f.config, "INI config file; flags override it");
    app->add_option("--out", f.out, "output directory (default: $SPLITFLOW_OUT_DIR or ./splitflow_out)");
    app->add_option("--format", f.format, "stdout format: text, json or csv")
        ->check(CLI::IsMember({"text", "json", "csv"}));
    app->add_flag("--no-txstep", f.no_txstep, "disable the Tx-stepping fallback");
    app->add_flag("--no-qlim", f.no_qlim, "do not enforce generator reactive limits");
    app->add_option("--angle-max-deg", f.angle_max_deg, "angular stability limit, degrees");
    app->add_option("--vmin", f.vmin, "voltage band lower bound for every bus, pu");
    app->add_option("--vmax", f.vmax, "voltage band upper bound for every bus, pu");
    app->add_option("--trace", f.trace, "write the per-iteration solver log to this file");
    app->add_option("--tol", f.tol, "mismatch tolerance, pu");
    app->add_option("--max-iter", f.max_iter, "Newton iteration cap");
}

void add_study(CLI::App* app, Flags& f) {
    app->add_option("--seed", f.seed, "64-bit study seed");
    app->add_option("--samples", f.samples, "maximum number of samples");
    auto* sigma = app->add_option("--sigma-pct", f.sigma_pct, "normal load spread, % of nominal");
    auto* uni = app->add_option("--uniform-pct", f.uniform_pct, "uniform load range, +/- % of nominal");
    sigma->excludes(uni);
    app->add_option("--workers", f.workers, "parallel workers");
    app->add_option("--probe", f.probes, "record V<bus> or A<from>-<to> for histograms");
    app->add_option("--ci-target", f.ci_target, "stop rule class:level:half_width");
    app->add_option("--buses", f.buses, "perturb only loads on these buses");
    app->add_flag("--no-warm-start", f.no_warm_start, "solve every sample from flat start");
}

RunConfig merge(const Flags& f) {
    RunConfig cfg;
    if (!f.config.empty()) apply_config_file(f.config, cfg);
    if (!f.case_path.empty() && !f.positional_case.empty() && f.case_path != f.positional_case) {
        throw ConfigError("case given twice with different paths");
    }
    if (!f.case_path.empty()) cfg.case_path = f.case_path;
    if (!f.positional_case.empty()) cfg.case_path = f.positional_case;
    if (f.out) cfg.out_dir = fs::path(*f.out);
    if (f.format) cfg.format = parse_format(*f.format);
    if (f.trace) cfg.trace_path = *f.trace;
    if (f.no_txstep) cfg.solver.tx_stepping = false;
    if (f.no_qlim) cfg.solver.enforce_q_limits = false;
    if (f.tol) cfg.solver.tol = *f.tol;
    if (f.max_iter) cfg.solver.max_iter = *f.max_iter;
    if (f.angle_max_deg) cfg.limits.angle_max = *f.angle_max_deg * kDegree;
    if (f.vmin) cfg.limits.v_min = *f.vmin;
    if (f.vmax) cfg.limits.v_max = *f.vmax;
    if (f.seed) cfg.study.seed = *f.seed;
    if (f.samples) cfg.study.max_samples = *f.samples;
    if (f.workers) cfg.study.workers = *f.workers;
    if (f.sigma_pct) cfg.uncertainty = UncertaintySpec::normal(*f.sigma_pct);
    if (f.uniform_pct) cfg.uncertainty = UncertaintySpec::uniform(*f.uniform_pct);
    if (!f.buses.empty()) {
        cfg.uncertainty.scope = LoadScope::BusList;
        cfg.uncertainty.buses = f.buses;
    }
    if (!f.probes.empty()) cfg.study.probes = parse_probes(f.probes);
    if (f.ci_target) cfg.study.ci_target = parse_ci_target(*f.ci_target);
    if (f.no_warm_start) cfg.study.warm_start = false;
    if (f.n1_gen) cfg.contingency.n1_generators = *f.n1_gen;
    if (f.n2_gen) cfg.contingency.n2_generators = *f.n2_gen;
    if (f.n1_branch) cfg.contingency.n1_branches = *f.n1_branch;
    if (f.gen_branch_gens) cfg.contingency.gen_branch_generators = *f.gen_branch_gens;
    if (f.gen_branch_branches) cfg.contingency.gen_branch_branches = *f.gen_branch_branches;
    if (!f.outages.empty()) {
        cfg.contingency.explicit_sets.clear();
        for (const auto& o : f.outages) cfg.contingency.explicit_sets.push_back(parse_outage_set(o));
    }
    return cfg;
}

}  // namespace

void apply_config_file(const fs::path& path, RunConfig& cfg) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (item.parents.size() != 1) {
            throw ConfigError("config key '" + item.fullname() + "' is outside a known section");
        }
        apply_item(item.parents.front(), item.name, item.inputs, cfg);
    }
}

Json run_echo(const RunConfig& cfg, const std::string& command) {
    Json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["case"] = cfg.case_path;
    j["solver"] = to_json(cfg.solver);
    j["limits"] = to_json(cfg.limits);
    j["uncertainty"] = to_json(cfg.uncertainty);
    Json study;
    study["seed"] = cfg.study.seed;
    study["samples"] = cfg.study.max_samples;
    study["workers"] = cfg.study.workers;
    study["check_every"] = cfg.study.check_every;
    study["warm_start"] = cfg.study.warm_start;
    Json probes = Json::array();
    for (const auto& p : cfg.study.probes) probes.push_back(p.label());
    study["probes"] = probes;
    if (cfg.study.ci_target) {
        const auto& t = *cfg.study.ci_target;
        study["ci_target"] = to_string(t.outcome) + ":" + to_string(t.level) + ":" +
                             std::to_string(t.half_width);
    } else {
        study["ci_target"] = nullptr;
    }
    j["study"] = study;
    const auto& c = cfg.contingency;
    Json cont;
    cont["n1_generators"] = c.n1_generators;
    cont["n2_generators"] = c.n2_generators;
    cont["n1_branches"] = c.n1_branches;
    cont["gen_branch_generators"] = c.gen_branch_generators;
    cont["gen_branch_branches"] = c.gen_branch_branches;
    Json sets = Json::array();
    for (const auto& s : c.explicit_sets) sets.push_back(outage_set_label(s));
    cont["outages"] = sets;
    j["contingency"] = cont;
    j["format"] = format_name(cfg.format);
    j["angle_units"] = "radians in JSON and CSV, degrees in text";
    return j;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    check_options(cfg);
    const NetworkCase c = load_case(cfg);
    std::ostringstream trace;
    SolverOptions opts = cfg.solver;
    opts.trace = &trace;
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    const PFSolution sol = session.robust(circuit, circuit.case_start());
    const OperatingClass cls = classify(c, sol, cfg.limits);

    if (cfg.trace_path) write_file(*cfg.trace_path, trace.str());
    if (cfg.out_dir) {
        write_file(*cfg.out_dir / "solution.json", solution_json(c, sol, cls).dump(2));
        write_file(*cfg.out_dir / "run.json", run_echo(cfg, "solve").dump(2));
    }

    switch (cfg.format) {
        case Format::Text: solution_text(c, sol, cls, out); break;
        case Format::Json: out << solution_json(c, sol, cls).dump(2) << "\n"; break;
        case Format::Csv:
            out << "bus,vm,va_rad\n" << std::setprecision(12);
            for (std::size_t i = 0; i < c.buses.size(); ++i) {
                const Complex v = sol.state.voltage(i);
                out << c.buses[i].id << "," << std::abs(v) << "," << std::arg(v) << "\n";
            }
            break;
    }
    if (!sol.converged) {
        fs::path trace_file;
        if (cfg.trace_path) {
            trace_file = *cfg.trace_path;
        } else {
            trace_file = resolve_out_dir(cfg) / "solve_trace.log";
            write_file(trace_file, trace.str());
        }
        err << "no convergence: " << sol.diagnostic << "\n"
            << "residual trace: " << trace_file.string() << "\n";
        return kExitNoConvergence;
    }
    return kExitOk;
}

int cmd_mc(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    check_options(cfg);
    const NetworkCase c = load_case(cfg);
    StudyReport report;
    try {
        report = run_study(c, cfg.uncertainty, cfg.study, cfg.solver, cfg.limits);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const fs::path dir = resolve_out_dir(cfg);
    write_file(dir / "report.json", report_json_text(report));
    write_file(dir / "report.txt", render([&](std::ostream& s) { write_report_text(report, s); }));
    write_file(dir / "samples.csv", render([&](std::ostream& s) { write_samples_csv(report, s); }));
    if (!report.histograms.empty()) {
        write_file(dir / "histograms.csv",
                   render([&](std::ostream& s) { write_histograms_csv(report, s); }));
    }
    write_file(dir / "run.json", run_echo(cfg, "mc").dump(2));

    switch (cfg.format) {
        case Format::Text: write_report_text(report, out); break;
        case Format::Json: out << report_json_text(report); break;
        case Format::Csv: classes_csv(report, out); break;
    }
    if (!report.base_feasible) {
        err << "base case infeasible: " << report.base_diagnostic << "\n";
        return kExitBaseInfeasible;
    }
    return kExitOk;
}

int cmd_contingency(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    check_options(cfg);
    const NetworkCase c = load_case(cfg);
    std::vector<std::string> warnings;
    std::vector<ContingencyResult> results;
    try {
        results = run_contingency_study(c, cfg.contingency, cfg.uncertainty, cfg.study, cfg.solver,
                                        cfg.limits, &warnings);
    } catch (const BaseCaseInfeasible& e) {
        err << e.what() << "\n";
        return kExitBaseInfeasible;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    const fs::path dir = resolve_out_dir(cfg);
    write_file(dir / "risk_table.json", risk_table_json(results).dump(2));
    write_file(dir / "risk_table.csv",
               render([&](std::ostream& s) { write_risk_table_csv(results, s); }));
    for (const auto& r : results) {
        write_file(dir / "reports" / ("C" + std::to_string(r.ordinal + 1) + ".json"),
                   report_json_text(r.report));
    }
    Json echo = run_echo(cfg, "contingency");
    Json seeds = Json::array();
    for (const auto& r : results) seeds.push_back({{"label", r.label}, {"seed", r.seed}});
    echo["contingency_seeds"] = seeds;
    echo["warnings"] = warnings;
    write_file(dir / "run.json", echo.dump(2));

    switch (cfg.format) {
        case Format::Text: write_risk_table_text(results, out); break;
        case Format::Json: out << risk_table_json(results).dump(2) << "\n"; break;
        case Format::Csv: write_risk_table_csv(results, out); break;
    }
    return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power flow on the split equivalent circuit with Monte Carlo contingency studies",
                 "splitflow"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Flags f;

    auto* solve = app.add_subcommand("solve", "deterministic power flow");
    add_common(solve, f);

    auto* mc = app.add_subcommand("mc", "Monte Carlo study under load uncertainty");
    add_common(mc, f);
    add_study(mc, f);

    auto* cont = app.add_subcommand("contingency", "N-1/N-2 screening with one study per outage set");
    add_common(cont, f);
    add_study(cont, f);
    cont->add_option("--n1-gen", f.n1_gen, "N-1 outages of the biggest generators");
    cont->add_option("--n2-gen", f.n2_gen, "second generator outages per N-1 generator");
    cont->add_option("--n1-branch", f.n1_branch, "N-1 outages of the highest loaded branches");
    cont->add_option("--gen-branch-gens", f.gen_branch_gens, "generators in generator x branch pairs");
    cont->add_option("--gen-branch-branches", f.gen_branch_branches,
                     "branches in generator x branch pairs");
    cont->add_option("--outage", f.outages, "explicit outage set, e.g. \"B130-131 B131-144\"");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        const RunConfig cfg = merge(f);
        if (solve->parsed()) return cmd_solve(cfg, out, err);
        if (mc->parsed()) return cmd_mc(cfg, out, err);
        return cmd_contingency(cfg, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const CaseError& e) {
        err << "case error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitUsage;
}

}  // namespace splitflow::cli
