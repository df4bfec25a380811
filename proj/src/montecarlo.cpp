#include "splitflow/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include "splitflow/linear_solver.hpp"

namespace splitflow {

namespace {

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

BusId parse_bus(std::string_view text, std::string_view whole) {
    BusId id = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("malformed probe '" + std::string(whole) + "'");
    }
    return id;
}

void require_valid(const NetworkCase& c) {
    const auto violations = validate(c);
    if (violations.empty()) return;
    std::string msg = "invalid case:";
    for (const auto& v : violations) msg += " " + v.element + ": " + v.message + ";";
    throw std::invalid_argument(msg);
}

}  // namespace

std::string to_string(Distribution d) { return d == Distribution::Normal ? "normal" : "uniform"; }

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxSamples: return "max_samples";
        case StopReason::CITargetMet: return "ci_target_met";
        case StopReason::BaseInfeasible: return "base_infeasible";
    }
    return "unknown";
}

void UncertaintySpec::check(const NetworkCase& c) const {
    if (!(width_pct > 0.0) || !std::isfinite(width_pct)) {
        throw std::invalid_argument("uncertainty width must be positive");
    }
    if (scope == LoadScope::BusList) {
        if (buses.empty()) throw std::invalid_argument("uncertainty bus list is empty");
        for (const BusId b : buses) {
            if (!c.find_bus(b)) {
                throw std::invalid_argument("uncertainty bus " + std::to_string(b) + " not in case");
            }
        }
    }
}

std::string Probe::label() const {
    if (kind == ProbeKind::BusVoltage) return "V" + std::to_string(bus);
    return "A" + std::to_string(bus) + "-" + std::to_string(to);
}

Probe Probe::parse(std::string_view text) {
    if (text.size() < 2) throw std::invalid_argument("malformed probe '" + std::string(text) + "'");
    Probe p;
    const std::string_view rest = text.substr(1);
    if (text[0] == 'V') {
        p.kind = ProbeKind::BusVoltage;
        p.bus = parse_bus(rest, text);
    } else if (text[0] == 'A') {
        const auto dash = rest.find('-', 1);
        if (dash == std::string_view::npos) {
            throw std::invalid_argument("malformed probe '" + std::string(text) + "'");
        }
        p.kind = ProbeKind::BranchAngle;
        p.bus = parse_bus(rest.substr(0, dash), text);
        p.to = parse_bus(rest.substr(dash + 1), text);
    } else {
        throw std::invalid_argument("malformed probe '" + std::string(text) + "'");
    }
    return p;
}

void StudyConfig::check() const {
    if (max_samples < 1) throw std::invalid_argument("max_samples must be at least 1");
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    if (check_every < 1) throw std::invalid_argument("check_every must be at least 1");
    if (ci_target && !(ci_target->half_width > 0.0)) {
        throw std::invalid_argument("CI target half-width must be positive");
    }
}

std::mt19937_64 rng_for_sample(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{lo32(seed), hi32(seed), lo32(index), hi32(index)};
    return std::mt19937_64(seq);
}

NetworkCase sample_loads(const NetworkCase& c, const UncertaintySpec& spec, std::mt19937_64& rng) {
    NetworkCase out = c;
    std::vector<std::size_t> order(out.loads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.loads[a].bus < out.loads[b].bus;
    });
    auto in_scope = [&](BusId bus) {
        return spec.scope == LoadScope::AllLoads ||
               std::find(spec.buses.begin(), spec.buses.end(), bus) != spec.buses.end();
    };
    const double w = spec.width_pct / 100.0;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (const std::size_t k : order) {
        Load& l = out.loads[k];
        if (!in_scope(l.bus)) continue;
        if (spec.distribution == Distribution::Normal) {
            l.p_nom += w * std::abs(l.p_nom) * normal(rng);
            l.q_nom += w * std::abs(l.q_nom) * normal(rng);
        } else {
            l.p_nom *= 1.0 + w * uniform(rng);
            l.q_nom *= 1.0 + w * uniform(rng);
        }
    }
    return out;
}

SplitCircuitState dc_shifted_start(const NetworkCase& base, const NetworkCase& sample,
                                   const SplitCircuitState& state) {
    if (sample.loads.size() != base.loads.size()) {
        throw std::invalid_argument("sample and base case differ in their loads");
    }
    const auto pos = base.bus_positions();
    std::vector<int> row(base.buses.size(), -1);
    int dim = 0;
    for (std::size_t i = 0; i < base.buses.size(); ++i) {
        const BusKind kind = base.buses[i].kind;
        if (kind != BusKind::Slack && kind != BusKind::Isolated) row[i] = dim++;
    }
    if (dim == 0) return state;

    std::vector<Triplet> b;
    for (const Branch& br : base.branches) {
        if (!br.in_service) continue;
        const int f = row[pos.at(br.from)];
        const int t = row[pos.at(br.to)];
        const double y = br.x / (br.r * br.r + br.x * br.x);   // -Im(1 / z)
        if (f >= 0) b.push_back({f, f, y});
        if (t >= 0) b.push_back({t, t, y});
        if (f >= 0 && t >= 0) {
            b.push_back({f, t, -y});
            b.push_back({t, f, -y});
        }
    }
    std::vector<double> dp(static_cast<std::size_t>(dim), 0.0);
    bool changed = false;
    for (std::size_t k = 0; k < base.loads.size(); ++k) {
        const int r = row[pos.at(base.loads[k].bus)];
        const double d = sample.loads[k].p_nom - base.loads[k].p_nom;
        if (r >= 0 && d != 0.0) {
            dp[static_cast<std::size_t>(r)] -= d;
            changed = true;
        }
    }
    if (!changed) return state;

    std::vector<double> shift;
    try {
        shift = solve_linear(b, dp, static_cast<std::size_t>(dim));
    } catch (const SingularSystemError&) {
        return state;
    }
    SplitCircuitState out = state;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] < 0) continue;
        const Complex v = state.voltage(i) * std::polar(1.0, shift[static_cast<std::size_t>(row[i])]);
        out.v_real[i] = v.real();
        out.v_imag[i] = v.imag();
    }
    return out;
}

std::vector<double> probe_values(const NetworkCase& c, const SplitCircuitState& state,
                                 const std::vector<Probe>& probes) {
    std::vector<double> out;
    out.reserve(probes.size());
    for (const Probe& p : probes) {
        const auto f = c.find_bus(p.bus);
        if (!f) throw std::invalid_argument("probe " + p.label() + " names an unknown bus");
        if (p.kind == ProbeKind::BusVoltage) {
            out.push_back(std::abs(state.voltage(*f)));
            continue;
        }
        const auto t = c.find_bus(p.to);
        if (!t) throw std::invalid_argument("probe " + p.label() + " names an unknown bus");
        const bool exists = std::any_of(c.branches.begin(), c.branches.end(), [&](const Branch& b) {
            return (b.from == p.bus && b.to == p.to) || (b.from == p.to && b.to == p.bus);
        });
        if (!exists) throw std::invalid_argument("probe " + p.label() + " names no branch");
        out.push_back(std::arg(state.voltage(*f) * std::conj(state.voltage(*t))));
    }
    return out;
}

void summarize(StudyReport& report, std::vector<SampleResult> samples) {
    const std::size_t n = samples.size();
    report.n = n;
    std::array<std::size_t, kOutcomeCount> counts{};
    report.tx_stepping_samples = 0;
    for (const auto& s : samples) {
        ++counts[static_cast<std::size_t>(s.outcome.kind)];
        if (s.used_tx_stepping) ++report.tx_stepping_samples;
    }
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        ClassSummary& cs = report.classes[k];
        cs.kind = static_cast<OutcomeKind>(k);
        cs.count = counts[k];
        if (n > 0) {
            cs.p_hat = static_cast<double>(counts[k]) / static_cast<double>(n);
            cs.ci95 = ci_binary(counts[k], n, ConfidenceLevel::CL95);
            cs.ci99 = ci_binary(counts[k], n, ConfidenceLevel::CL99);
        }
    }

    report.histograms.clear();
    const auto& probes = report.config.probes;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        std::vector<double> values;
        std::vector<std::size_t> labels;
        for (const auto& s : samples) {
            if (s.probe_values.size() != probes.size()) continue;
            values.push_back(s.probe_values[p]);
            labels.push_back(static_cast<std::size_t>(s.outcome.kind));
        }
        report.histograms.push_back({probes[p], histogram(values, labels, kOutcomeCount)});
    }
    if (report.config.keep_samples) {
        report.samples = std::move(samples);
    } else {
        report.samples.clear();
    }
}

StudyReport run_sampling(const StudyConfig& config, const EvaluatorFactory& factory) {
    config.check();
    StudyReport report;
    report.config = config;

    std::vector<SampleEvaluator> evaluators;
    std::vector<SampleResult> results;
    std::size_t done = 0;
    report.stop_reason = StopReason::MaxSamples;

    while (done < config.max_samples) {
        const std::size_t end = std::min(done + config.check_every, config.max_samples);
        const auto width =
            static_cast<unsigned>(std::min<std::size_t>(config.workers, end - done));
        while (evaluators.size() < width) evaluators.push_back(factory());
        results.resize(end);

        std::atomic<std::size_t> next{done};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&](unsigned w) {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= end) break;
                    auto rng = rng_for_sample(config.seed, i);
                    SampleResult r = evaluators[w](i, rng);
                    r.index = i;
                    results[i] = std::move(r);
                }
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(end);
            }
        };
        if (width == 1) {
            work(0);
        } else {
            std::vector<std::jthread> threads;
            threads.reserve(width);
            for (unsigned w = 0; w < width; ++w) threads.emplace_back(work, w);
        }
        if (failure) std::rethrow_exception(failure);
        done = end;

        if (config.ci_target) {
            const auto kind = config.ci_target->outcome;
            const auto hits = static_cast<std::size_t>(
                std::count_if(results.begin(), results.end(),
                              [&](const SampleResult& r) { return r.outcome.kind == kind; }));
            if (ci_half_width(hits, done, config.ci_target->level) <= config.ci_target->half_width) {
                report.stop_reason = StopReason::CITargetMet;
                break;
            }
        }
    }
    summarize(report, std::move(results));
    return report;
}

StudyReport degenerate_report(const std::string& case_name, const UncertaintySpec& spec,
                              const StudyConfig& config, std::string diagnostic) {
    StudyReport r;
    r.case_name = case_name;
    r.spec = spec;
    r.config = config;
    r.base_feasible = false;
    r.base_diagnostic = std::move(diagnostic);
    r.n = 0;
    r.stop_reason = StopReason::BaseInfeasible;
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        ClassSummary& cs = r.classes[k];
        cs.kind = static_cast<OutcomeKind>(k);
        cs.p_hat = cs.kind == OutcomeKind::VoltageCollapse ? 1.0 : 0.0;
        for (auto level : {ConfidenceLevel::CL95, ConfidenceLevel::CL99}) {
            ConfInterval ci{0.0, 1.0, level, IntervalKind::ZeroEvent, true};
            (level == ConfidenceLevel::CL95 ? cs.ci95 : cs.ci99) = ci;
        }
    }
    for (const Probe& p : config.probes) r.histograms.push_back({p, Histogram{}});
    return r;
}

StudyReport run_study(const NetworkCase& c, const UncertaintySpec& spec, const StudyConfig& config,
                      const SolverOptions& opts, const LimitSpec& limits) {
    require_valid(c);
    spec.check(c);
    config.check();
    limits.check();
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    const PFSolution base = session.robust(circuit, circuit.case_start());
    if (!base.converged) {
        return degenerate_report(c.name, spec, config,
                                 "base case did not converge: " + base.diagnostic);
    }
    return run_study_from_base(c, base, spec, config, opts, limits);
}

StudyReport run_study_from_base(const NetworkCase& c, const PFSolution& base,
                                const UncertaintySpec& spec, const StudyConfig& config,
                                const SolverOptions& opts, const LimitSpec& limits) {
    spec.check(c);
    limits.check();
    (void)probe_values(c, base.state, config.probes);

    const std::optional<SplitCircuitState> warm =
        config.warm_start ? std::optional<SplitCircuitState>(base.state) : std::nullopt;
    const EvaluatorFactory factory = [&]() -> SampleEvaluator {
        auto session = std::make_shared<SolveSession>(opts);
        return [&, session](std::size_t, std::mt19937_64& rng) {
            auto network = std::make_shared<const NetworkCase>(sample_loads(c, spec, rng));
            std::optional<SplitCircuitState> start;
            if (warm) start = dc_shifted_start(c, *network, *warm);
            const SplitCircuit circuit(std::move(network));
            const PFSolution sol = session->robust(circuit, start);
            SampleResult r;
            r.outcome = classify(circuit.network(), sol, limits);
            r.used_tx_stepping = sol.used_tx_stepping;
            r.iterations = sol.iterations;
            if (sol.converged) r.probe_values = probe_values(c, sol.state, config.probes);
            return r;
        };
    };
    StudyReport report = run_sampling(config, factory);
    report.case_name = c.name;
    report.spec = spec;
    return report;
}

}  // namespace splitflow
