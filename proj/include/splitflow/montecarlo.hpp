#pragma once

// Simple random sampling over load uncertainty. Each sample index owns an
// independent random stream, so results do not depend on the worker count.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitflow/case_model.hpp"
#include "splitflow/solver.hpp"
#include "splitflow/statistics.hpp"

namespace splitflow {

enum class Distribution { Normal, Uniform };
enum class LoadScope { AllLoads, BusList };

struct UncertaintySpec {
    Distribution distribution = Distribution::Normal;
    double width_pct = 1.0;   // sigma for Normal, +/- range for Uniform, percent of nominal
    LoadScope scope = LoadScope::AllLoads;
    std::vector<BusId> buses;   // used when scope == BusList

    static UncertaintySpec normal(double sigma_pct) { return {Distribution::Normal, sigma_pct, LoadScope::AllLoads, {}}; }
    static UncertaintySpec uniform(double range_pct) { return {Distribution::Uniform, range_pct, LoadScope::AllLoads, {}}; }

    /// Throws std::invalid_argument when the width is not positive or a
    /// listed bus does not exist in `c`.
    void check(const NetworkCase& c) const;
};

std::string to_string(Distribution d);

enum class ProbeKind { BranchAngle, BusVoltage };

/// A recorded quantity. Branch angles are arg(V_from / V_to) in radians;
/// bus voltages are magnitudes in pu.
struct Probe {
    ProbeKind kind = ProbeKind::BusVoltage;
    BusId bus = 0;   // bus, or from end of the branch
    BusId to = 0;

    [[nodiscard]] std::string label() const;
    /// Inverse of label(): "V14" or "A1-2".
    static Probe parse(std::string_view text);
    bool operator==(const Probe&) const = default;
};

struct CiTarget {
    OutcomeKind outcome = OutcomeKind::VoltageCollapse;
    ConfidenceLevel level = ConfidenceLevel::CL99;
    double half_width = 0.01;
};

struct StudyConfig {
    std::size_t max_samples = 1000;
    std::optional<CiTarget> ci_target;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::vector<Probe> probes;
    std::size_t check_every = 100;   // CI target cadence, also the scheduling chunk
    bool warm_start = true;
    bool keep_samples = true;        // retain per-sample results in the report

    void check() const;
};

struct SampleResult {
    std::size_t index = 0;
    OperatingClass outcome;
    bool used_tx_stepping = false;
    int iterations = 0;
    std::vector<double> probe_values;   // empty for collapsed samples
};

enum class StopReason { MaxSamples, CITargetMet, BaseInfeasible };
std::string to_string(StopReason r);

struct ClassSummary {
    OutcomeKind kind = OutcomeKind::Normal;
    std::size_t count = 0;
    double p_hat = 0.0;
    ConfInterval ci95;
    ConfInterval ci99;
};

struct ProbeHistogram {
    Probe probe;
    Histogram hist;   // classes indexed by OutcomeKind
};

struct StudyReport {
    std::string case_name;
    UncertaintySpec spec;
    StudyConfig config;
    bool base_feasible = true;
    std::string base_diagnostic;
    std::size_t n = 0;
    StopReason stop_reason = StopReason::MaxSamples;
    std::array<ClassSummary, kOutcomeCount> classes{};
    std::size_t tx_stepping_samples = 0;
    std::vector<ProbeHistogram> histograms;
    std::vector<SampleResult> samples;   // sorted by index when kept
};

/// Mersenne Twister 19937-64 seeded from both words of (seed, index).
std::mt19937_64 rng_for_sample(std::uint64_t seed, std::uint64_t index);

/// Copy of `c` with in-scope loads redrawn. Draws happen in ascending
/// (bus id, load ordinal) order, P before Q for each load.
NetworkCase sample_loads(const NetworkCase& c, const UncertaintySpec& spec, std::mt19937_64& rng);

/// Evaluates one sample. Each worker gets its own evaluator from the factory
/// so solver workspaces are never shared.
using SampleEvaluator = std::function<SampleResult(std::size_t index, std::mt19937_64& rng)>;
using EvaluatorFactory = std::function<SampleEvaluator()>;

/// Sampling loop without the power-flow specifics: runs chunks of
/// config.check_every samples in parallel and stops at max_samples or when
/// the CI target is met on a chunk boundary.
StudyReport run_sampling(const StudyConfig& config, const EvaluatorFactory& factory);

/// Report for a case without a feasible base solution: n = 0, every
/// estimate of collapse 1 with the [0, 1] interval.
StudyReport degenerate_report(const std::string& case_name, const UncertaintySpec& spec,
                              const StudyConfig& config, std::string diagnostic);

/// Warm start for `sample` built from the solved `base` state: bus angles are
/// moved by a DC power-flow estimate of the load change, magnitudes are kept.
/// With an edge slack the whole network can rotate by tenths of a radian per
/// sample, which rectangular Newton handles poorly from the unrotated state.
/// Both cases must share buses, branches and load order. Returns `state`
/// unchanged if the DC system is singular.
SplitCircuitState dc_shifted_start(const NetworkCase& base, const NetworkCase& sample,
                                   const SplitCircuitState& state);

/// Probe values of a converged state; throws std::invalid_argument when a
/// probe names an unknown bus or branch.
std::vector<double> probe_values(const NetworkCase& c, const SplitCircuitState& state,
                                 const std::vector<Probe>& probes);

/// Solves the base case, then samples. A base case that does not converge
/// yields degenerate_report; validation failures throw std::invalid_argument.
StudyReport run_study(const NetworkCase& c, const UncertaintySpec& spec, const StudyConfig& config,
                      const SolverOptions& opts, const LimitSpec& limits);

/// Same as run_study with an already solved base case.
StudyReport run_study_from_base(const NetworkCase& c, const PFSolution& base,
                                const UncertaintySpec& spec, const StudyConfig& config,
                                const SolverOptions& opts, const LimitSpec& limits);

/// Fills class summaries and histograms from `samples` (sorted by index).
void summarize(StudyReport& report, std::vector<SampleResult> samples);

}  // namespace splitflow
