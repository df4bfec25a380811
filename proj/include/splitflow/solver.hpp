#pragma once

// Newton-Raphson on the split equivalent circuit, with per-variable voltage
// limiting, Tx-stepping continuation, reactive-limit enforcement and
// operating-state classification.

#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitflow/case_model.hpp"
#include "splitflow/equiv_circuit.hpp"
#include "splitflow/linear_solver.hpp"

namespace splitflow {

enum class TxSchedule { Geometric, Linear };

struct SolverOptions {
    double tol = 1e-8;               // infinity norm of the mismatch, pu
    int max_iter = 50;               // per Newton solve (and per Tx step)
    double v_limit_delta = 0.1;      // max change of a voltage variable per iteration
    int tx_steps = 20;               // nonzero continuation levels before the final zero step
    double tx_g_init = 1e3;          // first continuation conductance, pu
    double tx_g_last = 1e-3;         // last nonzero level of the geometric schedule
    TxSchedule tx_schedule = TxSchedule::Geometric;
    bool tx_stepping = true;         // robust_solve falls back to continuation
    bool enforce_q_limits = true;    // robust_solve clamps PV reactive output
    int q_toggle_cap = 10;           // PV/PQ switching rounds before giving up
    double q_tol = 1e-6;             // reactive limit slack before a PV bus is clamped
    std::ostream* trace = nullptr;   // per-iteration log, one line per iteration

    /// Throws std::invalid_argument when a field is out of range.
    void check() const;
};

/// Continuation conductance levels, strictly decreasing and ending at 0.
std::vector<double> tx_schedule_levels(const SolverOptions& opts);

enum class QLimitSide { QMin, QMax };

struct QLimitSwitch {
    BusId bus = 0;
    QLimitSide side = QLimitSide::QMax;
    bool operator==(const QLimitSwitch&) const = default;
};

struct PFSolution {
    SplitCircuitState state;
    bool converged = false;
    int iterations = 0;
    bool used_tx_stepping = false;
    std::vector<QLimitSwitch> q_limit_switches;  // PV buses left clamped
    std::vector<PvMode> pv_modes;                // per PvGenerator of the solved case
    double residual_norm = 0.0;
    std::string diagnostic;                      // empty on success
    std::optional<int> failed_tx_step;
    double failed_tx_conductance = 0.0;
};

/// Stateless entry points build their own linear solver; SolveSession keeps
/// one factorization workspace across the solves of a single worker.
class SolveSession {
public:
    explicit SolveSession(const SolverOptions& opts);

    PFSolution newton(const SplitCircuit& circuit, SplitCircuitState init, std::vector<PvMode> modes,
                      double tx_conductance = 0.0);
    PFSolution tx_stepping(const SplitCircuit& circuit, std::vector<PvMode> modes);
    PFSolution enforce_q_limits(const SplitCircuit& circuit, PFSolution solution);
    PFSolution robust(const SplitCircuit& circuit, const std::optional<SplitCircuitState>& warm_start);

    [[nodiscard]] const SolverOptions& options() const { return opts_; }

private:
    SolverOptions opts_;
    SparseLuSolver lu_;
};

PFSolution newton_solve(const NetworkCase& c, const SplitCircuitState& init,
                        const SolverOptions& opts);
PFSolution tx_stepping_solve(const NetworkCase& c, const SolverOptions& opts);
PFSolution enforce_q_limits(const NetworkCase& c, const PFSolution& solution,
                            const SolverOptions& opts);
PFSolution robust_solve(const NetworkCase& c, const std::optional<SplitCircuitState>& warm_start,
                        const SolverOptions& opts);

// ---------------------------------------------------------------------------
// Classification

enum class OutcomeKind {
    Normal,
    VoltageCollapse,
    AngularUnstable,
    VoltageBandViolation,
    BranchOverload,
};

inline constexpr std::size_t kOutcomeCount = 5;

std::string to_string(OutcomeKind kind);
std::optional<OutcomeKind> outcome_from_string(std::string_view text);

/// Headline class plus every violation found. Branches are indices into
/// NetworkCase::branches.
struct OperatingClass {
    OutcomeKind kind = OutcomeKind::Normal;
    std::vector<std::size_t> angular_branches;
    std::vector<BusId> band_buses;
    std::vector<std::size_t> overloaded_branches;

    bool operator==(const OperatingClass&) const = default;
};

struct LimitSpec {
    double angle_max = std::numbers::pi / 2.0;
    bool enforce_v_band = true;
    bool enforce_branch_rating = true;
    std::optional<double> v_min;   // overrides every bus band when set
    std::optional<double> v_max;

    void check() const;
};

OperatingClass classify(const NetworkCase& c, const PFSolution& solution, const LimitSpec& limits);

// ---------------------------------------------------------------------------
// Post-processing

struct BranchFlow {
    Complex i_from;
    Complex i_to;
    Complex s_from;   // power entering the branch at the from end
    Complex s_to;
};

/// Flows of every branch; zero for out-of-service branches.
std::vector<BranchFlow> branch_flows(const NetworkCase& c, const SplitCircuitState& state);

/// Angle of V_from relative to V_to, wrapped to (-pi, pi].
double branch_angle_difference(const NetworkCase& c, const SplitCircuitState& state,
                               std::size_t branch_index);

struct GeneratorOutput {
    std::size_t index = 0;   // into NetworkCase::generators
    BusId bus = 0;
    double p = 0.0;
    double q = 0.0;
};

/// Dispatch of every in-service generator. Units sharing a bus split the
/// bus output evenly.
std::vector<GeneratorOutput> generator_outputs(const NetworkCase& c, const PFSolution& solution);

double infinity_norm(std::span<const double> v);

}  // namespace splitflow
