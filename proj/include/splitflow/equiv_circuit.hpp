#pragma once

// Split real/imaginary equivalent circuit of the power-flow problem.
//
// The unknown vector is laid out as
//   [V_R(bus 0), V_I(bus 0), V_R(bus 1), ..., Q(pv 0), ..., I_sR, I_sI]
// i.e. one contiguous (real, imag) pair per active bus, then one reactive
// power unknown per voltage-controlled bus, then the two slack source
// currents. Every stamp writes the Newton companion model: the stamped
// system J x^{k+1} = rhs reproduces the first-order expansion of the
// element equations around x^k, so that J is the Jacobian of residual().
//
// Sign convention: KCL rows sum currents leaving the bus. Loads draw
// current; generators and the slack source inject it.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "splitflow/case_model.hpp"

namespace splitflow {

using Complex = std::complex<double>;

/// Thrown when a power-to-current conversion hits V = 0.
class SingularPointError : public std::domain_error {
public:
    explicit SingularPointError(BusId bus = -1);
    [[nodiscard]] BusId bus() const noexcept { return bus_; }

private:
    BusId bus_;
};

struct SplitCircuitState {
    std::vector<double> v_real;   // per bus, in case order
    std::vector<double> v_imag;
    std::vector<double> q_gen;    // per voltage-controlled bus (PvGenerator order)
    double slack_i_real = 0.0;    // current injected by the slack source
    double slack_i_imag = 0.0;
    int iteration = 0;

    [[nodiscard]] Complex voltage(std::size_t bus_pos) const {
        return {v_real[bus_pos], v_imag[bus_pos]};
    }
};

struct LoadCurrent {
    double real = 0.0;
    double imag = 0.0;
};

/// Current drawn by a constant-power load, conj(S / V) in split form.
LoadCurrent load_current(double v_real, double v_imag, double p, double q);

/// Partial derivatives of load_current with respect to (V_R, V_I).
struct LoadPartials {
    double dir_dvr = 0.0;
    double dir_dvi = 0.0;
    double dii_dvr = 0.0;
    double dii_dvi = 0.0;
};

LoadPartials load_current_partials(double v_real, double v_imag, double p, double q);

/// Generators aggregated per voltage-controlled bus: summed P and Q limits,
/// setpoint of the bus.
struct PvGenerator {
    BusId bus = 0;
    std::size_t bus_pos = 0;
    double p_set = 0.0;
    double v_set = 1.0;
    double q_min = 0.0;
    double q_max = 0.0;
    int unit_count = 0;
};

/// How the reactive-power unknown of a PV bus is constrained.
enum class PvMode { Voltage, AtQMax, AtQMin };

/// Fixed complex power injection (generators on PQ buses).
struct FixedInjection {
    BusId bus = 0;
    double p = 0.0;
    double q = 0.0;
};

struct IndexMap {
    std::unordered_map<BusId, std::size_t> bus_pos;
    std::vector<int> bus_row;     // per bus position; -1 for isolated buses
    std::vector<int> pv_of_bus;   // per bus position; PV ordinal or -1
    std::vector<int> pv_row;      // per PV ordinal
    std::size_t slack_pos = 0;
    int slack_row = -1;
    std::size_t dimension = 0;

    [[nodiscard]] int row_of(BusId bus) const;
};

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Linear system under construction: conductance/coupling triplets and the
/// independent current sources on the right-hand side.
class StampAccumulator {
public:
    explicit StampAccumulator(std::shared_ptr<const IndexMap> index);

    void add(int row, int col, double value);
    void add_rhs(int row, double value) { rhs_[static_cast<std::size_t>(row)] += value; }
    void clear();

    [[nodiscard]] const IndexMap& index() const { return *index_; }
    [[nodiscard]] std::size_t dimension() const { return index_->dimension; }
    [[nodiscard]] std::span<const Triplet> triplets() const { return triplets_; }
    [[nodiscard]] std::span<const double> rhs() const { return rhs_; }
    [[nodiscard]] std::vector<double>& rhs_mut() { return rhs_; }

    /// Dense copy, for tests and small systems.
    [[nodiscard]] std::vector<std::vector<double>> dense() const;

private:
    std::shared_ptr<const IndexMap> index_;
    std::vector<Triplet> triplets_;
    std::vector<double> rhs_;
};

// -- element stamps ---------------------------------------------------------

void stamp_pq_load(StampAccumulator& acc, const Load& load, const SplitCircuitState& state);
void stamp_fixed_injection(StampAccumulator& acc, const FixedInjection& inj,
                           const SplitCircuitState& state);
void stamp_pv_generator(StampAccumulator& acc, const PvGenerator& gen, std::size_t pv_ordinal,
                        PvMode mode, const SplitCircuitState& state);
void stamp_branch(StampAccumulator& acc, const Branch& branch);
void stamp_shunt(StampAccumulator& acc, const Bus& bus);
void stamp_slack(StampAccumulator& acc, const Bus& bus);
/// Voltage target of a PV bus while the network carries continuation
/// conductance g. A shorted network cannot hold setpoints that differ from
/// the slack (the circulating current would be real power the generator
/// cannot supply), so the target starts at the slack magnitude and reaches
/// v_set as g goes to zero. The circulating current stays below
/// |v_set - v_slack| * kSetpointBlendConductance.
inline constexpr double kSetpointBlendConductance = 1.0;
double continuation_setpoint(double v_set, double v_slack, double tx_conductance);

/// Continuation admittance placed in parallel with every branch: magnitude
/// g, inductive with a fixed X/R ratio. A purely real path would leave
/// reactive injections with almost no authority over voltage magnitude
/// (near-singular PV rows). Copying each branch's own angle is worse on
/// equivalenced cases with series-capacitive branches, which resonate
/// with the added path at particular g.
inline constexpr double kShortingXOverR = 10.0;
Complex shorting_admittance(double g);
void stamp_shorting_admittance(StampAccumulator& acc, const Branch& branch, double g);

/// Two-port admittances of the MATPOWER pi model (tap on the from side).
struct BranchAdmittance {
    Complex yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& branch);

/// Network prepared for repeated stamping: index map, aggregated PV
/// generators and fixed injections. Immutable after construction.
class SplitCircuit {
public:
    explicit SplitCircuit(const NetworkCase& c);
    explicit SplitCircuit(std::shared_ptr<const NetworkCase> c);

    [[nodiscard]] const NetworkCase& network() const { return *case_; }
    [[nodiscard]] const std::shared_ptr<const IndexMap>& index_ptr() const { return index_; }
    [[nodiscard]] const IndexMap& index() const { return *index_; }
    [[nodiscard]] std::size_t dimension() const { return index_->dimension; }
    [[nodiscard]] std::span<const PvGenerator> pv_generators() const { return pv_; }
    [[nodiscard]] std::span<const FixedInjection> fixed_injections() const { return fixed_; }
    [[nodiscard]] const Bus& slack_bus() const { return case_->buses[index_->slack_pos]; }

    /// Stamps every element at `state`; `tx_conductance` > 0 adds the
    /// continuation conductance across each in-service branch.
    void assemble(const SplitCircuitState& state, std::span<const PvMode> modes,
                  double tx_conductance, StampAccumulator& acc) const;

    /// Mismatch evaluated directly from the element equations.
    [[nodiscard]] std::vector<double> residual(const SplitCircuitState& state,
                                               std::span<const PvMode> modes,
                                               double tx_conductance = 0.0) const;

    [[nodiscard]] std::vector<double> pack(const SplitCircuitState& state) const;
    void unpack(std::span<const double> x, SplitCircuitState& state) const;

    /// V_R = 1, V_I = 0 at PQ buses, V = v_set at PV buses, slack at its
    /// setpoint, Q at the midpoint of its limits (0 if unbounded).
    [[nodiscard]] SplitCircuitState flat_start() const;
    /// Slack voltage phasor at every bus.
    [[nodiscard]] SplitCircuitState slack_start() const;
    /// Voltages stored in the case file (PV magnitudes at setpoint).
    [[nodiscard]] SplitCircuitState case_start() const;

    [[nodiscard]] std::vector<PvMode> voltage_modes() const {
        return std::vector<PvMode>(pv_.size(), PvMode::Voltage);
    }

private:
    std::shared_ptr<const NetworkCase> case_;
    std::shared_ptr<const IndexMap> index_;
    std::vector<PvGenerator> pv_;
    std::vector<FixedInjection> fixed_;
};

/// Residual of `c` at `state` with every PV bus voltage-controlled.
std::vector<double> residual(const NetworkCase& c, const SplitCircuitState& state);

/// Writes the assembled matrix in Matrix Market coordinate format.
void write_matrix_market(const StampAccumulator& acc, std::ostream& out);

}  // namespace splitflow
