#include "splitflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace splitflow {

namespace {

constexpr double kReleaseVoltageTol = 1e-6;

void fit_state(const SplitCircuit& circuit, SplitCircuitState& state) {
    const std::size_t nb = circuit.network().buses.size();
    if (state.v_real.size() != nb || state.v_imag.size() != nb) {
        throw std::invalid_argument("state dimension does not match the case");
    }
    if (state.q_gen.size() != circuit.pv_generators().size()) {
        // The set of voltage-controlled buses differs from the state's
        // origin (e.g. after an outage); restart Q from the flat guess.
        state.q_gen = circuit.flat_start().q_gen;
    }
}

std::vector<QLimitSwitch> clamped_buses(const SplitCircuit& circuit, std::span<const PvMode> modes) {
    std::vector<QLimitSwitch> out;
    const auto pv = circuit.pv_generators();
    for (std::size_t k = 0; k < pv.size(); ++k) {
        if (modes[k] == PvMode::AtQMax) out.push_back({pv[k].bus, QLimitSide::QMax});
        if (modes[k] == PvMode::AtQMin) out.push_back({pv[k].bus, QLimitSide::QMin});
    }
    return out;
}

}  // namespace

void SolverOptions::check() const {
    if (!(tol > 0.0)) throw std::invalid_argument("solver tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("solver max_iter must be at least 1");
    if (!(v_limit_delta > 0.0)) throw std::invalid_argument("v_limit_delta must be positive");
    if (!(tx_g_init > 0.0)) throw std::invalid_argument("tx_g_init must be positive");
    if (tx_steps < 1) throw std::invalid_argument("tx_steps must be at least 1");
    if (!(tx_g_last > 0.0) || !(tx_g_last < tx_g_init)) {
        throw std::invalid_argument("tx_g_last must lie in (0, tx_g_init)");
    }
    if (q_toggle_cap < 1) throw std::invalid_argument("q_toggle_cap must be at least 1");
}

std::vector<double> tx_schedule_levels(const SolverOptions& opts) {
    std::vector<double> levels;
    levels.reserve(static_cast<std::size_t>(opts.tx_steps) + 1);
    const int n = opts.tx_steps;
    if (opts.tx_schedule == TxSchedule::Geometric) {
        const double ratio =
            n > 1 ? std::pow(opts.tx_g_last / opts.tx_g_init, 1.0 / static_cast<double>(n - 1)) : 0.0;
        for (int k = 0; k < n; ++k) levels.push_back(opts.tx_g_init * std::pow(ratio, k));
    } else {
        for (int k = 0; k < n; ++k) {
            levels.push_back(opts.tx_g_init * (1.0 - static_cast<double>(k) / n));
        }
    }
    levels.push_back(0.0);
    return levels;
}

double infinity_norm(std::span<const double> v) {
    double m = 0.0;
    for (const double x : v) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

// ---------------------------------------------------------------------------

SolveSession::SolveSession(const SolverOptions& opts) : opts_(opts) { opts_.check(); }

PFSolution SolveSession::newton(const SplitCircuit& circuit, SplitCircuitState init,
                                std::vector<PvMode> modes, double tx_conductance) {
    PFSolution sol;
    sol.state = std::move(init);
    fit_state(circuit, sol.state);
    if (modes.size() != circuit.pv_generators().size()) modes = circuit.voltage_modes();
    sol.pv_modes = std::move(modes);

    const IndexMap& index = circuit.index();
    StampAccumulator acc(circuit.index_ptr());
    SplitCircuitState& state = sol.state;

    for (int it = 0;; ++it) {
        std::vector<double> f;
        try {
            f = circuit.residual(state, sol.pv_modes, tx_conductance);
        } catch (const SingularPointError& e) {
            sol.diagnostic = e.what();
            sol.residual_norm = std::numeric_limits<double>::infinity();
            break;
        }
        sol.residual_norm = infinity_norm(f);
        if (sol.residual_norm <= opts_.tol) {
            sol.converged = true;
            break;
        }
        if (it >= opts_.max_iter || !std::isfinite(sol.residual_norm)) {
            std::ostringstream msg;
            msg << "no convergence after " << it << " iterations (mismatch " << sol.residual_norm
                << ")";
            sol.diagnostic = msg.str();
            break;
        }

        acc.clear();
        std::vector<double> x_new;
        try {
            circuit.assemble(state, sol.pv_modes, tx_conductance, acc);
            x_new = lu_.solve(acc.triplets(), acc.rhs(), acc.dimension());
        } catch (const SingularPointError& e) {
            sol.diagnostic = e.what();
            break;
        } catch (const SingularSystemError& e) {
            sol.diagnostic = std::string(e.what()) + " (row " + std::to_string(e.pivot_row()) + ")";
            break;
        }

        std::vector<double> x = circuit.pack(state);
        int limited = 0;
        std::vector<char> is_voltage(x.size(), 0);
        for (const int r : index.bus_row) {
            if (r < 0) continue;
            is_voltage[static_cast<std::size_t>(r)] = 1;
            is_voltage[static_cast<std::size_t>(r) + 1] = 1;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            double delta = x_new[i] - x[i];
            if (is_voltage[i] && std::abs(delta) > opts_.v_limit_delta) {
                delta = std::copysign(opts_.v_limit_delta, delta);
                ++limited;
            }
            x[i] += delta;
        }
        circuit.unpack(x, state);
        // A clamped row reads q = limit; drop the factorization round-off.
        for (std::size_t k = 0; k < sol.pv_modes.size(); ++k) {
            const PvGenerator& gen = circuit.pv_generators()[k];
            if (sol.pv_modes[k] == PvMode::AtQMax) state.q_gen[k] = gen.q_max;
            if (sol.pv_modes[k] == PvMode::AtQMin) state.q_gen[k] = gen.q_min;
        }
        ++state.iteration;
        ++sol.iterations;

        if (opts_.trace != nullptr) {
            *opts_.trace << "iter " << sol.iterations << " mismatch " << sol.residual_norm
                         << " limited " << limited << " g_tx " << tx_conductance << '\n';
        }
    }
    if (opts_.trace != nullptr) {
        *opts_.trace << (sol.converged ? "converged" : "failed") << " after " << sol.iterations
                     << " iterations, mismatch " << sol.residual_norm << " g_tx " << tx_conductance
                     << '\n';
    }
    return sol;
}

PFSolution SolveSession::tx_stepping(const SplitCircuit& circuit, std::vector<PvMode> modes) {
    const std::vector<double> levels = tx_schedule_levels(opts_);
    SplitCircuitState state = circuit.slack_start();
    if (modes.size() != circuit.pv_generators().size()) modes = circuit.voltage_modes();
    int total = 0;
    PFSolution step;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        step = newton(circuit, std::move(state), modes, levels[k]);
        total += step.iterations;
        if (!step.converged) {
            step.failed_tx_step = static_cast<int>(k);
            step.failed_tx_conductance = levels[k];
            std::ostringstream msg;
            msg << "Tx-stepping failed at step " << k << " (g = " << levels[k]
                << "): " << step.diagnostic;
            step.diagnostic = msg.str();
            break;
        }
        state = step.state;
    }
    step.iterations = total;
    step.used_tx_stepping = true;
    return step;
}

PFSolution SolveSession::enforce_q_limits(const SplitCircuit& circuit, PFSolution solution) {
    if (!solution.converged) return solution;
    const auto pv = circuit.pv_generators();
    if (solution.pv_modes.size() != pv.size()) solution.pv_modes = circuit.voltage_modes();

    for (int round = 0;; ++round) {
        bool changed = false;
        auto& modes = solution.pv_modes;
        const auto& state = solution.state;
        for (std::size_t k = 0; k < pv.size(); ++k) {
            const PvGenerator& g = pv[k];
            const double q = state.q_gen[k];
            const double vm = std::abs(state.voltage(g.bus_pos));
            switch (modes[k]) {
                case PvMode::Voltage:
                    if (q > g.q_max + opts_.q_tol) {
                        modes[k] = PvMode::AtQMax;
                        changed = true;
                    } else if (q < g.q_min - opts_.q_tol) {
                        modes[k] = PvMode::AtQMin;
                        changed = true;
                    }
                    break;
                case PvMode::AtQMax:
                    if (vm > g.v_set + kReleaseVoltageTol) {
                        modes[k] = PvMode::Voltage;
                        changed = true;
                    }
                    break;
                case PvMode::AtQMin:
                    if (vm < g.v_set - kReleaseVoltageTol) {
                        modes[k] = PvMode::Voltage;
                        changed = true;
                    }
                    break;
            }
        }
        if (!changed) {
            solution.q_limit_switches = clamped_buses(circuit, solution.pv_modes);
            return solution;
        }
        if (round >= opts_.q_toggle_cap) {
            solution.converged = false;
            solution.diagnostic = "reactive limit switching did not settle after " +
                                  std::to_string(opts_.q_toggle_cap) + " rounds";
            return solution;
        }

        const int spent = solution.iterations;
        const bool used_tx = solution.used_tx_stepping;
        PFSolution next = newton(circuit, solution.state, solution.pv_modes);
        next.iterations += spent;
        next.used_tx_stepping = used_tx;
        if (!next.converged && opts_.tx_stepping) {
            PFSolution tx = tx_stepping(circuit, solution.pv_modes);
            tx.iterations += next.iterations;
            next = std::move(tx);
        }
        if (!next.converged) {
            next.diagnostic = "re-solve after reactive limit switching failed: " + next.diagnostic;
            next.q_limit_switches = clamped_buses(circuit, next.pv_modes);
            return next;
        }
        solution = std::move(next);
    }
}

PFSolution SolveSession::robust(const SplitCircuit& circuit,
                                const std::optional<SplitCircuitState>& warm_start) {
    SplitCircuitState start = warm_start ? *warm_start : circuit.flat_start();
    PFSolution sol = newton(circuit, std::move(start), circuit.voltage_modes());
    if (!sol.converged && opts_.tx_stepping) {
        PFSolution tx = tx_stepping(circuit, circuit.voltage_modes());
        tx.iterations += sol.iterations;
        sol = std::move(tx);
    }
    if (sol.converged && opts_.enforce_q_limits) sol = enforce_q_limits(circuit, std::move(sol));
    return sol;
}

PFSolution newton_solve(const NetworkCase& c, const SplitCircuitState& init,
                        const SolverOptions& opts) {
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    return session.newton(circuit, init, circuit.voltage_modes());
}

PFSolution tx_stepping_solve(const NetworkCase& c, const SolverOptions& opts) {
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    return session.tx_stepping(circuit, circuit.voltage_modes());
}

PFSolution enforce_q_limits(const NetworkCase& c, const PFSolution& solution,
                            const SolverOptions& opts) {
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    return session.enforce_q_limits(circuit, solution);
}

PFSolution robust_solve(const NetworkCase& c, const std::optional<SplitCircuitState>& warm_start,
                        const SolverOptions& opts) {
    const SplitCircuit circuit(c);
    SolveSession session(opts);
    return session.robust(circuit, warm_start);
}

// ---------------------------------------------------------------------------

std::string to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::Normal: return "normal";
        case OutcomeKind::VoltageCollapse: return "voltage_collapse";
        case OutcomeKind::AngularUnstable: return "angular_unstable";
        case OutcomeKind::VoltageBandViolation: return "voltage_band_violation";
        case OutcomeKind::BranchOverload: return "branch_overload";
    }
    return "unknown";
}

std::optional<OutcomeKind> outcome_from_string(std::string_view text) {
    for (std::size_t i = 0; i < kOutcomeCount; ++i) {
        const auto k = static_cast<OutcomeKind>(i);
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

void LimitSpec::check() const {
    if (!(angle_max > 0.0) || angle_max > std::numbers::pi) {
        throw std::invalid_argument("angle_max must lie in (0, pi]");
    }
    if (v_min && v_max && !(*v_min < *v_max)) {
        throw std::invalid_argument("v_min must be below v_max");
    }
}

std::vector<BranchFlow> branch_flows(const NetworkCase& c, const SplitCircuitState& state) {
    const auto pos = c.bus_positions();
    std::vector<BranchFlow> out(c.branches.size());
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const Branch& br = c.branches[k];
        if (!br.in_service) continue;
        const BranchAdmittance y = branch_admittance(br);
        const Complex vf = state.voltage(pos.at(br.from));
        const Complex vt = state.voltage(pos.at(br.to));
        BranchFlow& f = out[k];
        f.i_from = y.yff * vf + y.yft * vt;
        f.i_to = y.ytf * vf + y.ytt * vt;
        f.s_from = vf * std::conj(f.i_from);
        f.s_to = vt * std::conj(f.i_to);
    }
    return out;
}

double branch_angle_difference(const NetworkCase& c, const SplitCircuitState& state,
                               std::size_t branch_index) {
    const Branch& br = c.branches.at(branch_index);
    const auto f = c.find_bus(br.from);
    const auto t = c.find_bus(br.to);
    if (!f || !t) throw std::out_of_range("branch references an unknown bus");
    return std::arg(state.voltage(*f) * std::conj(state.voltage(*t)));
}

OperatingClass classify(const NetworkCase& c, const PFSolution& solution, const LimitSpec& limits) {
    OperatingClass out;
    if (!solution.converged) {
        out.kind = OutcomeKind::VoltageCollapse;
        return out;
    }
    const auto pos = c.bus_positions();
    const SplitCircuitState& s = solution.state;

    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const Branch& br = c.branches[k];
        if (!br.in_service) continue;
        const Complex vf = s.voltage(pos.at(br.from));
        const Complex vt = s.voltage(pos.at(br.to));
        if (std::abs(std::arg(vf * std::conj(vt))) >= limits.angle_max) {
            out.angular_branches.push_back(k);
        }
    }
    if (limits.enforce_v_band) {
        for (std::size_t i = 0; i < c.buses.size(); ++i) {
            const Bus& b = c.buses[i];
            if (b.kind == BusKind::Isolated) continue;
            const double lo = limits.v_min.value_or(b.v_min);
            const double hi = limits.v_max.value_or(b.v_max);
            const double vm = std::abs(s.voltage(i));
            if (vm < lo || vm > hi) out.band_buses.push_back(b.id);
        }
    }
    if (limits.enforce_branch_rating) {
        const auto flows = branch_flows(c, s);
        for (std::size_t k = 0; k < c.branches.size(); ++k) {
            const Branch& br = c.branches[k];
            if (!br.in_service || !(br.rate_a > 0.0)) continue;
            const double s_max = std::max(std::abs(flows[k].s_from), std::abs(flows[k].s_to));
            if (s_max > br.rate_a) out.overloaded_branches.push_back(k);
        }
    }

    if (!out.angular_branches.empty()) {
        out.kind = OutcomeKind::AngularUnstable;
    } else if (!out.band_buses.empty()) {
        out.kind = OutcomeKind::VoltageBandViolation;
    } else if (!out.overloaded_branches.empty()) {
        out.kind = OutcomeKind::BranchOverload;
    } else {
        out.kind = OutcomeKind::Normal;
    }
    return out;
}

std::vector<GeneratorOutput> generator_outputs(const NetworkCase& c, const PFSolution& solution) {
    const SplitCircuit circuit(c);
    const IndexMap& index = circuit.index();
    const SplitCircuitState& s = solution.state;

    std::map<BusId, int> units;
    for (const auto& g : c.generators) {
        if (g.in_service) ++units[g.bus];
    }
    const Bus& slack = circuit.slack_bus();
    const Complex s_slack =
        s.voltage(index.slack_pos) * std::conj(Complex(s.slack_i_real, s.slack_i_imag));

    std::vector<GeneratorOutput> out;
    for (std::size_t i = 0; i < c.generators.size(); ++i) {
        const Generator& g = c.generators[i];
        if (!g.in_service) continue;
        GeneratorOutput o{i, g.bus, g.p_set, g.q_set};
        const auto pos = index.bus_pos.at(g.bus);
        const double share = 1.0 / units[g.bus];
        if (g.bus == slack.id) {
            o.p = s_slack.real() * share;
            o.q = s_slack.imag() * share;
        } else if (const int k = index.pv_of_bus[pos]; k >= 0) {
            o.q = s.q_gen[static_cast<std::size_t>(k)] * share;
        }
        out.push_back(o);
    }
    return out;
}

}  // namespace splitflow
