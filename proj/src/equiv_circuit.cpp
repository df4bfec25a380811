#include "splitflow/equiv_circuit.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>

namespace splitflow {

namespace {

struct Rows {
    int re;
    int im;
};

Rows rows_of(const IndexMap& index, BusId bus) {
    const int r = index.row_of(bus);
    return {r, r + 1};
}

double voltage_norm_sq(double vr, double vi) { return vr * vr + vi * vi; }

// Companion model of an element contributing +I(V) to the KCL rows of one
// bus, where I and its partials are evaluated at the iterate.
void stamp_nonlinear_current(StampAccumulator& acc, Rows rows, double vr, double vi,
                             const LoadCurrent& i, const LoadPartials& d, double sign) {
    acc.add(rows.re, rows.re, sign * d.dir_dvr);
    acc.add(rows.re, rows.im, sign * d.dir_dvi);
    acc.add(rows.im, rows.re, sign * d.dii_dvr);
    acc.add(rows.im, rows.im, sign * d.dii_dvi);
    acc.add_rhs(rows.re, sign * (d.dir_dvr * vr + d.dir_dvi * vi - i.real));
    acc.add_rhs(rows.im, sign * (d.dii_dvr * vr + d.dii_dvi * vi - i.imag));
}

// Real decomposition of a complex admittance coupling voltage columns
// `cols` into current rows `rows`: [[G, -B], [B, G]].
void stamp_admittance(StampAccumulator& acc, Rows rows, Rows cols, Complex y) {
    acc.add(rows.re, cols.re, y.real());
    acc.add(rows.re, cols.im, -y.imag());
    acc.add(rows.im, cols.re, y.imag());
    acc.add(rows.im, cols.im, y.real());
}

bool branch_active(const IndexMap& index, const Branch& br) {
    return br.in_service && index.row_of(br.from) >= 0 && index.row_of(br.to) >= 0;
}

}  // namespace

SingularPointError::SingularPointError(BusId bus)
    : std::domain_error(bus >= 0 ? "zero voltage at bus " + std::to_string(bus)
                                 : std::string("zero voltage")),
      bus_(bus) {}

LoadCurrent load_current(double v_real, double v_imag, double p, double q) {
    const double d = voltage_norm_sq(v_real, v_imag);
    if (d == 0.0) throw SingularPointError();
    return {(p * v_real + q * v_imag) / d, (p * v_imag - q * v_real) / d};
}

LoadPartials load_current_partials(double v_real, double v_imag, double p, double q) {
    const double d = voltage_norm_sq(v_real, v_imag);
    if (d == 0.0) throw SingularPointError();
    const double d2 = d * d;
    const double nr = p * v_real + q * v_imag;
    const double ni = p * v_imag - q * v_real;
    return {
        p / d - 2.0 * v_real * nr / d2,
        q / d - 2.0 * v_imag * nr / d2,
        -q / d - 2.0 * v_real * ni / d2,
        p / d - 2.0 * v_imag * ni / d2,
    };
}

int IndexMap::row_of(BusId bus) const {
    const auto it = bus_pos.find(bus);
    if (it == bus_pos.end()) return -1;
    return bus_row[it->second];
}

// ---------------------------------------------------------------------------

StampAccumulator::StampAccumulator(std::shared_ptr<const IndexMap> index)
    : index_(std::move(index)), rhs_(index_->dimension, 0.0) {}

void StampAccumulator::add(int row, int col, double value) {
    triplets_.push_back({row, col, value});
}

void StampAccumulator::clear() {
    triplets_.clear();
    rhs_.assign(index_->dimension, 0.0);
}

std::vector<std::vector<double>> StampAccumulator::dense() const {
    const std::size_t n = dimension();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (const auto& t : triplets_) {
        m[static_cast<std::size_t>(t.row)][static_cast<std::size_t>(t.col)] += t.value;
    }
    return m;
}

// ---------------------------------------------------------------------------

void stamp_pq_load(StampAccumulator& acc, const Load& load, const SplitCircuitState& state) {
    const IndexMap& index = acc.index();
    const auto pos_it = index.bus_pos.find(load.bus);
    if (pos_it == index.bus_pos.end() || index.bus_row[pos_it->second] < 0) return;
    const std::size_t pos = pos_it->second;
    const double vr = state.v_real[pos];
    const double vi = state.v_imag[pos];
    if (voltage_norm_sq(vr, vi) == 0.0) throw SingularPointError(load.bus);
    stamp_nonlinear_current(acc, rows_of(index, load.bus), vr, vi,
                            load_current(vr, vi, load.p_nom, load.q_nom),
                            load_current_partials(vr, vi, load.p_nom, load.q_nom), 1.0);
}

void stamp_fixed_injection(StampAccumulator& acc, const FixedInjection& inj,
                           const SplitCircuitState& state) {
    // An injection of S is a load of -S.
    stamp_pq_load(acc, Load{inj.bus, -inj.p, -inj.q}, state);
}

void stamp_pv_generator(StampAccumulator& acc, const PvGenerator& gen, std::size_t pv_ordinal,
                        PvMode mode, const SplitCircuitState& state) {
    const IndexMap& index = acc.index();
    const Rows rows = rows_of(index, gen.bus);
    const int q_col = index.pv_row[pv_ordinal];
    const double vr = state.v_real[gen.bus_pos];
    const double vi = state.v_imag[gen.bus_pos];
    const double q = state.q_gen[pv_ordinal];
    const double d = voltage_norm_sq(vr, vi);
    if (d == 0.0) throw SingularPointError(gen.bus);

    // Injection: KCL gets -I(V, P, Q) with Q a state variable.
    const LoadCurrent i = load_current(vr, vi, gen.p_set, q);
    const LoadPartials dv = load_current_partials(vr, vi, gen.p_set, q);
    const double dir_dq = vi / d;
    const double dii_dq = -vr / d;
    acc.add(rows.re, rows.re, -dv.dir_dvr);
    acc.add(rows.re, rows.im, -dv.dir_dvi);
    acc.add(rows.re, q_col, -dir_dq);
    acc.add(rows.im, rows.re, -dv.dii_dvr);
    acc.add(rows.im, rows.im, -dv.dii_dvi);
    acc.add(rows.im, q_col, -dii_dq);
    acc.add_rhs(rows.re, -(dv.dir_dvr * vr + dv.dir_dvi * vi + dir_dq * q) + i.real);
    acc.add_rhs(rows.im, -(dv.dii_dvr * vr + dv.dii_dvi * vi + dii_dq * q) + i.imag);

    switch (mode) {
        case PvMode::Voltage:
            // V_R^2 + V_I^2 - V_m^2 = 0, linearized
            acc.add(q_col, rows.re, 2.0 * vr);
            acc.add(q_col, rows.im, 2.0 * vi);
            acc.add_rhs(q_col, d + gen.v_set * gen.v_set);
            break;
        case PvMode::AtQMax:
            acc.add(q_col, q_col, 1.0);
            acc.add_rhs(q_col, gen.q_max);
            break;
        case PvMode::AtQMin:
            acc.add(q_col, q_col, 1.0);
            acc.add_rhs(q_col, gen.q_min);
            break;
    }
}

BranchAdmittance branch_admittance(const Branch& br) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex t = std::polar(br.tap, br.shift);
    const Complex ytt = ys + Complex(0.0, br.b / 2.0);
    return {ytt / (br.tap * br.tap), -ys / std::conj(t), -ys / t, ytt};
}

void stamp_branch(StampAccumulator& acc, const Branch& branch) {
    const IndexMap& index = acc.index();
    if (!branch_active(index, branch)) return;
    if (branch.r == 0.0 && branch.x == 0.0) {
        throw std::invalid_argument("zero-impedance branch " + std::to_string(branch.from) + "-" +
                                    std::to_string(branch.to));
    }
    const BranchAdmittance y = branch_admittance(branch);
    const Rows f = rows_of(index, branch.from);
    const Rows t = rows_of(index, branch.to);
    stamp_admittance(acc, f, f, y.yff);
    stamp_admittance(acc, f, t, y.yft);
    stamp_admittance(acc, t, f, y.ytf);
    stamp_admittance(acc, t, t, y.ytt);
}

Complex shorting_admittance(double g) {
    static const Complex unit = Complex(1.0, -kShortingXOverR) / std::hypot(1.0, kShortingXOverR);
    return g * unit;
}

void stamp_shorting_admittance(StampAccumulator& acc, const Branch& branch, double g) {
    const IndexMap& index = acc.index();
    if (!branch_active(index, branch)) return;
    const Complex y = shorting_admittance(g);
    const Rows f = rows_of(index, branch.from);
    const Rows t = rows_of(index, branch.to);
    stamp_admittance(acc, f, f, y);
    stamp_admittance(acc, f, t, -y);
    stamp_admittance(acc, t, f, -y);
    stamp_admittance(acc, t, t, y);
}

void stamp_shunt(StampAccumulator& acc, const Bus& bus) {
    if (bus.gs == 0.0 && bus.bs == 0.0) return;
    const int r = acc.index().row_of(bus.id);
    if (r < 0) return;
    const Rows rows{r, r + 1};
    stamp_admittance(acc, rows, rows, Complex(bus.gs, bus.bs));
}

void stamp_slack(StampAccumulator& acc, const Bus& bus) {
    // Ideal voltage source with its current as an extra unknown; the
    // constraint rows mirror the KCL coupling so the pattern is symmetric.
    const IndexMap& index = acc.index();
    const Rows v = rows_of(index, bus.id);
    const int s = index.slack_row;
    acc.add(v.re, s, -1.0);
    acc.add(v.im, s + 1, -1.0);
    acc.add(s, v.re, -1.0);
    acc.add(s + 1, v.im, -1.0);
    acc.add_rhs(s, -bus.v_set * std::cos(bus.angle_set));
    acc.add_rhs(s + 1, -bus.v_set * std::sin(bus.angle_set));
}

// ---------------------------------------------------------------------------

SplitCircuit::SplitCircuit(const NetworkCase& c)
    : SplitCircuit(std::make_shared<const NetworkCase>(c)) {}

SplitCircuit::SplitCircuit(std::shared_ptr<const NetworkCase> c) : case_(std::move(c)) {
    const NetworkCase& nc = *case_;
    auto index = std::make_shared<IndexMap>();
    index->bus_pos = nc.bus_positions();
    index->bus_row.assign(nc.buses.size(), -1);
    index->pv_of_bus.assign(nc.buses.size(), -1);

    int row = 0;
    bool have_slack = false;
    for (std::size_t i = 0; i < nc.buses.size(); ++i) {
        const Bus& b = nc.buses[i];
        if (b.kind == BusKind::Isolated) continue;
        index->bus_row[i] = row;
        row += 2;
        if (b.kind == BusKind::Slack) {
            if (have_slack) throw std::invalid_argument("more than one slack bus");
            have_slack = true;
            index->slack_pos = i;
        }
    }
    if (!have_slack) throw std::invalid_argument("case has no slack bus");

    // Aggregate in-service generators per bus.
    std::map<std::size_t, PvGenerator> agg;
    for (const auto& g : nc.generators) {
        if (!g.in_service) continue;
        const auto it = index->bus_pos.find(g.bus);
        if (it == index->bus_pos.end()) continue;
        const Bus& b = nc.buses[it->second];
        if (b.kind == BusKind::PV) {
            auto& pv = agg[it->second];
            if (pv.unit_count == 0) {
                pv.bus = b.id;
                pv.bus_pos = it->second;
                pv.v_set = b.v_set;
            }
            pv.p_set += g.p_set;
            pv.q_min += g.q_min;
            pv.q_max += g.q_max;
            ++pv.unit_count;
        } else if (b.kind == BusKind::PQ) {
            fixed_.push_back({g.bus, g.p_set, g.q_set});
        }
    }
    for (auto& [pos, pv] : agg) {
        index->pv_of_bus[pos] = static_cast<int>(pv_.size());
        index->pv_row.push_back(row++);
        pv_.push_back(pv);
    }
    index->slack_row = row;
    row += 2;
    index->dimension = static_cast<std::size_t>(row);
    index_ = std::move(index);
}

double continuation_setpoint(double v_set, double v_slack, double tx_conductance) {
    return v_slack + (v_set - v_slack) / (1.0 + tx_conductance / kSetpointBlendConductance);
}

void SplitCircuit::assemble(const SplitCircuitState& state, std::span<const PvMode> modes,
                            double tx_conductance, StampAccumulator& acc) const {
    const NetworkCase& nc = *case_;
    for (const auto& br : nc.branches) {
        stamp_branch(acc, br);
        if (tx_conductance > 0.0) stamp_shorting_admittance(acc, br, tx_conductance);
    }
    for (const auto& b : nc.buses) stamp_shunt(acc, b);
    for (const auto& l : nc.loads) stamp_pq_load(acc, l, state);
    for (const auto& f : fixed_) stamp_fixed_injection(acc, f, state);
    for (std::size_t k = 0; k < pv_.size(); ++k) {
        if (tx_conductance > 0.0) {
            PvGenerator relaxed = pv_[k];
            relaxed.v_set = continuation_setpoint(pv_[k].v_set, slack_bus().v_set, tx_conductance);
            stamp_pv_generator(acc, relaxed, k, modes[k], state);
        } else {
            stamp_pv_generator(acc, pv_[k], k, modes[k], state);
        }
    }
    stamp_slack(acc, slack_bus());
}

std::vector<double> SplitCircuit::residual(const SplitCircuitState& state,
                                           std::span<const PvMode> modes,
                                           double tx_conductance) const {
    const NetworkCase& nc = *case_;
    const IndexMap& index = *index_;
    std::vector<double> f(index.dimension, 0.0);
    auto add_current = [&](int row, Complex i) {
        f[static_cast<std::size_t>(row)] += i.real();
        f[static_cast<std::size_t>(row) + 1] += i.imag();
    };
    auto voltage_of = [&](BusId id) { return state.voltage(index.bus_pos.at(id)); };

    for (const auto& br : nc.branches) {
        if (!branch_active(index, br)) continue;
        const BranchAdmittance y = branch_admittance(br);
        const Complex vf = voltage_of(br.from);
        const Complex vt = voltage_of(br.to);
        Complex i_f = y.yff * vf + y.yft * vt;
        Complex i_t = y.ytf * vf + y.ytt * vt;
        if (tx_conductance > 0.0) {
            const Complex ys = shorting_admittance(tx_conductance);
            i_f += ys * (vf - vt);
            i_t += ys * (vt - vf);
        }
        add_current(index.row_of(br.from), i_f);
        add_current(index.row_of(br.to), i_t);
    }
    for (std::size_t i = 0; i < nc.buses.size(); ++i) {
        const Bus& b = nc.buses[i];
        if (index.bus_row[i] < 0 || (b.gs == 0.0 && b.bs == 0.0)) continue;
        add_current(index.bus_row[i], Complex(b.gs, b.bs) * state.voltage(i));
    }
    auto power_current = [&](BusId bus, double p, double q) {
        const Complex v = voltage_of(bus);
        if (std::norm(v) == 0.0) throw SingularPointError(bus);
        return std::conj(Complex(p, q) / v);
    };
    for (const auto& l : nc.loads) {
        const int r = index.row_of(l.bus);
        if (r < 0) continue;
        add_current(r, power_current(l.bus, l.p_nom, l.q_nom));
    }
    for (const auto& inj : fixed_) {
        add_current(index.row_of(inj.bus), -power_current(inj.bus, inj.p, inj.q));
    }
    for (std::size_t k = 0; k < pv_.size(); ++k) {
        const PvGenerator& g = pv_[k];
        const double q = state.q_gen[k];
        add_current(index.row_of(g.bus), -power_current(g.bus, g.p_set, q));
        const auto row = static_cast<std::size_t>(index.pv_row[k]);
        switch (modes[k]) {
            case PvMode::Voltage: {
                const double vm = tx_conductance > 0.0
                                      ? continuation_setpoint(g.v_set, nc.buses[index.slack_pos].v_set,
                                                              tx_conductance)
                                      : g.v_set;
                f[row] = std::norm(state.voltage(g.bus_pos)) - vm * vm;
                break;
            }
            case PvMode::AtQMax: f[row] = q - g.q_max; break;
            case PvMode::AtQMin: f[row] = q - g.q_min; break;
        }
    }
    const Bus& sb = slack_bus();
    add_current(index.bus_row[index.slack_pos], -Complex(state.slack_i_real, state.slack_i_imag));
    const auto s = static_cast<std::size_t>(index.slack_row);
    const Complex vs = state.voltage(index.slack_pos);
    f[s] = sb.v_set * std::cos(sb.angle_set) - vs.real();
    f[s + 1] = sb.v_set * std::sin(sb.angle_set) - vs.imag();
    return f;
}

std::vector<double> SplitCircuit::pack(const SplitCircuitState& state) const {
    const IndexMap& index = *index_;
    std::vector<double> x(index.dimension, 0.0);
    for (std::size_t i = 0; i < index.bus_row.size(); ++i) {
        const int r = index.bus_row[i];
        if (r < 0) continue;
        x[static_cast<std::size_t>(r)] = state.v_real[i];
        x[static_cast<std::size_t>(r) + 1] = state.v_imag[i];
    }
    for (std::size_t k = 0; k < pv_.size(); ++k) {
        x[static_cast<std::size_t>(index.pv_row[k])] = state.q_gen[k];
    }
    x[static_cast<std::size_t>(index.slack_row)] = state.slack_i_real;
    x[static_cast<std::size_t>(index.slack_row) + 1] = state.slack_i_imag;
    return x;
}

void SplitCircuit::unpack(std::span<const double> x, SplitCircuitState& state) const {
    const IndexMap& index = *index_;
    state.v_real.resize(index.bus_row.size(), 0.0);
    state.v_imag.resize(index.bus_row.size(), 0.0);
    state.q_gen.resize(pv_.size(), 0.0);
    for (std::size_t i = 0; i < index.bus_row.size(); ++i) {
        const int r = index.bus_row[i];
        if (r < 0) continue;
        state.v_real[i] = x[static_cast<std::size_t>(r)];
        state.v_imag[i] = x[static_cast<std::size_t>(r) + 1];
    }
    for (std::size_t k = 0; k < pv_.size(); ++k) {
        state.q_gen[k] = x[static_cast<std::size_t>(index.pv_row[k])];
    }
    state.slack_i_real = x[static_cast<std::size_t>(index.slack_row)];
    state.slack_i_imag = x[static_cast<std::size_t>(index.slack_row) + 1];
}

namespace {

double q_midpoint(const PvGenerator& g) {
    if (!std::isfinite(g.q_min) || !std::isfinite(g.q_max)) return 0.0;
    return 0.5 * (g.q_min + g.q_max);
}

}  // namespace

SplitCircuitState SplitCircuit::flat_start() const {
    const NetworkCase& nc = *case_;
    SplitCircuitState s;
    s.v_real.assign(nc.buses.size(), 0.0);
    s.v_imag.assign(nc.buses.size(), 0.0);
    for (std::size_t i = 0; i < nc.buses.size(); ++i) {
        const Bus& b = nc.buses[i];
        switch (b.kind) {
            case BusKind::PQ: s.v_real[i] = 1.0; break;
            case BusKind::PV: s.v_real[i] = index_->pv_of_bus[i] >= 0 ? b.v_set : 1.0; break;
            case BusKind::Slack:
                s.v_real[i] = b.v_set * std::cos(b.angle_set);
                s.v_imag[i] = b.v_set * std::sin(b.angle_set);
                break;
            case BusKind::Isolated: break;
        }
    }
    s.q_gen.resize(pv_.size());
    for (std::size_t k = 0; k < pv_.size(); ++k) s.q_gen[k] = q_midpoint(pv_[k]);
    return s;
}

SplitCircuitState SplitCircuit::slack_start() const {
    const NetworkCase& nc = *case_;
    const Bus& sb = slack_bus();
    const Complex vs = std::polar(sb.v_set, sb.angle_set);
    SplitCircuitState s;
    s.v_real.assign(nc.buses.size(), 0.0);
    s.v_imag.assign(nc.buses.size(), 0.0);
    for (std::size_t i = 0; i < nc.buses.size(); ++i) {
        if (index_->bus_row[i] < 0) continue;
        s.v_real[i] = vs.real();
        s.v_imag[i] = vs.imag();
    }
    s.q_gen.resize(pv_.size());
    for (std::size_t k = 0; k < pv_.size(); ++k) s.q_gen[k] = q_midpoint(pv_[k]);
    return s;
}

SplitCircuitState SplitCircuit::case_start() const {
    const NetworkCase& nc = *case_;
    SplitCircuitState s;
    s.v_real.assign(nc.buses.size(), 0.0);
    s.v_imag.assign(nc.buses.size(), 0.0);
    for (std::size_t i = 0; i < nc.buses.size(); ++i) {
        const Bus& b = nc.buses[i];
        if (index_->bus_row[i] < 0) continue;
        double vm = b.vm_init > 0.0 ? b.vm_init : 1.0;
        if (index_->pv_of_bus[i] >= 0) vm = b.v_set;
        double va = b.va_init;
        if (b.kind == BusKind::Slack) {
            vm = b.v_set;
            va = b.angle_set;
        }
        const Complex v = std::polar(vm, va);
        s.v_real[i] = v.real();
        s.v_imag[i] = v.imag();
    }
    s.q_gen.resize(pv_.size());
    // Sum of file Qg per bus, a better guess than the midpoint.
    std::vector<double> qg(nc.buses.size(), 0.0);
    for (const auto& g : nc.generators) {
        if (!g.in_service) continue;
        if (const auto it = index_->bus_pos.find(g.bus); it != index_->bus_pos.end()) {
            qg[it->second] += g.q_set;
        }
    }
    for (std::size_t k = 0; k < pv_.size(); ++k) s.q_gen[k] = qg[pv_[k].bus_pos];
    return s;
}

std::vector<double> residual(const NetworkCase& c, const SplitCircuitState& state) {
    const SplitCircuit circuit(c);
    const auto modes = circuit.voltage_modes();
    return circuit.residual(state, modes);
}

void write_matrix_market(const StampAccumulator& acc, std::ostream& out) {
    std::map<std::pair<int, int>, double> entries;
    for (const auto& t : acc.triplets()) entries[{t.row, t.col}] += t.value;
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << acc.dimension() << ' ' << acc.dimension() << ' ' << entries.size() << '\n';
    out.precision(17);
    for (const auto& [rc, v] : entries) {
        out << rc.first + 1 << ' ' << rc.second + 1 << ' ' << v << '\n';
    }
}

}  // namespace splitflow
