#pragma once

// Small hand-built networks and helpers shared by the test binaries.

#include <cmath>
#include <complex>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "splitflow/case_model.hpp"
#include "splitflow/equiv_circuit.hpp"
#include "splitflow/solver.hpp"

namespace fixtures {

inline std::string case_file(const std::string& name) {
    return std::string(SPLITFLOW_CASE_DIR) + "/" + name + ".m";
}

inline std::string test_data_file(const std::string& name) {
    return std::string(SPLITFLOW_TEST_DATA_DIR) + "/" + name;
}

inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Slack bus 1 feeding a PQ load at bus 2 through one line.
inline std::string two_bus_text(double p_mw = 50.0, double q_mvar = 20.0, double r = 0.01,
                                double x = 0.1) {
    return "function mpc = two_bus\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  2 1 " + num(p_mw) + " " + num(q_mvar) + " 0 0 1 1 0 0 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "  1 0 0 999 -999 1 100 1 999 0;\n"
           "];\n"
           "mpc.branch = [\n"
           "  1 2 " + num(r) + " " + num(x) + " 0 0 0 0 0 0 1 -360 360;\n"
           "];\n";
}

// Slack 1 - bus 2 - bus 3, load only at the far end.
inline std::string chain_text(double p_mw = 40.0, double q_mvar = 10.0) {
    return "function mpc = chain\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  2 1 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  3 1 " + num(p_mw) + " " + num(q_mvar) + " 0 0 1 1 0 0 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "  1 0 0 999 -999 1 100 1 999 0;\n"
           "];\n"
           "mpc.branch = [\n"
           "  1 2 0.01 0.05 0 0 0 0 0 0 1 -360 360;\n"
           "  2 3 0.02 0.08 0 0 0 0 0 0 1 -360 360;\n"
           "];\n";
}

// Triangle with a PV generator at bus 2 and a load at bus 3.
inline std::string pv_triangle_text(double q_max_mvar = 100.0, double q_min_mvar = -100.0,
                                    double load_scale = 1.0, double v_set = 1.02) {
    return "function mpc = pv_triangle\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  2 2 0 0 0 0 1 " + num(v_set) + " 0 0 1 1.1 0.9;\n"
           "  3 1 " + num(90.0 * load_scale) + " " + num(30.0 * load_scale) +
           " 0 0 1 1 0 0 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "  1 0 0 999 -999 1.0 100 1 999 0;\n"
           "  2 40 0 " + num(q_max_mvar) + " " + num(q_min_mvar) + " " + num(v_set) +
           " 100 1 200 0;\n"
           "];\n"
           "mpc.branch = [\n"
           "  1 2 0.01 0.08 0.02 0 0 0 0 0 1 -360 360;\n"
           "  1 3 0.02 0.10 0.02 0 0 0 0 0 1 -360 360;\n"
           "  2 3 0.015 0.09 0.02 0 0 0 0 0 1 -360 360;\n"
           "];\n";
}

// Three buses, no loads, no PV buses, no charging: the network is purely linear.
inline std::string linear_text() {
    return "function mpc = linear\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  2 1 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "  3 1 0 0 0 0 1 1 0 0 1 1.1 0.9;\n"
           "];\n"
           "mpc.gen = [\n"
           "  1 0 0 999 -999 1.03 100 1 999 0;\n"
           "];\n"
           "mpc.branch = [\n"
           "  1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n"
           "  2 3 0.02 0.1 0 0 0 0 0 0 1 -360 360;\n"
           "  1 3 0.03 0.2 0 0 0 0 0 0 1 -360 360;\n"
           "];\n";
}

/// Copy with every load multiplied by `factor`.
inline splitflow::NetworkCase scaled_loads(const splitflow::NetworkCase& c, double factor) {
    splitflow::NetworkCase out = c;
    for (auto& l : out.loads) {
        l.p_nom *= factor;
        l.q_nom *= factor;
    }
    return out;
}

/// Nodal admittance matrix built straight from the pi-model formulas,
/// kept separate from the stamping code on purpose.
inline std::vector<std::vector<std::complex<double>>> complex_ybus(const splitflow::NetworkCase& c) {
    using C = std::complex<double>;
    const auto pos = c.bus_positions();
    const std::size_t n = c.buses.size();
    std::vector<std::vector<C>> y(n, std::vector<C>(n, C{}));
    for (const auto& b : c.buses) {
        const std::size_t i = pos.at(b.id);
        y[i][i] += C(b.gs, b.bs);
    }
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const std::size_t f = pos.at(br.from);
        const std::size_t t = pos.at(br.to);
        const C z(br.r, br.x);
        const C ys = C(1.0) / z;
        const C charging(0.0, br.b / 2.0);
        const C ratio = std::polar(br.tap, br.shift);
        y[f][f] += (ys + charging) / std::norm(ratio);
        y[t][t] += ys + charging;
        y[f][t] += -ys / std::conj(ratio);
        y[t][f] += -ys / ratio;
    }
    return y;
}

/// Central finite-difference Jacobian of the residual.
inline std::vector<std::vector<double>> fd_jacobian(const splitflow::SplitCircuit& circuit,
                                                    const splitflow::SplitCircuitState& state,
                                                    std::span<const splitflow::PvMode> modes,
                                                    double g, double h = 1e-6) {
    const std::vector<double> x0 = circuit.pack(state);
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> jac(n, std::vector<double>(n, 0.0));
    splitflow::SplitCircuitState s = state;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> x = x0;
        x[j] = x0[j] + h;
        circuit.unpack(x, s);
        const auto fp = circuit.residual(s, modes, g);
        x[j] = x0[j] - h;
        circuit.unpack(x, s);
        const auto fm = circuit.residual(s, modes, g);
        for (std::size_t i = 0; i < n; ++i) jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    return jac;
}

/// Largest |stamped - finite difference| over all entries.
inline double jacobian_mismatch(const splitflow::SplitCircuit& circuit,
                                const splitflow::SplitCircuitState& state,
                                std::span<const splitflow::PvMode> modes, double g) {
    splitflow::StampAccumulator acc(circuit.index_ptr());
    circuit.assemble(state, modes, g, acc);
    const auto stamped = acc.dense();
    const auto fd = fd_jacobian(circuit, state, modes, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        for (std::size_t j = 0; j < fd.size(); ++j) {
            worst = std::max(worst, std::abs(stamped[i][j] - fd[i][j]));
        }
    }
    return worst;
}

/// State with |V| in [0.9, 1.1], angles within +/-0.3 rad and reactive
/// outputs within +/-1 pu.
inline splitflow::SplitCircuitState random_state(const splitflow::SplitCircuit& circuit,
                                                 std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.9, 1.1);
    std::uniform_real_distribution<double> ang(-0.3, 0.3);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    splitflow::SplitCircuitState s = circuit.flat_start();
    for (std::size_t i = 0; i < s.v_real.size(); ++i) {
        const auto v = std::polar(mag(rng), ang(rng));
        s.v_real[i] = v.real();
        s.v_imag[i] = v.imag();
    }
    for (double& q : s.q_gen) q = unit(rng);
    s.slack_i_real = unit(rng);
    s.slack_i_imag = unit(rng);
    return s;
}

struct ReferenceVoltage {
    splitflow::BusId bus = 0;
    double vm = 0.0;
    double va = 0.0;
};

inline std::vector<ReferenceVoltage> read_reference(const std::string& path) {
    std::vector<ReferenceVoltage> out;
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) return out;
    char line[256];
    bool header = true;
    while (std::fgets(line, sizeof line, f)) {
        if (header) {
            header = false;
            continue;
        }
        ReferenceVoltage r;
        if (std::sscanf(line, "%d,%lf,%lf", &r.bus, &r.vm, &r.va) == 3) out.push_back(r);
    }
    std::fclose(f);
    return out;
}

}  // namespace fixtures
