#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "splitflow/solver.hpp"

using namespace splitflow;
using C = std::complex<double>;

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_state_difference(const SplitCircuitState& a, const SplitCircuitState& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.v_real.size(); ++i) {
        m = std::max({m, std::abs(a.v_real[i] - b.v_real[i]), std::abs(a.v_imag[i] - b.v_imag[i])});
    }
    for (std::size_t i = 0; i < a.q_gen.size(); ++i) m = std::max(m, std::abs(a.q_gen[i] - b.q_gen[i]));
    return m;
}

SolverOptions no_q_limits() {
    SolverOptions o;
    o.enforce_q_limits = false;
    return o;
}

// Converged two-bus solution with the far-end voltage rotated to `angle`.
PFSolution with_far_angle(const NetworkCase& c, double angle) {
    PFSolution sol = robust_solve(c, std::nullopt, SolverOptions{});
    REQUIRE(sol.converged);
    const std::size_t p = c.bus_positions().at(2);
    const double vm = std::hypot(sol.state.v_real[p], sol.state.v_imag[p]);
    sol.state.v_real[p] = vm * std::cos(angle);
    sol.state.v_imag[p] = vm * std::sin(angle);
    return sol;
}

// Checks every property a converged solution must have.
void check_converged_solution(const NetworkCase& c, const PFSolution& sol, double tol) {
    REQUIRE(sol.converged);
    const SplitCircuit circuit(c);
    CHECK(max_abs(circuit.residual(sol.state, sol.pv_modes)) <= tol);
    const auto pv = circuit.pv_generators();
    for (std::size_t k = 0; k < pv.size(); ++k) {
        const double vm = std::abs(sol.state.voltage(pv[k].bus_pos));
        switch (sol.pv_modes[k]) {
            case PvMode::Voltage:
                CHECK(std::abs(vm - pv[k].v_set) <= 1e-6);
                break;
            case PvMode::AtQMax:
                CHECK(sol.state.q_gen[k] == pv[k].q_max);
                break;
            case PvMode::AtQMin:
                CHECK(sol.state.q_gen[k] == pv[k].q_min);
                break;
        }
    }
}

}  // namespace

TEST_CASE("two-bus fixture from flat start") {
    const double p = 0.5, q = 0.2;
    const C z(0.01, 0.1);
    const NetworkCase c = parse_matpower(fixtures::two_bus_text(100 * p, 100 * q, z.real(), z.imag()));
    const SplitCircuit circuit(c);
    const PFSolution sol = newton_solve(c, circuit.flat_start(), SolverOptions{});
    REQUIRE(sol.converged);
    CHECK(sol.iterations <= 6);
    CHECK(sol.residual_norm < 1e-8);
    CHECK_FALSE(sol.used_tx_stepping);

    C v2(1.0, 0.0);
    for (int k = 0; k < 200; ++k) v2 = 1.0 - z * std::conj(C(p, q) / v2);
    const C got = sol.state.voltage(c.bus_positions().at(2));
    CHECK(std::abs(got - v2) < 1e-8);
}

TEST_CASE("starting at the solution takes no corrective step") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    const SplitCircuit circuit(c);
    const PFSolution first = newton_solve(c, circuit.flat_start(), SolverOptions{});
    REQUIRE(first.converged);
    std::ostringstream trace;
    SolverOptions o;
    o.trace = &trace;
    const PFSolution again = newton_solve(c, first.state, o);
    CHECK(again.converged);
    CHECK(again.iterations <= 1);
    CHECK(trace.str().find("limited 1") == std::string::npos);
    CHECK(max_state_difference(first.state, again.state) < 1e-10);
}

TEST_CASE("IEEE 14-bus from flat start matches the reference solution") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    const SplitCircuit circuit(c);
    const PFSolution sol = newton_solve(c, circuit.flat_start(), SolverOptions{});
    REQUIRE(sol.converged);
    const auto ref = fixtures::read_reference(fixtures::test_data_file("case14_reference.csv"));
    REQUIRE(ref.size() == 14);
    const auto pos = c.bus_positions();
    for (const auto& r : ref) {
        const C v = sol.state.voltage(pos.at(r.bus));
        CHECK(std::abs(std::abs(v) - r.vm) < 1e-4);
        CHECK(std::abs(std::arg(v) - r.va) < 1e-4);
    }
}

TEST_CASE("voltage limiting does not move the fixed point") {
    for (const std::string& text : {fixtures::two_bus_text(), fixtures::pv_triangle_text()}) {
        const NetworkCase c = parse_matpower(text);
        SolverOptions unlimited;
        unlimited.v_limit_delta = 1e9;
        SolverOptions tight;
        tight.v_limit_delta = 0.01;
        const SplitCircuit circuit(c);
        const PFSolution a = newton_solve(c, circuit.flat_start(), unlimited);
        const PFSolution b = newton_solve(c, circuit.flat_start(), tight);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(max_state_difference(a.state, b.state) < 1e-8);
    }
    for (const char* name : {"case14", "case30", "case118"}) {
        CAPTURE(name);
        const NetworkCase c = load_matpower_file(fixtures::case_file(name));
        const SplitCircuit circuit(c);
        SolverOptions unlimited;
        unlimited.v_limit_delta = 1e9;
        const PFSolution a = newton_solve(c, circuit.flat_start(), unlimited);
        const PFSolution b = newton_solve(c, circuit.flat_start(), SolverOptions{});
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(max_state_difference(a.state, b.state) < 1e-8);
    }
}

TEST_CASE("limited variables are reported in the trace") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case118"));
    std::ostringstream trace;
    SolverOptions o;
    o.v_limit_delta = 0.05;
    o.max_iter = 100;
    o.trace = &trace;
    const PFSolution sol = newton_solve(c, SplitCircuit(c).flat_start(), o);
    CHECK(sol.converged);
    const std::string text = trace.str();
    CHECK(text.rfind("iter 1 mismatch ", 0) == 0);
    CHECK(text.find("limited 0") != std::string::npos);
    // The first step moves some angles by more than 0.05 pu.
    const std::string first_line = text.substr(0, text.find('\n'));
    CHECK(first_line.find("limited 0 ") == std::string::npos);
}

TEST_CASE("iteration cap yields a non-converged result with a diagnostic") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    SolverOptions o;
    o.max_iter = 1;
    const PFSolution sol = newton_solve(c, SplitCircuit(c).flat_start(), o);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK_FALSE(sol.diagnostic.empty());
}

TEST_CASE("mismatched start state is rejected") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    SplitCircuitState bad = SplitCircuit(c).flat_start();
    bad.v_real.pop_back();
    CHECK_THROWS(newton_solve(c, bad, SolverOptions{}));
}

TEST_CASE("option validation") {
    SolverOptions o;
    CHECK_NOTHROW(o.check());
    o.tol = 0.0;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
    o = SolverOptions{};
    o.max_iter = 0;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
    o = SolverOptions{};
    o.v_limit_delta = -1.0;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
    o = SolverOptions{};
    o.tx_g_init = 0.0;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
}

TEST_CASE("continuation schedule decreases strictly and ends at zero") {
    for (const TxSchedule kind : {TxSchedule::Geometric, TxSchedule::Linear}) {
        SolverOptions o;
        o.tx_schedule = kind;
        const auto levels = tx_schedule_levels(o);
        REQUIRE(levels.size() == static_cast<std::size_t>(o.tx_steps) + 1);
        CHECK(levels.front() == o.tx_g_init);
        CHECK(levels.back() == 0.0);
        for (std::size_t k = 1; k < levels.size(); ++k) CHECK(levels[k] < levels[k - 1]);
        if (kind == TxSchedule::Geometric) {
            CHECK(levels[levels.size() - 2] == doctest::Approx(o.tx_g_last));
        }
    }
}

TEST_CASE("shorted network stays close to the slack voltage") {
    std::vector<NetworkCase> cases = {parse_matpower(fixtures::two_bus_text()),
                                      parse_matpower(fixtures::chain_text()),
                                      parse_matpower(fixtures::pv_triangle_text())};
    for (const char* name : {"case14", "case30", "case118", "case145"}) {
        cases.push_back(load_matpower_file(fixtures::case_file(name)));
    }
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const SplitCircuit circuit(c);
        SolveSession session(SolverOptions{});
        const PFSolution step0 =
            session.newton(circuit, circuit.slack_start(), circuit.voltage_modes(), 1e3);
        REQUIRE(step0.converged);
        const C vs = step0.state.voltage(circuit.index().slack_pos);
        double worst = 0.0;
        for (std::size_t i = 0; i < c.buses.size(); ++i) {
            if (circuit.index().bus_row[i] < 0) continue;
            worst = std::max(worst, std::abs(step0.state.voltage(i) - vs));
        }
        CHECK(worst < 0.05);
    }
}

TEST_CASE("continuation ends on a solution of the original case") {
    for (const char* name : {"case14", "case30", "case118", "case145"}) {
        CAPTURE(name);
        const NetworkCase c = load_matpower_file(fixtures::case_file(name));
        const SolverOptions o = no_q_limits();
        const PFSolution sol = tx_stepping_solve(c, o);
        REQUIRE(sol.converged);
        CHECK(sol.used_tx_stepping);
        CHECK(max_abs(residual(c, sol.state)) <= o.tol);
    }
}

TEST_CASE("continuation failure records the step") {
    const NetworkCase c =
        fixtures::scaled_loads(load_matpower_file(fixtures::case_file("case14")), 10.0);
    const PFSolution sol = tx_stepping_solve(c, no_q_limits());
    CHECK_FALSE(sol.converged);
    CHECK(sol.used_tx_stepping);
    REQUIRE(sol.failed_tx_step.has_value());
    const auto levels = tx_schedule_levels(SolverOptions{});
    CHECK(sol.failed_tx_conductance == levels[static_cast<std::size_t>(*sol.failed_tx_step)]);
    CHECK_FALSE(sol.diagnostic.empty());
}

TEST_CASE("reactive limits: nothing to do when every generator is inside") {
    const NetworkCase c = parse_matpower(fixtures::pv_triangle_text(500, -500));
    const SolverOptions o;
    const PFSolution base = newton_solve(c, SplitCircuit(c).flat_start(), o);
    REQUIRE(base.converged);
    const PFSolution out = enforce_q_limits(c, base, o);
    CHECK(out.converged);
    CHECK(out.q_limit_switches.empty());
    CHECK(out.state.v_real == base.state.v_real);
    CHECK(out.state.v_imag == base.state.v_imag);
    CHECK(out.state.q_gen == base.state.q_gen);
}

TEST_CASE("reactive limits: a generator pushed past q_max is clamped") {
    const double v_set = 1.02;
    const NetworkCase free_case = parse_matpower(fixtures::pv_triangle_text(500, -500, 1.0, v_set));
    const PFSolution free_sol = newton_solve(free_case, SplitCircuit(free_case).flat_start(), SolverOptions{});
    REQUIRE(free_sol.converged);
    const double q_free = free_sol.state.q_gen[0];
    REQUIRE(q_free > 0.05);

    const double q_max = 0.5 * q_free;
    const NetworkCase c = parse_matpower(fixtures::pv_triangle_text(100 * q_max, -500, 1.0, v_set));
    const SolverOptions o;
    const PFSolution base = newton_solve(c, SplitCircuit(c).flat_start(), o);
    REQUIRE(base.converged);
    const PFSolution out = enforce_q_limits(c, base, o);
    REQUIRE(out.converged);
    REQUIRE(out.q_limit_switches.size() == 1);
    CHECK(out.q_limit_switches[0] == QLimitSwitch{2, QLimitSide::QMax});
    CHECK(out.pv_modes[0] == PvMode::AtQMax);
    CHECK(out.state.q_gen[0] == doctest::Approx(q_max).epsilon(1e-12));
    const double vm = std::abs(out.state.voltage(c.bus_positions().at(2)));
    CHECK(vm < v_set);
    check_converged_solution(c, out, o.tol);

    SUBCASE("re-running on its own output is a no-op") {
        const PFSolution again = enforce_q_limits(c, out, o);
        CHECK(again.converged);
        CHECK(again.q_limit_switches == out.q_limit_switches);
        CHECK(again.pv_modes == out.pv_modes);
        CHECK(max_state_difference(again.state, out.state) < 1e-12);
    }
}

TEST_CASE("reactive limits: a generator below q_min is clamped there") {
    const double v_set = 1.02;
    const NetworkCase free_case = parse_matpower(fixtures::pv_triangle_text(500, -500, 1.0, v_set));
    const PFSolution free_sol = newton_solve(free_case, SplitCircuit(free_case).flat_start(), SolverOptions{});
    REQUIRE(free_sol.converged);
    const double q_min = free_sol.state.q_gen[0] + 0.2;
    const NetworkCase c = parse_matpower(fixtures::pv_triangle_text(500, 100 * q_min, 1.0, v_set));
    const PFSolution out = robust_solve(c, std::nullopt, SolverOptions{});
    REQUIRE(out.converged);
    REQUIRE(out.q_limit_switches.size() == 1);
    CHECK(out.q_limit_switches[0].side == QLimitSide::QMin);
    CHECK(out.state.q_gen[0] == doctest::Approx(q_min).epsilon(1e-12));
    CHECK(std::abs(out.state.voltage(c.bus_positions().at(2))) > v_set);
}

TEST_CASE("converged robust solutions satisfy every solution property") {
    for (const char* name : {"case14", "case30", "case118", "case145"}) {
        CAPTURE(name);
        const NetworkCase c = load_matpower_file(fixtures::case_file(name));
        const SolverOptions o;
        const PFSolution sol = robust_solve(c, SplitCircuit(c).case_start(), o);
        check_converged_solution(c, sol, o.tol);
        // Every in-service generator ends inside its limits.
        const SplitCircuit circuit(c);
        for (std::size_t k = 0; k < circuit.pv_generators().size(); ++k) {
            const auto& g = circuit.pv_generators()[k];
            CHECK(sol.state.q_gen[k] <= g.q_max + o.q_tol);
            CHECK(sol.state.q_gen[k] >= g.q_min - o.q_tol);
        }
    }
}

TEST_CASE("power balance at the solution") {
    for (const char* name : {"case14", "case30", "case118"}) {
        CAPTURE(name);
        const NetworkCase c = load_matpower_file(fixtures::case_file(name));
        const PFSolution sol = robust_solve(c, std::nullopt, SolverOptions{});
        REQUIRE(sol.converged);
        double generation = 0.0;
        for (const auto& g : generator_outputs(c, sol)) generation += g.p;
        double load = 0.0;
        for (const auto& l : c.loads) load += l.p_nom;
        double losses = 0.0;
        for (const auto& f : branch_flows(c, sol.state)) losses += (f.s_from + f.s_to).real();
        double shunt = 0.0;
        const auto pos = c.bus_positions();
        for (const auto& b : c.buses) shunt += b.gs * std::norm(sol.state.voltage(pos.at(b.id)));
        CHECK(losses >= 0.0);
        CHECK(std::abs(generation - load - losses - shunt) < 1e-6);
    }
}

TEST_CASE("robust solve picks the cheapest path that works") {
    const NetworkCase easy = load_matpower_file(fixtures::case_file("case14"));
    const PFSolution warm = robust_solve(easy, SplitCircuit(easy).case_start(), SolverOptions{});
    CHECK(warm.converged);
    CHECK_FALSE(warm.used_tx_stepping);

    // case118 loses plain Newton from flat start near its loadability limit
    // (about 1.8165 times nominal load, found by bisection).
    const NetworkCase base = load_matpower_file(fixtures::case_file("case118"));
    const SolverOptions o = no_q_limits();
    const NetworkCase heavy = fixtures::scaled_loads(base, 1.80);
    CHECK_FALSE(newton_solve(heavy, SplitCircuit(heavy).flat_start(), o).converged);
    const PFSolution rescued = robust_solve(heavy, std::nullopt, o);
    CHECK(rescued.converged);
    CHECK(rescued.used_tx_stepping);

    const NetworkCase beyond = fixtures::scaled_loads(base, 1.85);
    CHECK_FALSE(robust_solve(beyond, std::nullopt, o).converged);
}

TEST_CASE("classification") {
    NetworkCase c = parse_matpower(fixtures::two_bus_text());
    const LimitSpec limits;
    const PFSolution sol = robust_solve(c, std::nullopt, SolverOptions{});
    REQUIRE(sol.converged);

    SUBCASE("healthy solution is normal") {
        const OperatingClass cls = classify(c, sol, limits);
        CHECK(cls.kind == OutcomeKind::Normal);
        CHECK(cls == OperatingClass{});
        CHECK(classify(c, sol, limits) == cls);
    }
    SUBCASE("non-converged result is a collapse") {
        PFSolution failed = sol;
        failed.converged = false;
        CHECK(classify(c, failed, limits).kind == OutcomeKind::VoltageCollapse);
    }
    SUBCASE("91 degrees across a branch with a 90 degree limit") {
        const PFSolution rotated = with_far_angle(c, -91.0 * std::numbers::pi / 180.0);
        const OperatingClass cls = classify(c, rotated, limits);
        CHECK(cls.kind == OutcomeKind::AngularUnstable);
        CHECK(cls.angular_branches == std::vector<std::size_t>{0});
    }
    SUBCASE("exactly at the limit counts as unstable") {
        const double limit = 40.0 * std::numbers::pi / 180.0;
        LimitSpec l;
        l.angle_max = limit;
        const PFSolution at = with_far_angle(c, -limit);
        CHECK(std::abs(branch_angle_difference(c, at.state, 0) - limit) < 1e-12);
        CHECK(classify(c, with_far_angle(c, -1.01 * limit), l).kind == OutcomeKind::AngularUnstable);
        CHECK(classify(c, with_far_angle(c, -0.99 * limit), l).kind == OutcomeKind::Normal);
    }
    SUBCASE("voltage band") {
        LimitSpec l;
        l.v_min = 0.99;
        const OperatingClass cls = classify(c, sol, l);
        CHECK(cls.kind == OutcomeKind::VoltageBandViolation);
        CHECK(cls.band_buses == std::vector<BusId>{2});
        l.enforce_v_band = false;
        CHECK(classify(c, sol, l).kind == OutcomeKind::Normal);
    }
    SUBCASE("branch rating") {
        c.branches[0].rate_a = 0.3;   // flow is about 0.54 pu
        const OperatingClass cls = classify(c, sol, limits);
        CHECK(cls.kind == OutcomeKind::BranchOverload);
        CHECK(cls.overloaded_branches == std::vector<std::size_t>{0});
        LimitSpec l;
        l.enforce_branch_rating = false;
        CHECK(classify(c, sol, l).kind == OutcomeKind::Normal);
    }
    SUBCASE("priority with every violation present") {
        c.branches[0].rate_a = 0.3;
        LimitSpec l;
        l.v_min = 0.99;
        const PFSolution rotated = with_far_angle(c, -1.6);
        const OperatingClass cls = classify(c, rotated, l);
        CHECK(cls.kind == OutcomeKind::AngularUnstable);
        CHECK(cls.angular_branches == std::vector<std::size_t>{0});
        CHECK(cls.band_buses == std::vector<BusId>{2});
        CHECK(cls.overloaded_branches == std::vector<std::size_t>{0});
    }
}

TEST_CASE("limit validation and outcome names") {
    LimitSpec l;
    CHECK_NOTHROW(l.check());
    l.angle_max = 0.0;
    CHECK_THROWS_AS(l.check(), std::invalid_argument);
    l.angle_max = 4.0;
    CHECK_THROWS_AS(l.check(), std::invalid_argument);
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        const auto kind = static_cast<OutcomeKind>(k);
        CHECK(outcome_from_string(to_string(kind)) == kind);
    }
    CHECK_FALSE(outcome_from_string("bogus").has_value());
}

TEST_CASE("generator dispatch") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    const PFSolution sol = robust_solve(c, std::nullopt, SolverOptions{});
    REQUIRE(sol.converged);
    const auto gens = generator_outputs(c, sol);
    CHECK(gens.size() == 5);
    // MATPOWER's published solution puts 232.4 MW on the slack.
    CHECK(gens[0].bus == 1);
    CHECK(gens[0].p * c.base_mva == doctest::Approx(232.39).epsilon(1e-3));
    for (std::size_t i = 1; i < gens.size(); ++i) {
        CHECK(gens[i].p == c.generators[gens[i].index].p_set);
    }
}
