#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "splitflow/montecarlo.hpp"
#include "splitflow/report_io.hpp"

using namespace splitflow;

namespace {

// Outcome stub: collapse with probability p, independent of the network.
EvaluatorFactory bernoulli_stub(double p) {
    return [p]() -> SampleEvaluator {
        return [p](std::size_t index, std::mt19937_64& rng) {
            SampleResult r;
            r.index = index;
            std::bernoulli_distribution coin(p);
            if (coin(rng)) {
                r.outcome.kind = OutcomeKind::VoltageCollapse;
            } else {
                r.outcome.kind = OutcomeKind::Normal;
                r.probe_values = {std::uniform_real_distribution<double>(0.9, 1.1)(rng)};
            }
            return r;
        };
    };
}

const ClassSummary& summary(const StudyReport& r, OutcomeKind kind) {
    return r.classes[static_cast<std::size_t>(kind)];
}

std::size_t count_sum(const StudyReport& r) {
    std::size_t s = 0;
    for (const auto& c : r.classes) s += c.count;
    return s;
}

}  // namespace

TEST_CASE("per-sample streams are reproducible and distinct") {
    auto a = rng_for_sample(17, 3);
    auto b = rng_for_sample(17, 3);
    for (int i = 0; i < 1000; ++i) CHECK(a() == b());
    CHECK(rng_for_sample(17, 0)() != rng_for_sample(17, 1)());
    CHECK(rng_for_sample(17, 0)() != rng_for_sample(18, 0)());
    // High words of seed and index both matter.
    CHECK(rng_for_sample(1ULL << 40, 0)() != rng_for_sample(0, 0)());
    CHECK(rng_for_sample(0, 1ULL << 40)() != rng_for_sample(0, 0)());
}

TEST_CASE("near-zero width leaves loads at nominal") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    auto rng = rng_for_sample(1, 0);
    const NetworkCase s = sample_loads(c, UncertaintySpec::normal(1e-10), rng);
    for (std::size_t i = 0; i < c.loads.size(); ++i) {
        CHECK(std::abs(s.loads[i].p_nom - c.loads[i].p_nom) <= 1e-10);
        CHECK(std::abs(s.loads[i].q_nom - c.loads[i].q_nom) <= 1e-10);
    }
}

TEST_CASE("normal draws have the requested mean and spread") {
    const NetworkCase c = parse_matpower(fixtures::two_bus_text(50.0, 20.0));
    const double p_nom = c.loads[0].p_nom;
    const double sigma = 0.01 * p_nom;
    const std::size_t n = 100000;
    auto rng = rng_for_sample(7, 0);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = sample_loads(c, UncertaintySpec::normal(1.0), rng).loads[0].p_nom;
        sum += p;
        sum_sq += p * p;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum_sq / n - mean * mean);
    CHECK(std::abs(mean - p_nom) <= 3.0 * sigma / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(sd - sigma) <= 0.02 * sigma);
}

TEST_CASE("uniform draws respect their support") {
    const NetworkCase c = parse_matpower(fixtures::two_bus_text(50.0, 20.0));
    const double p_nom = c.loads[0].p_nom;
    const double q_nom = c.loads[0].q_nom;
    auto rng = rng_for_sample(8, 0);
    double lo = 2.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const Load l = sample_loads(c, UncertaintySpec::uniform(3.0), rng).loads[0];
        CHECK((l.p_nom >= 0.97 * p_nom && l.p_nom <= 1.03 * p_nom));
        CHECK((l.q_nom >= 0.97 * q_nom && l.q_nom <= 1.03 * q_nom));
        lo = std::min(lo, l.p_nom / p_nom);
        hi = std::max(hi, l.p_nom / p_nom);
    }
    // The draws fill the range.
    CHECK(lo < 0.971);
    CHECK(hi > 1.029);
}

TEST_CASE("draws are consumed in bus order, P before Q") {
    NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    std::reverse(c.loads.begin(), c.loads.end());
    auto rng = rng_for_sample(3, 9);
    auto mirror = rng_for_sample(3, 9);
    const NetworkCase s = sample_loads(c, UncertaintySpec::normal(2.0), rng);

    std::vector<std::size_t> order(c.loads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return c.loads[a].bus < c.loads[b].bus; });
    std::normal_distribution<double> z(0.0, 1.0);
    for (const std::size_t k : order) {
        const Load& l = c.loads[k];
        const double p = l.p_nom + 0.02 * std::abs(l.p_nom) * z(mirror);
        const double q = l.q_nom + 0.02 * std::abs(l.q_nom) * z(mirror);
        CHECK(s.loads[k].p_nom == p);
        CHECK(s.loads[k].q_nom == q);
    }
}

TEST_CASE("bus-list scope leaves other loads alone") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    UncertaintySpec spec = UncertaintySpec::normal(5.0);
    spec.scope = LoadScope::BusList;
    spec.buses = {3, 9};
    auto rng = rng_for_sample(4, 4);
    const NetworkCase s = sample_loads(c, spec, rng);
    for (std::size_t i = 0; i < c.loads.size(); ++i) {
        const bool listed = c.loads[i].bus == 3 || c.loads[i].bus == 9;
        CHECK((s.loads[i].p_nom != c.loads[i].p_nom) == listed);
    }
}

TEST_CASE("uncertainty and study validation") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    CHECK_NOTHROW(UncertaintySpec::normal(1.0).check(c));
    CHECK_THROWS_AS(UncertaintySpec::normal(0.0).check(c), std::invalid_argument);
    CHECK_THROWS_AS(UncertaintySpec::uniform(-1.0).check(c), std::invalid_argument);
    UncertaintySpec listed = UncertaintySpec::normal(1.0);
    listed.scope = LoadScope::BusList;
    CHECK_THROWS_AS(listed.check(c), std::invalid_argument);
    listed.buses = {99};
    CHECK_THROWS_AS(listed.check(c), std::invalid_argument);

    StudyConfig cfg;
    CHECK_NOTHROW(cfg.check());
    cfg.max_samples = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = StudyConfig{};
    cfg.ci_target = CiTarget{OutcomeKind::VoltageCollapse, ConfidenceLevel::CL99, 0.0};
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("probe labels") {
    const Probe v{ProbeKind::BusVoltage, 14, 0};
    const Probe a{ProbeKind::BranchAngle, 130, 131};
    CHECK(v.label() == "V14");
    CHECK(a.label() == "A130-131");
    CHECK(Probe::parse("V14") == v);
    CHECK(Probe::parse("A130-131") == a);
    CHECK_THROWS(Probe::parse("Q1"));
    CHECK_THROWS(Probe::parse("A12"));
}

TEST_CASE("probe values") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    const PFSolution sol = robust_solve(c, std::nullopt, SolverOptions{});
    REQUIRE(sol.converged);
    const auto values = probe_values(c, sol.state, {Probe::parse("V14"), Probe::parse("A1-2")});
    CHECK(values[0] == doctest::Approx(std::abs(sol.state.voltage(c.bus_positions().at(14)))));
    CHECK(values[1] == doctest::Approx(branch_angle_difference(c, sol.state, 0)));
    CHECK_THROWS_AS(probe_values(c, sol.state, {Probe::parse("V99")}), std::invalid_argument);
    CHECK_THROWS_AS(probe_values(c, sol.state, {Probe::parse("A1-14")}), std::invalid_argument);
}

TEST_CASE("sampling loop with a Bernoulli stub") {
    StudyConfig cfg;
    cfg.max_samples = 2000;
    cfg.seed = 11;
    cfg.probes = {Probe::parse("V1")};
    const StudyReport r = run_sampling(cfg, bernoulli_stub(0.1));
    CHECK(r.n == 2000);
    CHECK(r.stop_reason == StopReason::MaxSamples);
    CHECK(count_sum(r) == r.n);
    double p_total = 0.0;
    for (const auto& c : r.classes) p_total += c.p_hat;
    CHECK(p_total == doctest::Approx(1.0));

    REQUIRE(r.samples.size() == r.n);
    for (std::size_t i = 0; i < r.samples.size(); ++i) CHECK(r.samples[i].index == i);
    for (const auto& s : r.samples) {
        CHECK(s.probe_values.empty() == (s.outcome.kind == OutcomeKind::VoltageCollapse));
    }
    const double p_hat = summary(r, OutcomeKind::VoltageCollapse).p_hat;
    CHECK(std::abs(p_hat - 0.1) < 0.03);

    // Histogram integrity: each class histogram holds that class's feasible samples.
    REQUIRE(r.histograms.size() == 1);
    const Histogram& h = r.histograms[0].hist;
    CHECK(h.class_total(static_cast<std::size_t>(OutcomeKind::Normal)) ==
          summary(r, OutcomeKind::Normal).count);
    CHECK(h.class_total(static_cast<std::size_t>(OutcomeKind::VoltageCollapse)) == 0);
    double area = 0.0;
    for (std::size_t b = 0; b < h.bin_count(); ++b) {
        double sum = 0.0;
        for (std::size_t k = 0; k < kOutcomeCount; ++k) sum += h.density(k, b);
        CHECK(std::abs(sum - h.accumulated_density(b)) < 1e-12);
        area += h.accumulated_density(b) * h.width(b);
    }
    CHECK(area == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("worker count does not change the report") {
    StudyConfig cfg;
    cfg.max_samples = 1234;
    cfg.seed = 99;
    cfg.probes = {Probe::parse("V1")};
    cfg.workers = 1;
    const std::string one = report_json_text(run_sampling(cfg, bernoulli_stub(0.2)));
    for (unsigned w : {2u, 4u, 8u}) {
        cfg.workers = w;
        CHECK(report_json_text(run_sampling(cfg, bernoulli_stub(0.2))) == one);
    }
}

TEST_CASE("CI target stops on a chunk boundary") {
    StudyConfig cfg;
    cfg.max_samples = 100000;
    cfg.seed = 5;
    cfg.ci_target = CiTarget{OutcomeKind::VoltageCollapse, ConfidenceLevel::CL99, 0.02};
    const StudyReport r = run_sampling(cfg, bernoulli_stub(0.1));
    CHECK(r.stop_reason == StopReason::CITargetMet);
    CHECK(r.n % cfg.check_every == 0);
    const auto& c = summary(r, OutcomeKind::VoltageCollapse);
    CHECK(ci_half_width(c.count, r.n, ConfidenceLevel::CL99) <= 0.02);
    // One chunk earlier the target was not met yet.
    const std::size_t earlier = r.n - cfg.check_every;
    std::size_t earlier_count = 0;
    for (std::size_t i = 0; i < earlier; ++i) {
        earlier_count += r.samples[i].outcome.kind == OutcomeKind::VoltageCollapse ? 1 : 0;
    }
    CHECK(ci_half_width(earlier_count, earlier, ConfidenceLevel::CL99) > 0.02);
    cfg.workers = 4;
    CHECK(run_sampling(cfg, bernoulli_stub(0.1)).n == r.n);
}

TEST_CASE("estimator error shrinks like one over root n") {
    // Variance of sqrt(n) (p_hat - p) should stay near p (1 - p) = 0.09.
    for (const std::size_t n : {100u, 1000u, 10000u}) {
        CAPTURE(n);
        double sum_sq = 0.0;
        const int reps = 40;
        for (int rep = 0; rep < reps; ++rep) {
            StudyConfig cfg;
            cfg.max_samples = n;
            cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
            cfg.keep_samples = false;
            const StudyReport r = run_sampling(cfg, bernoulli_stub(0.1));
            const double e = std::sqrt(static_cast<double>(n)) *
                             (summary(r, OutcomeKind::VoltageCollapse).p_hat - 0.1);
            sum_sq += e * e;
        }
        const double var = sum_sq / reps;
        // 40 replicates estimate the variance to about 22 % relative.
        CHECK(var > 0.09 * 0.4);
        CHECK(var < 0.09 * 2.0);
    }
}

TEST_CASE("degenerate report") {
    const StudyReport r =
        degenerate_report("x", UncertaintySpec::normal(1.0), StudyConfig{}, "no base solution");
    CHECK(r.n == 0);
    CHECK_FALSE(r.base_feasible);
    CHECK(r.base_diagnostic == "no base solution");
    CHECK(r.stop_reason == StopReason::BaseInfeasible);
    CHECK(summary(r, OutcomeKind::VoltageCollapse).p_hat == 1.0);
    CHECK(summary(r, OutcomeKind::Normal).p_hat == 0.0);
    for (const auto& c : r.classes) {
        CHECK(c.ci99.lower == 0.0);
        CHECK(c.ci99.upper == 1.0);
        CHECK(c.count == 0);
    }
}

TEST_CASE("study on a healthy fixture with a tiny spread") {
    const NetworkCase c = parse_matpower(fixtures::pv_triangle_text());
    StudyConfig cfg;
    cfg.max_samples = 200;
    cfg.seed = 1;
    cfg.probes = {Probe::parse("V3"), Probe::parse("A1-3")};
    const StudyReport r =
        run_study(c, UncertaintySpec::normal(1e-6), cfg, SolverOptions{}, LimitSpec{});
    CHECK(r.base_feasible);
    CHECK(r.n == 200);
    CHECK(summary(r, OutcomeKind::Normal).count == 200);
    const auto& collapse = summary(r, OutcomeKind::VoltageCollapse);
    CHECK(collapse.p_hat == 0.0);
    CHECK(collapse.ci99.kind == IntervalKind::ZeroEvent);
    CHECK(collapse.ci99.upper == 4.605 / 200.0);
    CHECK(r.histograms.size() == 2);
    CHECK(r.tx_stepping_samples == 0);
}

TEST_CASE("warm start changes effort, not outcomes") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case30"));
    StudyConfig cfg;
    cfg.max_samples = 60;
    cfg.seed = 3;
    const UncertaintySpec spec = UncertaintySpec::normal(5.0);
    const StudyReport warm = run_study(c, spec, cfg, SolverOptions{}, LimitSpec{});
    cfg.warm_start = false;
    const StudyReport cold = run_study(c, spec, cfg, SolverOptions{}, LimitSpec{});
    REQUIRE(warm.samples.size() == cold.samples.size());
    int warm_iters = 0, cold_iters = 0;
    for (std::size_t i = 0; i < warm.samples.size(); ++i) {
        const auto& a = warm.samples[i];
        const auto& b = cold.samples[i];
        warm_iters += a.iterations;
        cold_iters += b.iterations;
        if (a.outcome.kind != OutcomeKind::VoltageCollapse &&
            b.outcome.kind != OutcomeKind::VoltageCollapse) {
            CHECK(a.outcome.kind == b.outcome.kind);
        }
    }
    CHECK(warm_iters < cold_iters);
}

TEST_CASE("keep_samples only drops the per-sample ledger") {
    const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    StudyConfig cfg;
    cfg.max_samples = 50;
    const StudyReport kept = run_study(c, UncertaintySpec::normal(2.0), cfg, SolverOptions{}, LimitSpec{});
    cfg.keep_samples = false;
    const StudyReport dropped =
        run_study(c, UncertaintySpec::normal(2.0), cfg, SolverOptions{}, LimitSpec{});
    CHECK(dropped.samples.empty());
    CHECK(kept.samples.size() == 50);
    for (std::size_t k = 0; k < kOutcomeCount; ++k) CHECK(kept.classes[k].count == dropped.classes[k].count);
}

TEST_CASE("infeasible base case gives the degenerate report") {
    const NetworkCase c =
        fixtures::scaled_loads(load_matpower_file(fixtures::case_file("case14")), 10.0);
    StudyConfig cfg;
    cfg.max_samples = 10;
    const StudyReport r = run_study(c, UncertaintySpec::normal(1.0), cfg, SolverOptions{}, LimitSpec{});
    CHECK_FALSE(r.base_feasible);
    CHECK(r.n == 0);
    CHECK(summary(r, OutcomeKind::VoltageCollapse).p_hat == 1.0);
    CHECK_FALSE(r.base_diagnostic.empty());
}

TEST_CASE("invalid case is a configuration error") {
    NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
    c.branches[0].r = 0.0;
    c.branches[0].x = 0.0;
    CHECK_THROWS_AS(run_study(c, UncertaintySpec::normal(1.0), StudyConfig{}, SolverOptions{}, LimitSpec{}),
                    std::invalid_argument);
}

TEST_CASE("DC-shifted warm start") {
    SUBCASE("unchanged loads leave the state alone") {
        const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
        const PFSolution base = robust_solve(c, std::nullopt, SolverOptions{});
        REQUIRE(base.converged);
        const SplitCircuitState s = dc_shifted_start(c, c, base.state);
        CHECK(s.v_real == base.state.v_real);
        CHECK(s.v_imag == base.state.v_imag);
    }
    SUBCASE("two-bus angle moves by dP / b, magnitude kept") {
        const double r = 0.01, x = 0.1;
        const NetworkCase c = parse_matpower(fixtures::two_bus_text(50.0, 20.0, r, x));
        NetworkCase heavier = c;
        heavier.loads[0].p_nom += 0.1;
        const PFSolution base = robust_solve(c, std::nullopt, SolverOptions{});
        REQUIRE(base.converged);
        const std::size_t p = c.bus_positions().at(2);
        const SplitCircuitState s = dc_shifted_start(c, heavier, base.state);
        const double turned = std::arg(s.voltage(p) * std::conj(base.state.voltage(p)));
        CHECK(turned == doctest::Approx(-0.1 * (r * r + x * x) / x).epsilon(1e-12));
        CHECK(std::abs(s.voltage(p)) == doctest::Approx(std::abs(base.state.voltage(p))).epsilon(1e-14));
        const std::size_t slack = c.bus_positions().at(1);
        CHECK(s.voltage(slack) == base.state.voltage(slack));
    }
    SUBCASE("shifted start lies closer to the sample solution") {
        const NetworkCase c = load_matpower_file(fixtures::case_file("case118"));
        SolverOptions opts;
        opts.enforce_q_limits = false;
        const PFSolution base = robust_solve(c, std::nullopt, opts);
        REQUIRE(base.converged);
        for (std::uint64_t i = 0; i < 5; ++i) {
            auto rng = rng_for_sample(3, i);
            const NetworkCase sample = sample_loads(c, UncertaintySpec::normal(5.0), rng);
            const PFSolution exact = robust_solve(sample, base.state, opts);
            REQUIRE(exact.converged);
            const SplitCircuitState shifted = dc_shifted_start(c, sample, base.state);
            double before = 0.0, after = 0.0;
            for (std::size_t b = 0; b < c.buses.size(); ++b) {
                before = std::max(before, std::abs(base.state.voltage(b) - exact.state.voltage(b)));
                after = std::max(after, std::abs(shifted.voltage(b) - exact.state.voltage(b)));
            }
            CAPTURE(i);
            CHECK(after < before);
        }
    }
    SUBCASE("mismatched load lists are rejected") {
        const NetworkCase c = load_matpower_file(fixtures::case_file("case14"));
        NetworkCase fewer = c;
        fewer.loads.pop_back();
        const SplitCircuit circuit(c);
        CHECK_THROWS_AS(dc_shifted_start(c, fewer, circuit.flat_start()), std::invalid_argument);
    }
}
