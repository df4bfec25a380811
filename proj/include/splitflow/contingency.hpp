#pragma once

// N-1 / N-2 outage screening: rank elements on the solved base case,
// enumerate outage sets, run one Monte Carlo study per set.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "splitflow/montecarlo.hpp"
#include "splitflow/report_io.hpp"

namespace splitflow {

using OutageSet = std::vector<Outage>;

struct ContingencySpec {
    std::size_t n1_generators = 0;        // biggest generator buses
    std::size_t n2_generators = 0;        // second outages per N-1 generator
    std::size_t n1_branches = 0;          // highest loaded branches
    std::size_t gen_branch_generators = 0;   // generator x branch pairs
    std::size_t gen_branch_branches = 0;
    std::vector<OutageSet> explicit_sets;
};

struct RankedGenerator {
    BusId bus = 0;
    double p = 0.0;   // dispatched real power of every unit on the bus, pu
};

/// Generator buses by descending dispatched P (the slack's solved output
/// included); ties by ascending bus id.
std::vector<RankedGenerator> rank_generators(const NetworkCase& c, const PFSolution& base);

struct RankedBranch {
    std::size_t index = 0;   // into NetworkCase::branches
    BusId from = 0;
    BusId to = 0;
    int ordinal = 0;         // among circuits joining the same pair
    double s_from = 0.0;     // |S| at the from end, pu
};

/// In-service branches by descending |S_from|; ties by (from, to).
std::vector<RankedBranch> rank_branches(const NetworkCase& c, const PFSolution& base);

struct Enumeration {
    std::vector<OutageSet> sets;
    std::vector<std::string> warnings;
};

/// N-1 generators, N-2 generator pairs, N-1 branches, generator x branch
/// pairs, then explicit sets; duplicates (as sets) are dropped.
Enumeration enumerate_contingencies(const NetworkCase& c, const PFSolution& base,
                                    const ContingencySpec& spec);

/// "G132", "B130-131 B131-144".
std::string outage_set_label(const OutageSet& set);

struct ContingencyResult {
    std::size_t ordinal = 0;
    std::string label;   // "C1: G132"
    OutageSet outages;
    std::uint64_t seed = 0;
    bool base_feasible = false;
    std::string diagnostic;
    StudyReport report;   // degenerate when the base case is infeasible
};

/// Seed of contingency `ordinal` (0-based), independent of how many
/// contingencies follow it.
std::uint64_t contingency_seed(std::uint64_t study_seed, std::size_t ordinal);

class BaseCaseInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws BaseCaseInfeasible when the intact case does not solve.
std::vector<ContingencyResult> run_contingency_study(const NetworkCase& c,
                                                     const ContingencySpec& spec,
                                                     const UncertaintySpec& uncertainty,
                                                     const StudyConfig& config,
                                                     const SolverOptions& opts,
                                                     const LimitSpec& limits,
                                                     std::vector<std::string>* warnings = nullptr);

Json risk_table_json(const std::vector<ContingencyResult>& results);
/// label,base_feasible,seed,n,<p_hat / ci95 / ci99 bounds per class>
void write_risk_table_csv(const std::vector<ContingencyResult>& results, std::ostream& out);
void write_risk_table_text(const std::vector<ContingencyResult>& results, std::ostream& out);

}  // namespace splitflow
