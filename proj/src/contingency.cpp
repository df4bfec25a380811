#include "splitflow/contingency.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace splitflow {

namespace {

std::string set_key(const OutageSet& set) {
    std::vector<std::string> labels;
    for (const auto& o : set) labels.push_back(outage_label(o));
    std::sort(labels.begin(), labels.end());
    std::string key;
    for (const auto& l : labels) key += l + ";";
    return key;
}

class SetCollector {
public:
    bool add(OutageSet set) {
        if (!seen_.insert(set_key(set)).second) return false;
        sets_.push_back(std::move(set));
        return true;
    }
    std::vector<OutageSet> take() { return std::move(sets_); }

private:
    std::set<std::string> seen_;
    std::vector<OutageSet> sets_;
};

Outage outage_of(const RankedBranch& b) { return BranchOutage{b.from, b.to, b.ordinal}; }

std::string truncation_warning(const char* what, std::size_t asked, std::size_t available) {
    return std::string(what) + ": asked for " + std::to_string(asked) + ", only " +
           std::to_string(available) + " available";
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

std::vector<RankedGenerator> rank_generators(const NetworkCase& c, const PFSolution& base) {
    std::map<BusId, double> by_bus;
    for (const auto& g : generator_outputs(c, base)) by_bus[g.bus] += g.p;
    std::vector<RankedGenerator> out;
    for (const auto& [bus, p] : by_bus) out.push_back({bus, p});
    std::stable_sort(out.begin(), out.end(), [](const RankedGenerator& a, const RankedGenerator& b) {
        if (a.p != b.p) return a.p > b.p;
        return a.bus < b.bus;
    });
    return out;
}

std::vector<RankedBranch> rank_branches(const NetworkCase& c, const PFSolution& base) {
    const auto flows = branch_flows(c, base.state);
    std::map<std::pair<BusId, BusId>, int> circuits;
    std::vector<RankedBranch> out;
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const Branch& br = c.branches[k];
        const int ordinal = circuits[{br.from, br.to}]++;
        if (!br.in_service) continue;
        out.push_back({k, br.from, br.to, ordinal, std::abs(flows[k].s_from)});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedBranch& a, const RankedBranch& b) {
        if (a.s_from != b.s_from) return a.s_from > b.s_from;
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });
    return out;
}

Enumeration enumerate_contingencies(const NetworkCase& c, const PFSolution& base,
                                    const ContingencySpec& spec) {
    Enumeration e;
    SetCollector sets;
    const bool need_gens = spec.n1_generators > 0 || spec.gen_branch_generators > 0;
    const bool need_branches = spec.n1_branches > 0 || spec.gen_branch_branches > 0;
    const auto gens = need_gens ? rank_generators(c, base) : std::vector<RankedGenerator>{};
    const auto branches = need_branches ? rank_branches(c, base) : std::vector<RankedBranch>{};

    const std::size_t k1 = std::min(spec.n1_generators, gens.size());
    if (k1 < spec.n1_generators) {
        e.warnings.push_back(truncation_warning("N-1 generators", spec.n1_generators, gens.size()));
    }
    for (std::size_t i = 0; i < k1; ++i) sets.add({GeneratorOutage{gens[i].bus}});

    bool pairs_short = false;
    for (std::size_t i = 0; i < k1 && spec.n2_generators > 0; ++i) {
        std::size_t added = 0;
        for (std::size_t j = 0; j < gens.size() && added < spec.n2_generators; ++j) {
            if (j == i) continue;
            if (sets.add({GeneratorOutage{gens[i].bus}, GeneratorOutage{gens[j].bus}})) ++added;
        }
        if (added < spec.n2_generators) pairs_short = true;
    }
    if (pairs_short) {
        e.warnings.push_back("N-2 generators: fewer than " + std::to_string(spec.n2_generators) +
                             " new pairs for some first outages");
    }

    const std::size_t b1 = std::min(spec.n1_branches, branches.size());
    if (b1 < spec.n1_branches) {
        e.warnings.push_back(truncation_warning("N-1 branches", spec.n1_branches, branches.size()));
    }
    for (std::size_t i = 0; i < b1; ++i) sets.add({outage_of(branches[i])});

    const std::size_t gg = std::min(spec.gen_branch_generators, gens.size());
    const std::size_t gb = std::min(spec.gen_branch_branches, branches.size());
    if (gg < spec.gen_branch_generators) {
        e.warnings.push_back(
            truncation_warning("generator x branch generators", spec.gen_branch_generators, gens.size()));
    }
    if (gb < spec.gen_branch_branches) {
        e.warnings.push_back(
            truncation_warning("generator x branch branches", spec.gen_branch_branches, branches.size()));
    }
    for (std::size_t i = 0; i < gg; ++i) {
        for (std::size_t j = 0; j < gb; ++j) {
            sets.add({GeneratorOutage{gens[i].bus}, outage_of(branches[j])});
        }
    }

    for (const auto& set : spec.explicit_sets) {
        if (set.empty()) {
            e.warnings.push_back("explicit outage set is empty, skipped");
            continue;
        }
        if (!sets.add(set)) {
            e.warnings.push_back("explicit set " + outage_set_label(set) + " duplicates an earlier one");
        }
    }
    e.sets = sets.take();
    return e;
}

std::string outage_set_label(const OutageSet& set) {
    std::string s;
    for (const auto& o : set) s += (s.empty() ? "" : " ") + outage_label(o);
    return s;
}

std::uint64_t contingency_seed(std::uint64_t study_seed, std::size_t ordinal) {
    // splitmix64 finalizer over the seed advanced by the ordinal.
    std::uint64_t z = study_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(ordinal) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<ContingencyResult> run_contingency_study(const NetworkCase& c,
                                                     const ContingencySpec& spec,
                                                     const UncertaintySpec& uncertainty,
                                                     const StudyConfig& config,
                                                     const SolverOptions& opts,
                                                     const LimitSpec& limits,
                                                     std::vector<std::string>* warnings) {
    const auto violations = validate(c);
    if (!violations.empty()) {
        throw std::invalid_argument("invalid case: " + violations.front().element + ": " +
                                    violations.front().message);
    }
    uncertainty.check(c);
    config.check();
    limits.check();

    const SplitCircuit intact(c);
    SolveSession session(opts);
    const PFSolution base = session.robust(intact, intact.case_start());
    if (!base.converged) {
        throw BaseCaseInfeasible("intact base case did not converge: " + base.diagnostic);
    }
    Enumeration e = enumerate_contingencies(c, base, spec);
    if (warnings) *warnings = e.warnings;

    std::vector<ContingencyResult> results;
    results.reserve(e.sets.size());
    for (std::size_t k = 0; k < e.sets.size(); ++k) {
        ContingencyResult r;
        r.ordinal = k;
        r.outages = e.sets[k];
        r.label = "C" + std::to_string(k + 1) + ": " + outage_set_label(r.outages);
        r.seed = contingency_seed(config.seed, k);
        StudyConfig cfg = config;
        cfg.seed = r.seed;

        std::optional<NetworkCase> post;
        try {
            NetworkCase edited = c;
            for (const auto& o : r.outages) edited = apply_outage(edited, o);
            const auto issues = validate(edited);
            if (!issues.empty()) {
                r.diagnostic = issues.front().element + ": " + issues.front().message;
            } else {
                post = std::move(edited);
            }
        } catch (const CaseError& err) {
            r.diagnostic = err.what();
        }

        if (post) {
            const SplitCircuit circuit(*post);
            const PFSolution sol = session.robust(circuit, base.state);
            if (sol.converged) {
                r.base_feasible = true;
                r.report = run_study_from_base(*post, sol, uncertainty, cfg, opts, limits);
            } else {
                r.diagnostic = "post-outage base case did not converge: " + sol.diagnostic;
            }
        }
        if (!r.base_feasible) r.report = degenerate_report(c.name, uncertainty, cfg, r.diagnostic);
        results.push_back(std::move(r));
    }
    return results;
}

Json risk_table_json(const std::vector<ContingencyResult>& results) {
    Json rows = Json::array();
    for (const auto& r : results) {
        Json j;
        j["label"] = r.label;
        Json outages = Json::array();
        for (const auto& o : r.outages) outages.push_back(outage_label(o));
        j["outages"] = outages;
        j["seed"] = r.seed;
        j["base_feasible"] = r.base_feasible;
        j["diagnostic"] = r.diagnostic;
        j["n"] = r.report.n;
        Json classes = Json::object();
        for (const auto& cs : r.report.classes) {
            classes[to_string(cs.kind)] = {{"p_hat", cs.p_hat},
                                           {"ci95", to_json(cs.ci95)},
                                           {"ci99", to_json(cs.ci99)}};
        }
        j["classes"] = classes;
        rows.push_back(j);
    }
    return rows;
}

void write_risk_table_csv(const std::vector<ContingencyResult>& results, std::ostream& out) {
    out << "label,base_feasible,seed,n";
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        const std::string name = to_string(static_cast<OutcomeKind>(k));
        out << "," << name << "_p_hat," << name << "_ci95_lower," << name << "_ci95_upper," << name
            << "_ci99_lower," << name << "_ci99_upper";
    }
    out << "\n";
    for (const auto& r : results) {
        out << '"' << r.label << '"' << "," << (r.base_feasible ? 1 : 0) << "," << r.seed << ","
            << r.report.n;
        for (const auto& cs : r.report.classes) {
            out << "," << cs.p_hat << "," << cs.ci95.lower << "," << cs.ci95.upper << ","
                << cs.ci99.lower << "," << cs.ci99.upper;
        }
        out << "\n";
    }
}

void write_risk_table_text(const std::vector<ContingencyResult>& results, std::ostream& out) {
    out << std::left << std::setw(32) << "contingency" << std::setw(11) << "base" << std::right
        << std::setw(7) << "n" << std::setw(22) << "normal[%] +/-ci99" << std::setw(22)
        << "collapse[%] +/-ci99" << std::setw(22)
        << "angular[%] +/-ci99" << std::setw(22) << "band[%] +/-ci99" << std::setw(22)
        << "overload[%] +/-ci99" << "\n";
    auto cell = [](const ClassSummary& cs) {
        const double half = 0.5 * (cs.ci99.upper - cs.ci99.lower);
        return fixed(100.0 * cs.p_hat, 2) + " +/- " + fixed(100.0 * half, 2);
    };
    for (const auto& r : results) {
        const auto& cl = r.report.classes;
        out << std::left << std::setw(32) << r.label << std::setw(11)
            << (r.base_feasible ? "feasible" : "infeasible") << std::right << std::setw(7)
            << r.report.n
            << std::setw(22) << cell(cl[static_cast<std::size_t>(OutcomeKind::Normal)])
            << std::setw(22) << cell(cl[static_cast<std::size_t>(OutcomeKind::VoltageCollapse)])
            << std::setw(22) << cell(cl[static_cast<std::size_t>(OutcomeKind::AngularUnstable)])
            << std::setw(22) << cell(cl[static_cast<std::size_t>(OutcomeKind::VoltageBandViolation)])
            << std::setw(22) << cell(cl[static_cast<std::size_t>(OutcomeKind::BranchOverload)])
            << "\n";
    }
}

}  // namespace splitflow
