#include "splitflow/linear_solver.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <string>

namespace splitflow {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

int column_from_message(const std::string& msg) {
    static const std::regex re("COLUMN AT ([0-9]+)");
    std::smatch m;
    if (std::regex_search(msg, m, re)) return std::stoi(m[1].str()) - 1;
    return -1;
}

}  // namespace

struct SparseLuSolver::Impl {
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    std::vector<int> outer;
    std::vector<int> inner;
    bool analyzed = false;
};

SparseLuSolver::SparseLuSolver() : impl_(std::make_unique<Impl>()) {}
SparseLuSolver::~SparseLuSolver() = default;
SparseLuSolver::SparseLuSolver(SparseLuSolver&&) noexcept = default;
SparseLuSolver& SparseLuSolver::operator=(SparseLuSolver&&) noexcept = default;

std::vector<double> SparseLuSolver::solve(std::span<const Triplet> triplets,
                                          std::span<const double> rhs, std::size_t dimension) {
    if (rhs.size() != dimension) {
        throw std::invalid_argument("right-hand side length does not match system dimension");
    }
    const auto n = static_cast<Eigen::Index>(dimension);
    std::vector<Eigen::Triplet<double, int>> entries;
    entries.reserve(triplets.size());
    for (const auto& t : triplets) {
        if (t.row < 0 || t.col < 0 || t.row >= n || t.col >= n) {
            throw std::out_of_range("triplet outside the system dimension");
        }
        entries.emplace_back(t.row, t.col, t.value);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();

    // Symbolic analysis depends only on the pattern; redo it when it moves.
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const bool same_pattern =
        impl_->analyzed && impl_->outer.size() == static_cast<std::size_t>(n + 1) &&
        std::equal(impl_->outer.begin(), impl_->outer.end(), outer) &&
        impl_->inner.size() == static_cast<std::size_t>(a.nonZeros()) &&
        std::equal(impl_->inner.begin(), impl_->inner.end(), inner);
    if (!same_pattern) {
        impl_->lu.analyzePattern(a);
        impl_->outer.assign(outer, outer + n + 1);
        impl_->inner.assign(inner, inner + a.nonZeros());
        impl_->analyzed = true;
    }
    impl_->lu.factorize(a);
    if (impl_->lu.info() != Eigen::Success) {
        const std::string msg = impl_->lu.lastErrorMessage();
        throw SingularSystemError("singular system: " + msg, column_from_message(msg));
    }

    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n);
    Eigen::VectorXd x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success || !x.allFinite()) {
        throw SingularSystemError("singular system: solve produced non-finite values", -1);
    }

    // Numerically singular matrices factor "successfully" with tiny pivots;
    // catch them through the residual, after one refinement step.
    const double scale = std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
    Eigen::VectorXd r = a * x - b;
    if (r.lpNorm<Eigen::Infinity>() > 1e-12 * scale) {
        x -= impl_->lu.solve(r);
        r = a * x - b;
    }
    Eigen::Index worst = 0;
    const double r_norm = x.allFinite() ? r.cwiseAbs().maxCoeff(&worst)
                                        : std::numeric_limits<double>::infinity();
    if (r_norm > 1e-9 * scale && r_norm > 1e-12) {
        throw SingularSystemError("numerically singular system (relative residual " +
                                      std::to_string(r_norm / scale) + ")",
                                  static_cast<int>(worst));
    }
    return {x.data(), x.data() + n};
}

std::vector<double> solve_linear(std::span<const Triplet> triplets, std::span<const double> rhs,
                                 std::size_t dimension) {
    SparseLuSolver solver;
    return solver.solve(triplets, rhs, dimension);
}

}  // namespace splitflow
