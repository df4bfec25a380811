#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "splitflow/equiv_circuit.hpp"

namespace splitflow {

class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, int pivot_row)
        : std::runtime_error(what), pivot_row_(pivot_row) {}
    /// Row (0-based) where factorization broke down, or the row of the
    /// largest residual when the matrix is numerically singular.
    [[nodiscard]] int pivot_row() const noexcept { return pivot_row_; }

private:
    int pivot_row_;
};

/// Sparse LU with a fill-reducing column ordering and partial pivoting.
/// Keeps the symbolic analysis while the sparsity pattern is unchanged.
class SparseLuSolver {
public:
    SparseLuSolver();
    ~SparseLuSolver();
    SparseLuSolver(SparseLuSolver&&) noexcept;
    SparseLuSolver& operator=(SparseLuSolver&&) noexcept;

    /// Solves A x = b. Throws SingularSystemError when the system is
    /// structurally or numerically singular.
    std::vector<double> solve(std::span<const Triplet> triplets, std::span<const double> rhs,
                              std::size_t dimension);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot solve; ||Ax - b||_inf <= 1e-9 ||b||_inf on success.
std::vector<double> solve_linear(std::span<const Triplet> triplets, std::span<const double> rhs,
                                 std::size_t dimension);

}  // namespace splitflow
