#pragma once

// Confidence intervals for outcome probabilities and shared-bin histograms.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace splitflow {

enum class ConfidenceLevel { CL95, CL99 };
enum class IntervalKind { CLT, ZeroEvent };

std::string to_string(ConfidenceLevel level);
std::string to_string(IntervalKind kind);

/// 1.96 or 2.58, as printed rather than the exact normal quantiles.
double z_value(ConfidenceLevel level);
/// Numerator of the zero-event upper bound: 3 (95%) or 4.605 (99%).
double zero_event_numerator(ConfidenceLevel level);

struct BinaryEstimate {
    double p_hat = 0.0;
    std::size_t n = 0;
    double sigma_hat = 0.0;   // sqrt(p_hat (1 - p_hat) / n)
};

BinaryEstimate estimate_binary(std::size_t successes, std::size_t n);

struct ConfInterval {
    double lower = 0.0;
    double upper = 0.0;
    ConfidenceLevel level = ConfidenceLevel::CL99;
    IntervalKind kind = IntervalKind::CLT;
    bool small_sample = false;   // n < 100: the approximations are shaky

    bool operator==(const ConfInterval&) const = default;
};

/// Throws std::domain_error when n == 0 or successes > n.
ConfInterval ci_binary(std::size_t successes, std::size_t n, ConfidenceLevel level);

/// Half-width used by stopping rules: z * sigma_hat, or the whole zero-event
/// bound when every sample (or none) is a success.
double ci_half_width(std::size_t successes, std::size_t n, ConfidenceLevel level);

struct BoundaryTriplet {
    double lower = 0.0;
    double p_hat = 0.0;
    double upper = 0.0;
};

BoundaryTriplet ci_boundary_triplet(std::size_t successes, std::size_t n, ConfidenceLevel level);

// ---------------------------------------------------------------------------

/// Counts per class over shared bin edges. Bin k covers [edges[k], edges[k+1]),
/// the last bin is closed on the right.
struct Histogram {
    std::vector<double> edges;
    std::vector<std::vector<std::size_t>> counts;   // [class][bin]
    std::size_t total = 0;

    [[nodiscard]] std::size_t bin_count() const { return edges.empty() ? 0 : edges.size() - 1; }
    [[nodiscard]] double width(std::size_t bin) const { return edges[bin + 1] - edges[bin]; }
    /// Share of all samples per unit of the binned quantity.
    [[nodiscard]] double density(std::size_t cls, std::size_t bin) const;
    [[nodiscard]] double accumulated_density(std::size_t bin) const;
    [[nodiscard]] std::size_t class_total(std::size_t cls) const;
};

/// Freedman-Diaconis bins unless `bins` is given. Throws
/// std::invalid_argument on mismatched lengths, labels >= class_count or
/// non-finite values. Empty input gives an empty histogram.
Histogram histogram(std::span<const double> values, std::span<const std::size_t> labels,
                    std::size_t class_count, std::optional<std::size_t> bins = std::nullopt);

/// Type-7 sample quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> data, double q);

}  // namespace splitflow
