#include "splitflow/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splitflow {

namespace {

constexpr std::size_t kMaxBins = 10000;
constexpr std::size_t kSmallSample = 100;

void check_counts(std::size_t successes, std::size_t n) {
    if (n == 0) throw std::domain_error("confidence interval needs at least one sample");
    if (successes > n) throw std::domain_error("successes exceed the sample count");
}

}  // namespace

std::string to_string(ConfidenceLevel level) {
    return level == ConfidenceLevel::CL95 ? "95" : "99";
}

std::string to_string(IntervalKind kind) {
    return kind == IntervalKind::CLT ? "clt" : "zero_event";
}

double z_value(ConfidenceLevel level) { return level == ConfidenceLevel::CL95 ? 1.96 : 2.58; }

double zero_event_numerator(ConfidenceLevel level) {
    return level == ConfidenceLevel::CL95 ? 3.0 : 4.605;
}

BinaryEstimate estimate_binary(std::size_t successes, std::size_t n) {
    check_counts(successes, n);
    BinaryEstimate e;
    e.n = n;
    e.p_hat = static_cast<double>(successes) / static_cast<double>(n);
    e.sigma_hat = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n));
    return e;
}

ConfInterval ci_binary(std::size_t successes, std::size_t n, ConfidenceLevel level) {
    const BinaryEstimate e = estimate_binary(successes, n);
    ConfInterval ci;
    ci.level = level;
    ci.small_sample = n < kSmallSample;
    const double bound = zero_event_numerator(level) / static_cast<double>(n);
    if (successes == 0) {
        ci.kind = IntervalKind::ZeroEvent;
        ci.lower = 0.0;
        ci.upper = std::min(1.0, bound);
    } else if (successes == n) {
        ci.kind = IntervalKind::ZeroEvent;
        ci.lower = std::max(0.0, 1.0 - bound);
        ci.upper = 1.0;
    } else {
        const double half = z_value(level) * e.sigma_hat;
        ci.kind = IntervalKind::CLT;
        ci.lower = std::max(0.0, e.p_hat - half);
        ci.upper = std::min(1.0, e.p_hat + half);
    }
    return ci;
}

double ci_half_width(std::size_t successes, std::size_t n, ConfidenceLevel level) {
    const BinaryEstimate e = estimate_binary(successes, n);
    if (successes == 0 || successes == n) {
        return zero_event_numerator(level) / static_cast<double>(n);
    }
    return z_value(level) * e.sigma_hat;
}

BoundaryTriplet ci_boundary_triplet(std::size_t successes, std::size_t n, ConfidenceLevel level) {
    const ConfInterval ci = ci_binary(successes, n, level);
    return {ci.lower, static_cast<double>(successes) / static_cast<double>(n), ci.upper};
}

// ---------------------------------------------------------------------------

double Histogram::density(std::size_t cls, std::size_t bin) const {
    if (total == 0) return 0.0;
    return static_cast<double>(counts[cls][bin]) / (static_cast<double>(total) * width(bin));
}

double Histogram::accumulated_density(std::size_t bin) const {
    double d = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c) d += density(c, bin);
    return d;
}

std::size_t Histogram::class_total(std::size_t cls) const {
    std::size_t s = 0;
    for (const auto v : counts[cls]) s += v;
    return s;
}

double quantile(std::vector<double> data, double q) {
    if (data.empty()) throw std::invalid_argument("quantile of empty data");
    std::sort(data.begin(), data.end());
    const double h = static_cast<double>(data.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, data.size() - 1);
    return data[lo] + (h - static_cast<double>(lo)) * (data[hi] - data[lo]);
}

Histogram histogram(std::span<const double> values, std::span<const std::size_t> labels,
                    std::size_t class_count, std::optional<std::size_t> bins) {
    if (values.size() != labels.size()) {
        throw std::invalid_argument("histogram values and labels differ in length");
    }
    Histogram h;
    h.counts.assign(class_count, {});
    if (values.empty()) return h;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("histogram value is not finite");
        if (labels[i] >= class_count) throw std::invalid_argument("histogram label out of range");
    }
    if (bins && *bins == 0) throw std::invalid_argument("histogram needs at least one bin");

    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    double lo = *mn;
    double hi = *mx;
    std::size_t nbins = 1;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
        nbins = bins.value_or(1);
    } else if (bins) {
        nbins = *bins;
    } else {
        const std::vector<double> data(values.begin(), values.end());
        const double iqr = quantile(data, 0.75) - quantile(data, 0.25);
        const double n = static_cast<double>(values.size());
        if (iqr > 0.0) {
            const double w = 2.0 * iqr / std::cbrt(n);
            nbins = static_cast<std::size_t>(std::ceil((hi - lo) / w));
        } else {
            nbins = static_cast<std::size_t>(std::ceil(std::sqrt(n)));
        }
        nbins = std::clamp<std::size_t>(nbins, 1, kMaxBins);
    }

    h.edges.resize(nbins + 1);
    const double w = (hi - lo) / static_cast<double>(nbins);
    for (std::size_t k = 0; k <= nbins; ++k) h.edges[k] = lo + w * static_cast<double>(k);
    h.edges.back() = hi;
    for (auto& c : h.counts) c.assign(nbins, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto k = static_cast<std::size_t>((values[i] - lo) / w);
        if (k >= nbins) k = nbins - 1;
        // Guard against rounding placing a value just below its left edge.
        while (k > 0 && values[i] < h.edges[k]) --k;
        while (k + 1 < nbins && values[i] >= h.edges[k + 1]) ++k;
        ++h.counts[labels[i]][k];
    }
    h.total = values.size();
    return h;
}

}  // namespace splitflow
