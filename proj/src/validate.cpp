#include "twinway/validate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace twinway {

namespace {

constexpr std::size_t kMaxBins = 2000;

void require_shared_edges(const SpeedHistogram& p, const SpeedHistogram& q)
{
    if (p.edges != q.edges || p.probabilities.size() != q.probabilities.size()) {
        throw HistogramMismatch("histograms do not share bin edges");
    }
}

/// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double prob)
{
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> smoothed_counts(std::span<const double> samples, const std::vector<double>& edges)
{
    const std::size_t bins = edges.size() - 1;
    const double lo = edges.front();
    const double width = edges[1] - edges[0];
    std::vector<double> counts(bins, 0.0);
    for (double x : samples) {
        auto bin = static_cast<std::size_t>(std::max(0.0, std::floor((x - lo) / width)));
        counts[std::min(bin, bins - 1)] += 1.0;
    }
    const double n = static_cast<double>(samples.size());
    const double norm = 1.0 + kSmoothingEpsilon * static_cast<double>(bins);
    for (double& c : counts) {
        c = (c / n + kSmoothingEpsilon) / norm;
    }
    return counts;
}

} // namespace

double SpeedHistogram::mean() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        m += probabilities[i] * 0.5 * (edges[i] + edges[i + 1]);
    }
    return m;
}

SpeedHistogram make_histogram(std::vector<double> edges, std::vector<double> probabilities)
{
    if (edges.size() != probabilities.size() + 1 || probabilities.empty()) {
        throw std::invalid_argument("histogram needs bins + 1 edges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw std::invalid_argument("histogram edges must be strictly increasing");
        }
    }
    double total = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("histogram probabilities must be non-negative");
        }
        total += p;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("histogram has no mass");
    }
    for (double& p : probabilities) {
        p /= total;
    }
    return SpeedHistogram{std::move(edges), std::move(probabilities), 0};
}

std::pair<SpeedHistogram, SpeedHistogram> build_histogram(std::span<const double> samples,
                                                          std::span<const double> paired)
{
    if (samples.empty() || paired.empty()) {
        throw std::invalid_argument("build_histogram: empty sample list");
    }
    std::vector<double> pooled(samples.begin(), samples.end());
    pooled.insert(pooled.end(), paired.begin(), paired.end());
    for (double x : pooled) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("build_histogram: non-finite sample");
        }
    }
    std::sort(pooled.begin(), pooled.end());

    double lo = pooled.front();
    double hi = pooled.back();
    std::size_t bins = kMinBins;
    if (hi > lo) {
        const double iqr = quantile(pooled, 0.75) - quantile(pooled, 0.25);
        if (iqr > 0.0) {
            const double fd_width = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
            const double fd_bins = std::ceil((hi - lo) / fd_width);
            bins = std::clamp(static_cast<std::size_t>(fd_bins), kMinBins, kMaxBins);
        }
    } else {
        lo -= 0.5;
        hi += 0.5;
    }

    std::vector<double> edges(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) {
        edges[i] = lo + width * static_cast<double>(i);
    }
    edges.back() = hi;

    SpeedHistogram p{edges, smoothed_counts(samples, edges), samples.size()};
    SpeedHistogram q{std::move(edges), smoothed_counts(paired, p.edges), paired.size()};
    return {std::move(p), std::move(q)};
}

double kl_divergence(const SpeedHistogram& p, const SpeedHistogram& q)
{
    require_shared_edges(p, q);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.bins(); ++i) {
        const double pi = p.probabilities[i];
        if (pi == 0.0) continue;
        const double qi = q.probabilities[i];
        if (qi == 0.0) return std::numeric_limits<double>::infinity();
        sum += pi * std::log(pi / qi);
    }
    return std::max(0.0, sum);
}

double js_divergence(const SpeedHistogram& p, const SpeedHistogram& q)
{
    require_shared_edges(p, q);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.bins(); ++i) {
        const double pi = p.probabilities[i];
        const double qi = q.probabilities[i];
        const double mi = 0.5 * (pi + qi);
        if (pi > 0.0) sum += 0.5 * pi * std::log(pi / mi);
        if (qi > 0.0) sum += 0.5 * qi * std::log(qi / mi);
    }
    return std::clamp(sum, 0.0, std::numbers::ln2);
}

double wasserstein1(const SpeedHistogram& p, const SpeedHistogram& q)
{
    require_shared_edges(p, q);
    double cdf_p = 0.0;
    double cdf_q = 0.0;
    double sum = 0.0;
    // The last CDF difference is zero for normalized inputs.
    for (std::size_t i = 0; i + 1 < p.bins(); ++i) {
        cdf_p += p.probabilities[i];
        cdf_q += q.probabilities[i];
        sum += std::abs(cdf_p - cdf_q) * (p.edges[i + 1] - p.edges[i]);
    }
    return sum;
}

double bhattacharyya(const SpeedHistogram& p, const SpeedHistogram& q)
{
    require_shared_edges(p, q);
    double coefficient = 0.0;
    for (std::size_t i = 0; i < p.bins(); ++i) {
        coefficient += std::sqrt(p.probabilities[i] * q.probabilities[i]);
    }
    if (!(coefficient > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return std::max(0.0, -std::log(std::min(coefficient, 1.0)));
}

double wasserstein1_sorted(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("wasserstein1_sorted: samples must be non-empty and equal-sized");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        sum += std::abs(sa[i] - sb[i]);
    }
    return sum / static_cast<double>(sa.size());
}

std::optional<double> accuracy(double sim_value, double ref_value)
{
    if (ref_value == 0.0) {
        return std::nullopt;
    }
    return 100.0 * (1.0 - std::abs(sim_value - ref_value) / ref_value);
}

SummaryStats summarize(std::span<const TripTrace> traces)
{
    SummaryStats s;
    s.vehicle_count = traces.size();
    if (traces.empty()) {
        return s;
    }
    for (const TripTrace& t : traces) {
        s.mean_speed += t.mean_speed;
        s.mean_trip_length += t.trip_length;
    }
    s.mean_speed /= static_cast<double>(traces.size());
    s.mean_trip_length /= static_cast<double>(traces.size());
    return s;
}

std::vector<double> trip_speeds(std::span<const TripTrace> traces)
{
    std::vector<double> speeds;
    speeds.reserve(traces.size());
    for (const TripTrace& t : traces) {
        speeds.push_back(t.mean_speed);
    }
    return speeds;
}

Divergences speed_divergences(std::span<const double> twin_speeds, std::span<const double> ref_speeds)
{
    const auto [twin, ref] = build_histogram(twin_speeds, ref_speeds);
    return Divergences{kl_divergence(twin, ref), js_divergence(twin, ref), wasserstein1(twin, ref),
                       bhattacharyya(twin, ref)};
}

ValidationReport validation_report(std::span<const TripTrace> twin, std::span<const TripTrace> reference)
{
    if (twin.empty() || reference.empty()) {
        throw std::invalid_argument("validation_report: both runs need at least one completed trip");
    }
    ValidationReport r;
    r.twin = summarize(twin);
    r.reference = summarize(reference);
    r.speed_accuracy = accuracy(r.twin.mean_speed, r.reference.mean_speed);
    r.trip_length_accuracy = accuracy(r.twin.mean_trip_length, r.reference.mean_trip_length);
    r.count_accuracy = accuracy(static_cast<double>(r.twin.vehicle_count),
                                static_cast<double>(r.reference.vehicle_count));

    const std::vector<double> twin_v = trip_speeds(twin);
    const std::vector<double> ref_v = trip_speeds(reference);
    const auto [p, q] = build_histogram(twin_v, ref_v);
    r.divergences = Divergences{kl_divergence(p, q), js_divergence(p, q), wasserstein1(p, q),
                                bhattacharyya(p, q)};
    r.histogram_bins = p.bins();
    return r;
}

ValidationReport validation_report(const SimOutput& twin, const SimOutput& reference)
{
    return validation_report(std::span<const TripTrace>(twin.traces),
                             std::span<const TripTrace>(reference.traces));
}

} // namespace twinway
