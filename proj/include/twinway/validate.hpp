#pragma once

#include "twinway/microsim.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace twinway {

class HistogramMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kSmoothingEpsilon = 1e-9;
inline constexpr std::size_t kMinBins = 20;

struct SpeedHistogram {
    std::vector<double> edges;         // bins + 1 strictly increasing values
    std::vector<double> probabilities; // sums to 1
    std::size_t sample_count = 0;

    std::size_t bins() const { return probabilities.size(); }
    double bin_width() const { return edges.size() < 2 ? 0.0 : edges[1] - edges[0]; }
    double mean() const;
};

/// Builds a histogram from explicit edges and probabilities (normalized).
SpeedHistogram make_histogram(std::vector<double> edges, std::vector<double> probabilities);

/// Shared-edge histograms over the pooled range of both samples, with
/// Freedman-Diaconis bin width (at least kMinBins bins) and epsilon smoothing.
std::pair<SpeedHistogram, SpeedHistogram> build_histogram(std::span<const double> samples,
                                                          std::span<const double> paired);

double kl_divergence(const SpeedHistogram& p, const SpeedHistogram& q);
double js_divergence(const SpeedHistogram& p, const SpeedHistogram& q);
double wasserstein1(const SpeedHistogram& p, const SpeedHistogram& q);
double bhattacharyya(const SpeedHistogram& p, const SpeedHistogram& q);

/// Sorted-pairing W1 between two equal-size raw samples.
double wasserstein1_sorted(std::span<const double> a, std::span<const double> b);

/// 100 * (1 - |sim - ref| / ref); absent when ref == 0.
std::optional<double> accuracy(double sim_value, double ref_value);

struct SummaryStats {
    double mean_speed = 0.0;       // m/s, mean of per-trip space-mean speeds
    double mean_trip_length = 0.0; // m
    std::size_t vehicle_count = 0; // completed trips

    friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

SummaryStats summarize(std::span<const TripTrace> traces);

struct Divergences {
    double kl = 0.0;
    double js = 0.0;
    double wasserstein = 0.0;
    double bhattacharyya = 0.0;
};

/// All four metrics between the twin's and the reference's per-trip speeds.
Divergences speed_divergences(std::span<const double> twin_speeds,
                              std::span<const double> ref_speeds);

struct ValidationReport {
    SummaryStats twin;
    SummaryStats reference;
    std::optional<double> speed_accuracy;
    std::optional<double> trip_length_accuracy;
    std::optional<double> count_accuracy;
    Divergences divergences;
    std::size_t histogram_bins = 0;
};

std::vector<double> trip_speeds(std::span<const TripTrace> traces);

ValidationReport validation_report(std::span<const TripTrace> twin,
                                   std::span<const TripTrace> reference);

ValidationReport validation_report(const SimOutput& twin, const SimOutput& reference);

} // namespace twinway
