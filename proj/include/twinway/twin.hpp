#pragma once

#include "twinway/fleet.hpp"
#include "twinway/microsim.hpp"
#include "twinway/powertrain.hpp"
#include "twinway/scenario.hpp"
#include "twinway/validate.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace twinway {

/// Raised when partial observations cannot support a twin run.
class ObservationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A vehicle seen entering the corridor, with the powertrain kind read by the
/// roadside classifier.
struct ClassificationEvent {
    double time_s = 0.0;
    int origin = kMainline;
    bool is_ev = false;

    friend bool operator==(const ClassificationEvent&, const ClassificationEvent&) = default;
};

struct ProbeSample {
    VehicleId vehicle_id = 0;
    double mean_speed_mps = 0.0;

    friend bool operator==(const ProbeSample&, const ProbeSample&) = default;
};

struct Observations {
    std::vector<DetectorReading> detectors;
    std::vector<ProbeSample> probes;
    std::vector<ClassificationEvent> classifications;

    friend bool operator==(const Observations&, const Observations&) = default;
};

/// Applies sensor noise and drop-outs to a simulated run.
Observations observe(const SimOutput& output, std::span<const VehicleSpec> fleet,
                     const NoiseConfig& noise, Engine& rng);

struct GroundTruth {
    ScenarioConfig config;
    Schedule schedule;
    Fleet fleet;
    SimOutput output;
    Observations observations;
};

struct TwinRun {
    InfoMode mode = InfoMode::Physical;
    Schedule schedule;
    Fleet fleet;
    SimOutput output;
    CostAggregate costs;
};

/// Samples the true fleet, simulates it and derives sensor observations.
GroundTruth run_physical(const ScenarioConfig& config, std::uint64_t seed);

CostAggregate ground_truth_costs(const GroundTruth& truth);

/// Replays the ground-truth schedule with the exact fleet. With no
/// `dynamics_seed` (or the ground-truth seed) the run is a bit-exact replay;
/// another seed redraws the desired-speed jitter while keeping every powertrain.
TwinRun run_cidt(const GroundTruth& truth, const ScenarioConfig& config,
                 std::optional<std::uint64_t> dynamics_seed = std::nullopt);

/// Rebuilds demand from the classification events, degrades the observed
/// fleet to partial knowledge and simulates it.
TwinRun run_pidt(const GroundTruth& truth, const ScenarioConfig& config);

/// Signed relative error (twin - reference) / reference; absent when reference == 0.
std::optional<double> signed_error(double twin, double reference);

struct SweepRow {
    double level = 0.0;
    double physical_co2 = 0.0;
    double cidt_co2 = 0.0;
    double pidt_co2 = 0.0;
    double physical_energy = 0.0;
    double cidt_energy = 0.0;
    double pidt_energy = 0.0;
    std::optional<double> cidt_co2_error;
    std::optional<double> pidt_co2_error;
    std::optional<double> cidt_energy_error;
    std::optional<double> pidt_energy_error;
    // Mean over seeds of the per-seed signed errors.
    std::optional<double> pidt_co2_error_seed_mean;
    std::optional<double> pidt_energy_error_seed_mean;
    std::size_t seeds = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows; // ordered by level
};

/// Seeds used by sweeps: base, base + 1, ..., base + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, int count);

/// Thread count for sweeps: TWINWAY_THREADS if set, else hardware concurrency.
unsigned sweep_threads();

SweepReport penetration_sweep(const ScenarioConfig& config, std::span<const double> levels,
                              std::span<const std::uint64_t> seeds, unsigned threads = 0);

struct IntervalDivergence {
    double emission_interval_s = 0.0;
    Divergences mean;
    std::size_t seeds = 0;
};

/// Seed-averaged divergences between PIDT and physical trip-speed
/// distributions for each emission interval.
std::vector<IntervalDivergence> divergence_by_interval(const ScenarioConfig& config,
                                                       std::span<const double> intervals,
                                                       std::span<const std::uint64_t> seeds,
                                                       unsigned threads = 0);

} // namespace twinway
