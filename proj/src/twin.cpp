#include "twinway/twin.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

namespace twinway {

namespace {

/// Runs fn(0..n-1) on up to `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

double gaussian(Engine& rng, double sigma)
{
    std::normal_distribution<double> n(0.0, sigma);
    return n(rng);
}

} // namespace

Observations observe(const SimOutput& output, std::span<const VehicleSpec> fleet,
                     const NoiseConfig& noise, Engine& rng)
{
    std::unordered_map<VehicleId, bool> is_ev;
    for (const VehicleSpec& s : fleet) {
        is_ev.emplace(s.id, s.is_ev());
    }
    const double keep = 1.0 - noise.count_drop_rate;
    std::bernoulli_distribution kept(keep);

    Observations obs;
    for (const DetectorReading& truth : output.detector_readings) {
        DetectorReading r = truth;
        if (noise.count_drop_rate > 0.0 && r.count > 0) {
            std::binomial_distribution<std::int64_t> thin(r.count, keep);
            r.count = thin(rng);
        }
        if (r.count == 0) {
            r.mean_speed_mps.reset();
        } else if (noise.speed_sigma_mps > 0.0) {
            r.mean_speed_mps = std::max(0.0, *r.mean_speed_mps + gaussian(rng, noise.speed_sigma_mps));
        }
        obs.detectors.push_back(r);
    }
    for (const TripTrace& trace : output.traces) {
        if (!kept(rng)) continue;
        double v = trace.mean_speed;
        if (noise.speed_sigma_mps > 0.0) {
            v = std::max(0.0, v + gaussian(rng, noise.speed_sigma_mps));
        }
        obs.probes.push_back({trace.vehicle_id, v});
    }
    for (const EntryEvent& entry : output.entries) {
        if (!kept(rng)) continue;
        const auto it = is_ev.find(entry.vehicle_id);
        if (it == is_ev.end()) {
            throw std::out_of_range("entry event for unknown vehicle " + std::to_string(entry.vehicle_id));
        }
        obs.classifications.push_back({entry.time_s, entry.origin, it->second});
    }
    return obs;
}

GroundTruth run_physical(const ScenarioConfig& config, std::uint64_t seed)
{
    GroundTruth truth;
    truth.config = config;
    truth.config.seed = seed;
    truth.config.info_mode = InfoMode::Physical;
    truth.config.validate();
    const ScenarioConfig& cfg = truth.config;

    Engine demand = make_stream(seed, streams::kDemand);
    truth.schedule = schedule_demand(cfg, demand);

    Engine assignment = make_stream(seed, streams::kAssignment);
    Engine classes = make_stream(seed, streams::kEuroClass);
    Engine ev = make_stream(seed, streams::kEvParams);
    Engine jitter = make_stream(seed, streams::kJitter);
    truth.fleet = compose_fleet(truth.schedule.total(), cfg.ev_penetration, cfg.dynamics, assignment,
                                classes, ev);
    apply_speed_jitter(truth.fleet, cfg.dynamics.desired_speed, cfg.v0_jitter, jitter);

    truth.output = run(cfg, truth.schedule, truth.fleet);

    Engine noise = make_stream(seed, streams::kNoise);
    truth.observations = observe(truth.output, truth.fleet, cfg.noise, noise);
    return truth;
}

CostAggregate ground_truth_costs(const GroundTruth& truth)
{
    return fleet_totals(truth.output.traces, truth.fleet, "physical");
}

TwinRun run_cidt(const GroundTruth& truth, const ScenarioConfig& config,
                 std::optional<std::uint64_t> dynamics_seed)
{
    if (!(config.corridor == truth.config.corridor)) {
        throw std::invalid_argument("run_cidt: corridor differs from the ground truth");
    }
    ScenarioConfig cfg = config;
    cfg.seed = truth.config.seed;
    cfg.info_mode = InfoMode::Cidt;

    TwinRun twin;
    twin.mode = InfoMode::Cidt;
    twin.schedule = truth.schedule;
    twin.fleet = truth.fleet;
    if (dynamics_seed && *dynamics_seed != truth.config.seed) {
        Engine jitter = make_stream(*dynamics_seed, streams::kJitter);
        apply_speed_jitter(twin.fleet, cfg.dynamics.desired_speed, cfg.v0_jitter, jitter);
    }
    twin.output = run(cfg, twin.schedule, twin.fleet);
    twin.costs = fleet_totals(twin.output.traces, twin.fleet, "cidt");
    return twin;
}

TwinRun run_pidt(const GroundTruth& truth, const ScenarioConfig& config)
{
    const auto& events = truth.observations.classifications;
    if (events.empty()) {
        throw ObservationError("run_pidt: no vehicles observed, demand cannot be reconstructed");
    }
    ScenarioConfig cfg = config;
    cfg.seed = truth.config.seed;
    cfg.info_mode = InfoMode::Pidt;
    const std::uint64_t seed = cfg.seed;

    std::vector<ClassificationEvent> ordered(events.begin(), events.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.time_s < b.time_s; });

    // Destinations are not observed; draw them from the ramp shares.
    Engine demand = make_stream(seed, streams::kPartialDemand);
    TwinRun twin;
    twin.mode = InfoMode::Pidt;
    twin.schedule.reference_interval = truth.schedule.reference_interval;
    Fleet observed;
    observed.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const ClassificationEvent& e = ordered[i];
        twin.schedule.insertions.push_back(
            {e.time_s, e.origin, draw_destination(cfg.corridor, e.origin, demand)});
        VehicleSpec spec;
        spec.id = static_cast<VehicleId>(i);
        spec.dynamics = cfg.dynamics;
        if (e.is_ev) {
            spec.powertrain = Ev{};
        } else {
            spec.powertrain = Icev{};
        }
        observed.push_back(spec);
    }

    Engine classes = make_stream(seed, streams::kPartialClass);
    Engine ev = make_stream(seed, streams::kPartialEv);
    twin.fleet = degrade_to_partial(observed, classes, ev);
    // Individual desired speeds are not observable either.
    Engine jitter = make_stream(seed, streams::kPartialJitter);
    apply_speed_jitter(twin.fleet, cfg.dynamics.desired_speed, cfg.v0_jitter, jitter);

    twin.output = run(cfg, twin.schedule, twin.fleet);
    twin.costs = fleet_totals(twin.output.traces, twin.fleet, "pidt");
    return twin;
}

std::optional<double> signed_error(double twin, double reference)
{
    if (reference == 0.0) {
        return std::nullopt;
    }
    return (twin - reference) / reference;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count)
{
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < count; ++i) {
        seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

unsigned sweep_threads()
{
    if (const char* env = std::getenv("TWINWAY_THREADS")) {
        unsigned value = 0;
        const std::string_view text(env);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc{} && ptr == text.data() + text.size() && value > 0) {
            return value;
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SweepReport penetration_sweep(const ScenarioConfig& config, std::span<const double> levels,
                              std::span<const std::uint64_t> seeds, unsigned threads)
{
    if (levels.empty()) {
        throw std::invalid_argument("penetration_sweep: no levels");
    }
    for (double l : levels) {
        if (!(l >= 0.0 && l <= 1.0)) {
            throw std::invalid_argument("penetration_sweep: level outside [0, 1]");
        }
    }
    if (threads == 0) threads = sweep_threads();

    struct Totals {
        CostAggregate physical, cidt, pidt;
    };
    std::vector<Totals> results(levels.size() * seeds.size());
    parallel_for(results.size(), threads, [&](std::size_t job) {
        ScenarioConfig cfg = config;
        cfg.ev_penetration = levels[job / seeds.size()];
        const GroundTruth truth = run_physical(cfg, seeds[job % seeds.size()]);
        results[job] = Totals{ground_truth_costs(truth), run_cidt(truth, cfg).costs,
                              run_pidt(truth, cfg).costs};
    });

    std::vector<std::size_t> order(levels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return levels[a] < levels[b]; });

    SweepReport report;
    for (std::size_t li : order) {
        SweepRow row;
        row.level = levels[li];
        row.seeds = seeds.size();
        double co2_err_sum = 0.0, energy_err_sum = 0.0;
        std::size_t co2_err_n = 0, energy_err_n = 0;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Totals& t = results[li * seeds.size() + si];
            row.physical_co2 += t.physical.total_co2_g;
            row.cidt_co2 += t.cidt.total_co2_g;
            row.pidt_co2 += t.pidt.total_co2_g;
            row.physical_energy += t.physical.total_energy_units;
            row.cidt_energy += t.cidt.total_energy_units;
            row.pidt_energy += t.pidt.total_energy_units;
            if (auto e = signed_error(t.pidt.total_co2_g, t.physical.total_co2_g)) {
                co2_err_sum += *e;
                ++co2_err_n;
            }
            if (auto e = signed_error(t.pidt.total_energy_units, t.physical.total_energy_units)) {
                energy_err_sum += *e;
                ++energy_err_n;
            }
        }
        const double n = static_cast<double>(std::max<std::size_t>(seeds.size(), 1));
        row.physical_co2 /= n;
        row.cidt_co2 /= n;
        row.pidt_co2 /= n;
        row.physical_energy /= n;
        row.cidt_energy /= n;
        row.pidt_energy /= n;
        row.cidt_co2_error = signed_error(row.cidt_co2, row.physical_co2);
        row.pidt_co2_error = signed_error(row.pidt_co2, row.physical_co2);
        row.cidt_energy_error = signed_error(row.cidt_energy, row.physical_energy);
        row.pidt_energy_error = signed_error(row.pidt_energy, row.physical_energy);
        if (co2_err_n > 0) row.pidt_co2_error_seed_mean = co2_err_sum / static_cast<double>(co2_err_n);
        if (energy_err_n > 0) {
            row.pidt_energy_error_seed_mean = energy_err_sum / static_cast<double>(energy_err_n);
        }
        report.rows.push_back(row);
    }
    return report;
}

std::vector<IntervalDivergence> divergence_by_interval(const ScenarioConfig& config,
                                                       std::span<const double> intervals,
                                                       std::span<const std::uint64_t> seeds,
                                                       unsigned threads)
{
    if (threads == 0) threads = sweep_threads();
    std::vector<Divergences> results(intervals.size() * seeds.size());
    parallel_for(results.size(), threads, [&](std::size_t job) {
        ScenarioConfig cfg = config;
        cfg.emission_interval_s = intervals[job / seeds.size()];
        const GroundTruth truth = run_physical(cfg, seeds[job % seeds.size()]);
        const TwinRun pidt = run_pidt(truth, cfg);
        results[job] = speed_divergences(trip_speeds(pidt.output.traces), trip_speeds(truth.output.traces));
    });

    std::vector<IntervalDivergence> rows;
    for (std::size_t ii = 0; ii < intervals.size(); ++ii) {
        IntervalDivergence row;
        row.emission_interval_s = intervals[ii];
        row.seeds = seeds.size();
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Divergences& d = results[ii * seeds.size() + si];
            row.mean.kl += d.kl;
            row.mean.js += d.js;
            row.mean.wasserstein += d.wasserstein;
            row.mean.bhattacharyya += d.bhattacharyya;
        }
        const double n = static_cast<double>(std::max<std::size_t>(seeds.size(), 1));
        row.mean.kl /= n;
        row.mean.js /= n;
        row.mean.wasserstein /= n;
        row.mean.bhattacharyya /= n;
        rows.push_back(row);
    }
    return rows;
}

} // namespace twinway
