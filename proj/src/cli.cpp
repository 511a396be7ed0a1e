#include "twinway/cli.hpp"

#include "twinway/io.hpp"
#include "twinway/twin.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <string>

namespace twinway {

namespace {

struct ScenarioFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> penetration;
    std::optional<double> interval;
    std::optional<int> seeds;

    void attach(CLI::App& cmd, bool with_out = true)
    {
        cmd.add_option("--config", config_path, "Scenario config file (key = value)");
        if (with_out) {
            cmd.add_option("--out", out_dir, "Output directory")->required();
        }
        cmd.add_option("--seed", seed, "Master seed (overrides the config)");
        cmd.add_option("--penetration", penetration, "EV penetration in [0, 1]");
        cmd.add_option("--interval", interval, "Emission interval in seconds");
    }

    ScenarioConfig resolve() const
    {
        ScenarioConfig c = config_path.empty() ? ScenarioConfig{} : load_config(config_path);
        if (seed) c.seed = *seed;
        if (penetration) c.ev_penetration = *penetration;
        if (interval) c.emission_interval_s = *interval;
        if (seeds) c.sweep.seeds = *seeds;
        c.validate();
        return c;
    }
};

void print_report(std::ostream& out, const std::string& name, const ValidationReport& r)
{
    const auto pct = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
    out << name << ": speed accuracy " << pct(r.speed_accuracy) << "%, trip length accuracy "
        << pct(r.trip_length_accuracy) << "%, count accuracy " << pct(r.count_accuracy) << "%, KL "
        << r.divergences.kl << ", JS " << r.divergences.js << ", W1 " << r.divergences.wasserstein
        << ", B " << r.divergences.bhattacharyya << '\n';
}

std::vector<TripTrace> load_traces(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return read_trace_csv(in);
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Motorway digital-twin simulator and validation toolkit", "twinway"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    ScenarioFlags sim_flags, twin_flags, sweep_flags;
    auto* simulate = app.add_subcommand("simulate", "Run one ground-truth scenario");
    sim_flags.attach(*simulate);

    auto* twin = app.add_subcommand("twin", "Run physical, CIDT and PIDT and validate the twins");
    twin_flags.attach(*twin);

    auto* sweep = app.add_subcommand("sweep", "EV penetration sweep and divergence-by-interval table");
    sweep_flags.attach(*sweep);
    sweep->add_option("--seeds", sweep_flags.seeds, "Replications per level");

    std::string trace_a, trace_b, metrics_out;
    auto* metrics = app.add_subcommand("metrics", "Divergences between two trace CSV files");
    metrics->add_option("twin", trace_a, "Twin trace CSV")->required();
    metrics->add_option("reference", trace_b, "Reference trace CSV")->required();
    metrics->add_option("--out", metrics_out, "Output directory for validation.json");

    std::string detectors_path, fleet_path;
    auto* ingest = app.add_subcommand("ingest", "Validate external detector or fleet files");
    ingest->add_option("--detectors", detectors_path, "Detector CSV");
    ingest->add_option("--fleet", fleet_path, "Fleet CSV");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*simulate) {
            const ScenarioConfig config = sim_flags.resolve();
            const GroundTruth truth = run_physical(config, config.seed);
            RunResults results;
            results.config = truth.config;
            results.simulation = truth.output;
            results.fleet = truth.fleet;
            results.aggregates.push_back(ground_truth_costs(truth));
            results.ground_truth = truth;
            const RunManifest m = emit_reports(results, sim_flags.out_dir);
            out << "simulated " << truth.output.inserted << " vehicles (" << truth.output.completed
                << " completed, " << truth.output.active << " active, " << truth.output.aborted
                << " aborted, " << truth.output.queued << " queued); " << m.output_hashes.size()
                << " files written to " << sim_flags.out_dir << '\n';
            if (!truth.schedule.reference_interval) {
                out << "note: emission interval " << config.emission_interval_s
                    << " s is not one of 10/40/80/100 s\n";
            }
        } else if (*twin) {
            const ScenarioConfig config = twin_flags.resolve();
            const GroundTruth truth = run_physical(config, config.seed);
            const TwinRun cidt = run_cidt(truth, config);
            const TwinRun pidt = run_pidt(truth, config);
            RunResults results;
            results.config = truth.config;
            results.simulation = truth.output;
            results.fleet = truth.fleet;
            results.aggregates = {ground_truth_costs(truth), cidt.costs, pidt.costs};
            results.cidt_report = validation_report(cidt.output, truth.output);
            results.pidt_report = validation_report(pidt.output, truth.output);
            results.ground_truth = truth;
            emit_reports(results, twin_flags.out_dir);
            print_report(out, "cidt", *results.cidt_report);
            print_report(out, "pidt", *results.pidt_report);
        } else if (*sweep) {
            const ScenarioConfig config = sweep_flags.resolve();
            const auto seeds = seed_range(config.seed, config.sweep.seeds);
            RunResults results;
            results.config = config;
            results.sweep = penetration_sweep(config, config.sweep.levels, seeds);
            results.divergences = divergence_by_interval(config, config.sweep.intervals, seeds);
            emit_reports(results, sweep_flags.out_dir);
            out << "sweep: " << results.sweep->rows.size() << " levels x " << seeds.size()
                << " seeds written to " << sweep_flags.out_dir << '\n';
        } else if (*metrics) {
            const auto a = load_traces(trace_a);
            const auto b = load_traces(trace_b);
            const ValidationReport report = validation_report(a, b);
            out << to_json(report).dump(2) << '\n';
            if (!metrics_out.empty()) {
                ReportWriter writer(metrics_out);
                writer.add("validation.json", to_json(report).dump(2) + "\n");
                writer.commit(RunManifest{});
            }
        } else if (*ingest) {
            if (detectors_path.empty() && fleet_path.empty()) {
                err << "error: ingest needs --detectors and/or --fleet\n\n" << ingest->help();
                return 2;
            }
            if (!detectors_path.empty()) {
                const auto readings = ingest_detector_csv(detectors_path);
                std::int64_t vehicles = 0;
                for (const auto& r : readings) vehicles += r.count;
                out << detectors_path << ": " << readings.size() << " readings, " << vehicles
                    << " vehicles\n";
            }
            if (!fleet_path.empty()) {
                std::ifstream in(fleet_path);
                if (!in) throw std::runtime_error("cannot open " + fleet_path);
                const Fleet fleet = read_fleet_csv(in);
                out << fleet_path << ": " << fleet.size() << " vehicles, " << count_evs(fleet) << " EVs\n";
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace twinway
