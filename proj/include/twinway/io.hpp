#pragma once

#include "twinway/fleet.hpp"
#include "twinway/microsim.hpp"
#include "twinway/powertrain.hpp"
#include "twinway/scenario.hpp"
#include "twinway/twin.hpp"
#include "twinway/validate.hpp"

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twinway {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Malformed text input; `line` is 1-based (0 when not applicable).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& message)
        : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
          line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// ---------------------------------------------------------------------------
// Config documents: `key = value` lines, `#` comments, dotted section keys.
// ---------------------------------------------------------------------------

ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value; parse_config(emit_config(c)) == c.
std::string emit_config(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDetectorHeader =
    "station_m,window_start_s,window_len_s,count,mean_speed_mps";
inline constexpr std::string_view kTraceHeader = "vehicle_id,t_s,position_m,lane,speed_mps";
inline constexpr std::string_view kFleetHeader =
    "id,kind,euro_class,alpha0,alpha1,alpha2,alpha3,n_pass,v0";
inline constexpr std::string_view kCostHeader =
    "vehicle_id,kind,class_or_alpha_summary,trip_km,mean_speed,cost";
inline constexpr std::string_view kDivergenceHeader =
    "emission_interval_s,kl,js,wasserstein,bhattacharyya";

void write_detector_csv(std::ostream& out, std::span<const DetectorReading> readings);
std::vector<DetectorReading> read_detector_csv(std::istream& in);
std::vector<DetectorReading> ingest_detector_csv(const std::filesystem::path& path);

void write_trace_csv(std::ostream& out, std::span<const TripTrace> traces);
std::vector<TripTrace> read_trace_csv(std::istream& in);

/// Fleet rows; dynamics other than v0 come from `base` when reading.
void write_fleet_csv(std::ostream& out, std::span<const VehicleSpec> fleet);
Fleet read_fleet_csv(std::istream& in, const DynamicsParams& base = {});

void write_cost_csv(std::ostream& out, std::span<const TripTrace> traces,
                    std::span<const VehicleSpec> fleet);

void write_divergence_csv(std::ostream& out, std::span<const IntervalDivergence> rows);

void write_sweep_csv(std::ostream& out, const SweepReport& report);

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const SweepReport& report);
nlohmann::json to_json(const CostAggregate& aggregate);
nlohmann::json aggregates_by_level(std::span<const CostAggregate> aggregates);

/// Ground-truth bundle: config, schedule, fleet and observations. Enough to
/// replay a CIDT run in another process.
nlohmann::json ground_truth_bundle(const GroundTruth& truth);
GroundTruth load_ground_truth_bundle(const nlohmann::json& bundle);

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view data);

struct RunManifest {
    std::string resolved_config;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::uint64_t> stream_seeds;
    std::string tool_version{kToolVersion};
    std::map<std::string, std::string> output_hashes; // file name -> sha256

    nlohmann::json to_json() const;
};

RunManifest make_manifest(const ScenarioConfig& config);

/// Collects named output files and writes them together with manifest.json.
/// The directory is created and probed for writability before any file is
/// written.
class ReportWriter {
public:
    explicit ReportWriter(std::filesystem::path directory);

    void add(std::string name, std::string contents);
    bool empty() const { return files_.empty(); }

    /// Writes every file plus `manifest.json`; returns the manifest written.
    RunManifest commit(RunManifest manifest) const;

private:
    std::filesystem::path directory_;
    std::vector<std::pair<std::string, std::string>> files_;
};

struct RunResults {
    ScenarioConfig config;
    std::optional<SimOutput> simulation;
    Fleet fleet;
    std::optional<ValidationReport> pidt_report;
    std::optional<ValidationReport> cidt_report;
    std::vector<CostAggregate> aggregates;
    std::vector<IntervalDivergence> divergences;
    std::optional<SweepReport> sweep;
    std::optional<GroundTruth> ground_truth;
};

/// Writes every artifact present in `results` to `directory` with a manifest.
RunManifest emit_reports(const RunResults& results, const std::filesystem::path& directory);

} // namespace twinway
