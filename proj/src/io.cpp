#include "twinway/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace twinway {

using nlohmann::json;

// ===========================================================================
// Numbers
// ===========================================================================

std::string format_double(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

namespace {

template <typename Int>
Int parse_int(std::string_view text)
{
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
    }
    return value;
}

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<double> parse_double_list(std::string_view value)
{
    std::vector<double> out;
    if (trim(value).empty()) return out;
    for (auto item : split(value, ',')) {
        out.push_back(parse_double(trim(item)));
    }
    return out;
}

std::string format_double_list(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += format_double(values[i]);
    }
    return out;
}

std::vector<Ramp> parse_ramps(std::string_view value)
{
    std::vector<Ramp> ramps;
    if (trim(value).empty()) return ramps;
    for (auto item : split(value, ',')) {
        const auto parts = split(trim(item), ':');
        if (parts.size() != 3) {
            throw std::invalid_argument("ramp must be kind:position:share, got '" + std::string(item) + "'");
        }
        Ramp r;
        const auto kind = trim(parts[0]);
        if (kind == "on") {
            r.kind = RampKind::On;
        } else if (kind == "off") {
            r.kind = RampKind::Off;
        } else {
            throw std::invalid_argument("ramp kind must be on or off, got '" + std::string(kind) + "'");
        }
        r.position_m = parse_double(trim(parts[1]));
        r.demand_share = parse_double(trim(parts[2]));
        ramps.push_back(r);
    }
    return ramps;
}

std::string format_ramps(const std::vector<Ramp>& ramps)
{
    std::string out;
    for (std::size_t i = 0; i < ramps.size(); ++i) {
        if (i) out += ", ";
        out += ramps[i].kind == RampKind::On ? "on:" : "off:";
        out += format_double(ramps[i].position_m) + ":" + format_double(ramps[i].demand_share);
    }
    return out;
}

struct ConfigKey {
    const char* name;
    std::function<void(ScenarioConfig&, std::string_view)> parse;
    std::function<std::string(const ScenarioConfig&)> emit;
};

template <typename Field>
ConfigKey double_key(const char* name, Field field)
{
    return {name, [field](ScenarioConfig& c, std::string_view v) { field(c) = parse_double(v); },
            [field](const ScenarioConfig& c) {
                ScenarioConfig copy = c;
                return format_double(field(copy));
            }};
}

template <typename Int, typename Field>
ConfigKey int_key(const char* name, Field field)
{
    return {name, [field](ScenarioConfig& c, std::string_view v) { field(c) = parse_int<Int>(v); },
            [field](const ScenarioConfig& c) {
                ScenarioConfig copy = c;
                return std::to_string(field(copy));
            }};
}

#define TW_FIELD(expr) [](ScenarioConfig& c) -> auto& { return expr; }

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = {
        int_key<std::uint64_t>("seed", TW_FIELD(c.seed)),
        double_key("horizon_s", TW_FIELD(c.horizon_s)),
        double_key("cooldown_s", TW_FIELD(c.cooldown_s)),
        double_key("dt_s", TW_FIELD(c.dt_s)),
        double_key("emission_interval_s", TW_FIELD(c.emission_interval_s)),
        int_key<int>("batch_size", TW_FIELD(c.batch_size)),
        double_key("detector_window_s", TW_FIELD(c.detector_window_s)),
        double_key("ev_penetration", TW_FIELD(c.ev_penetration)),
        {"info_mode",
         [](ScenarioConfig& c, std::string_view v) { c.info_mode = info_mode_from_string(std::string(v)); },
         [](const ScenarioConfig& c) { return to_string(c.info_mode); }},
        double_key("v0_jitter", TW_FIELD(c.v0_jitter)),
        double_key("corridor.length_m", TW_FIELD(c.corridor.length_m)),
        int_key<int>("corridor.lanes", TW_FIELD(c.corridor.lane_count)),
        double_key("corridor.speed_limit_mps", TW_FIELD(c.corridor.speed_limit_mps)),
        {"corridor.ramps", [](ScenarioConfig& c, std::string_view v) { c.corridor.ramps = parse_ramps(v); },
         [](const ScenarioConfig& c) { return format_ramps(c.corridor.ramps); }},
        {"corridor.detectors",
         [](ScenarioConfig& c, std::string_view v) { c.corridor.detector_stations = parse_double_list(v); },
         [](const ScenarioConfig& c) { return format_double_list(c.corridor.detector_stations); }},
        double_key("dynamics.v0_mps", TW_FIELD(c.dynamics.desired_speed)),
        double_key("dynamics.max_accel", TW_FIELD(c.dynamics.max_accel)),
        double_key("dynamics.comfortable_decel", TW_FIELD(c.dynamics.comfortable_decel)),
        double_key("dynamics.headway_s", TW_FIELD(c.dynamics.headway)),
        double_key("dynamics.min_gap_m", TW_FIELD(c.dynamics.min_gap)),
        double_key("dynamics.accel_exponent", TW_FIELD(c.dynamics.accel_exponent)),
        double_key("dynamics.politeness", TW_FIELD(c.dynamics.politeness)),
        double_key("dynamics.lane_change_threshold", TW_FIELD(c.dynamics.lane_change_threshold)),
        double_key("dynamics.safe_decel", TW_FIELD(c.dynamics.safe_decel)),
        double_key("dynamics.emergency_decel", TW_FIELD(c.dynamics.emergency_decel)),
        double_key("dynamics.vehicle_length_m", TW_FIELD(c.dynamics.vehicle_length)),
        double_key("noise.speed_sigma_mps", TW_FIELD(c.noise.speed_sigma_mps)),
        double_key("noise.count_drop_rate", TW_FIELD(c.noise.count_drop_rate)),
        {"sweep.levels", [](ScenarioConfig& c, std::string_view v) { c.sweep.levels = parse_double_list(v); },
         [](const ScenarioConfig& c) { return format_double_list(c.sweep.levels); }},
        int_key<int>("sweep.seeds", TW_FIELD(c.sweep.seeds)),
        {"sweep.intervals",
         [](ScenarioConfig& c, std::string_view v) { c.sweep.intervals = parse_double_list(v); },
         [](const ScenarioConfig& c) { return format_double_list(c.sweep.intervals); }},
    };
    return keys;
}

#undef TW_FIELD

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Reads lines, checking the header; calls fn(fields, line_number) for each data row.
void for_each_csv_row(std::istream& in, std::string_view header, std::size_t columns,
                      const std::function<void(const std::vector<std::string_view>&, std::size_t)>& fn)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing header, expected '" + std::string(header) + "'");
    }
    if (trim(line) != header) {
        throw ParseError(1, "unexpected header '" + std::string(trim(line)) + "', expected '" +
                                std::string(header) + "'");
    }
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        const auto row = trim(line);
        if (row.empty()) continue;
        auto fields = split(row, ',');
        if (fields.size() != columns) {
            throw ParseError(number, "expected " + std::to_string(columns) + " fields, got " +
                                         std::to_string(fields.size()));
        }
        for (auto& f : fields) f = trim(f);
        try {
            fn(fields, number);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(number, e.what());
        }
    }
}

std::optional<double> optional_json(const json& j)
{
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

// ===========================================================================
// Config documents
// ===========================================================================

ScenarioConfig parse_config(std::string_view text)
{
    ScenarioConfig config;
    std::unordered_map<std::string_view, const ConfigKey*> table;
    for (const ConfigKey& k : config_keys()) {
        table.emplace(k.name, &k);
    }
    std::set<std::string> seen;

    std::size_t number = 0;
    for (auto raw : split(text, '\n')) {
        ++number;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(number, "expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) {
            throw ConfigError(key, "unknown key (line " + std::to_string(number) + ")");
        }
        if (!seen.insert(key).second) {
            throw ConfigError(key, "duplicate key (line " + std::to_string(number) + ")");
        }
        try {
            it->second->parse(config, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(key, std::string(e.what()) + " (line " + std::to_string(number) + ")");
        }
    }
    config.validate();
    return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string emit_config(const ScenarioConfig& config)
{
    std::string out = "# twinway scenario (resolved)\n";
    for (const ConfigKey& k : config_keys()) {
        out += k.name;
        out += " = ";
        out += k.emit(config);
        out += '\n';
    }
    return out;
}

// ===========================================================================
// CSV
// ===========================================================================

void write_detector_csv(std::ostream& out, std::span<const DetectorReading> readings)
{
    out << kDetectorHeader << '\n';
    for (const DetectorReading& r : readings) {
        out << format_double(r.station_m) << ',' << format_double(r.window_start_s) << ','
            << format_double(r.window_len_s) << ',' << r.count << ','
            << (r.mean_speed_mps ? format_double(*r.mean_speed_mps) : std::string()) << '\n';
    }
}

std::vector<DetectorReading> read_detector_csv(std::istream& in)
{
    std::vector<DetectorReading> readings;
    for_each_csv_row(in, kDetectorHeader, 5, [&](const auto& f, std::size_t line) {
        DetectorReading r;
        r.station_m = parse_double(f[0]);
        r.window_start_s = parse_double(f[1]);
        r.window_len_s = parse_double(f[2]);
        r.count = parse_int<std::int64_t>(f[3]);
        if (r.count < 0) {
            throw ParseError(line, "negative count");
        }
        if (!f[4].empty()) {
            r.mean_speed_mps = parse_double(f[4]);
        }
        r.validate();
        readings.push_back(r);
    });
    return readings;
}

std::vector<DetectorReading> ingest_detector_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return read_detector_csv(in);
}

void write_trace_csv(std::ostream& out, std::span<const TripTrace> traces)
{
    out << kTraceHeader << '\n';
    for (const TripTrace& t : traces) {
        for (const TraceSample& s : t.samples) {
            out << t.vehicle_id << ',' << format_double(s.t) << ',' << format_double(s.position) << ','
                << s.lane << ',' << format_double(s.speed) << '\n';
        }
    }
}

std::vector<TripTrace> read_trace_csv(std::istream& in)
{
    std::vector<VehicleId> order;
    std::unordered_map<VehicleId, std::vector<TraceSample>> samples;
    for_each_csv_row(in, kTraceHeader, 5, [&](const auto& f, std::size_t) {
        const auto id = parse_int<VehicleId>(f[0]);
        auto [it, fresh] = samples.try_emplace(id);
        if (fresh) order.push_back(id);
        it->second.push_back({parse_double(f[1]), parse_double(f[2]), parse_int<int>(f[3]),
                              parse_double(f[4])});
    });
    std::vector<TripTrace> traces;
    traces.reserve(order.size());
    for (VehicleId id : order) {
        traces.push_back(make_trace(id, std::move(samples[id])));
    }
    return traces;
}

void write_fleet_csv(std::ostream& out, std::span<const VehicleSpec> fleet)
{
    out << kFleetHeader << '\n';
    for (const VehicleSpec& s : fleet) {
        out << s.id << ',';
        if (const auto* icev = std::get_if<Icev>(&s.powertrain)) {
            out << "ICEV," << to_string(icev->euro_class) << ",,,,,,";
        } else {
            const EvParams& p = std::get<Ev>(s.powertrain).params;
            out << "EV,," << format_double(p.alpha0) << ',' << format_double(p.alpha1) << ','
                << format_double(p.alpha2) << ',' << format_double(p.alpha3) << ',' << p.n_pass << ',';
        }
        out << format_double(s.dynamics.desired_speed) << '\n';
    }
}

Fleet read_fleet_csv(std::istream& in, const DynamicsParams& base)
{
    Fleet fleet;
    for_each_csv_row(in, kFleetHeader, 9, [&](const auto& f, std::size_t line) {
        VehicleSpec s;
        s.id = parse_int<VehicleId>(f[0]);
        if (f[1] == "ICEV") {
            s.powertrain = make_icev(euro_class_from_string(f[2]));
        } else if (f[1] == "EV") {
            EvParams p;
            p.alpha0 = parse_double(f[3]);
            p.alpha1 = parse_double(f[4]);
            p.alpha2 = parse_double(f[5]);
            p.alpha3 = parse_double(f[6]);
            p.n_pass = parse_int<int>(f[7]);
            s.powertrain = Ev{p};
        } else {
            throw ParseError(line, "kind must be ICEV or EV");
        }
        s.dynamics = base;
        s.dynamics.desired_speed = parse_double(f[8]);
        fleet.push_back(s);
    });
    return fleet;
}

void write_cost_csv(std::ostream& out, std::span<const TripTrace> traces, std::span<const VehicleSpec> fleet)
{
    std::unordered_map<VehicleId, const VehicleSpec*> by_id;
    for (const VehicleSpec& s : fleet) by_id.emplace(s.id, &s);

    out << kCostHeader << '\n';
    for (const TripTrace& t : traces) {
        const auto it = by_id.find(t.vehicle_id);
        if (it == by_id.end()) {
            throw std::out_of_range("no vehicle spec for trace of vehicle " + std::to_string(t.vehicle_id));
        }
        const VehicleSpec& spec = *it->second;
        const TripCost cost = trip_cost(t, spec);
        out << t.vehicle_id << ',';
        if (const auto* icev = std::get_if<Icev>(&spec.powertrain)) {
            out << "ICEV," << to_string(icev->euro_class) << ',';
        } else {
            const EvParams& p = std::get<Ev>(spec.powertrain).params;
            out << "EV,a0=" << format_double(p.alpha0) << ";a1=" << format_double(p.alpha1)
                << ";a2=" << format_double(p.alpha2) << ";a3=" << format_double(p.alpha3) << ',';
        }
        out << format_double(t.trip_length / 1000.0) << ',' << format_double(t.mean_speed) << ','
            << format_double(spec.is_ev() ? cost.energy_units : cost.co2_g) << '\n';
    }
}

void write_divergence_csv(std::ostream& out, std::span<const IntervalDivergence> rows)
{
    out << kDivergenceHeader << '\n';
    for (const IntervalDivergence& r : rows) {
        out << format_double(r.emission_interval_s) << ',' << format_double(r.mean.kl) << ','
            << format_double(r.mean.js) << ',' << format_double(r.mean.wasserstein) << ','
            << format_double(r.mean.bhattacharyya) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const SweepReport& report)
{
    const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    out << "level,mode,total_co2_g,total_energy_units,co2_signed_error,energy_signed_error\n";
    for (const SweepRow& r : report.rows) {
        const std::string level = format_double(r.level);
        out << level << ",physical," << format_double(r.physical_co2) << ','
            << format_double(r.physical_energy) << ',' << opt(signed_error(r.physical_co2, r.physical_co2))
            << ',' << opt(signed_error(r.physical_energy, r.physical_energy)) << '\n';
        out << level << ",cidt," << format_double(r.cidt_co2) << ',' << format_double(r.cidt_energy) << ','
            << opt(r.cidt_co2_error) << ',' << opt(r.cidt_energy_error) << '\n';
        out << level << ",pidt," << format_double(r.pidt_co2) << ',' << format_double(r.pidt_energy) << ','
            << opt(r.pidt_co2_error) << ',' << opt(r.pidt_energy_error) << '\n';
    }
}

// ===========================================================================
// JSON
// ===========================================================================

namespace {

json stats_json(const SummaryStats& s)
{
    return {{"mean_speed_mps", s.mean_speed},
            {"mean_trip_length_m", s.mean_trip_length},
            {"vehicle_count", s.vehicle_count}};
}

json reading_json(const DetectorReading& r)
{
    return {{"station_m", r.station_m},
            {"window_start_s", r.window_start_s},
            {"window_len_s", r.window_len_s},
            {"count", r.count},
            {"mean_speed_mps", optional_to_json(r.mean_speed_mps)}};
}

DetectorReading reading_from_json(const json& j)
{
    DetectorReading r;
    r.station_m = j.at("station_m").get<double>();
    r.window_start_s = j.at("window_start_s").get<double>();
    r.window_len_s = j.at("window_len_s").get<double>();
    r.count = j.at("count").get<std::int64_t>();
    r.mean_speed_mps = optional_json(j.at("mean_speed_mps"));
    return r;
}

} // namespace

json to_json(const ValidationReport& r)
{
    return {
        {"conventions",
         {{"log_base", "e (nats)"},
          {"accuracy", "100 * (1 - |twin - reference| / reference)"},
          {"binning", "Freedman-Diaconis width over pooled trip speeds, at least 20 shared bins"},
          {"smoothing_epsilon", kSmoothingEpsilon}}},
        {"twin", stats_json(r.twin)},
        {"reference", stats_json(r.reference)},
        {"speed_accuracy_pct", optional_to_json(r.speed_accuracy)},
        {"trip_length_accuracy_pct", optional_to_json(r.trip_length_accuracy)},
        {"count_accuracy_pct", optional_to_json(r.count_accuracy)},
        {"kl_nats", r.divergences.kl},
        {"js_nats", r.divergences.js},
        {"wasserstein_mps", r.divergences.wasserstein},
        {"bhattacharyya", r.divergences.bhattacharyya},
        {"histogram_bins", r.histogram_bins},
    };
}

json to_json(const SweepReport& report)
{
    json rows = json::array();
    for (const SweepRow& r : report.rows) {
        rows.push_back({
            {"level", r.level},
            {"seeds", r.seeds},
            {"physical", {{"co2_g", r.physical_co2}, {"energy_units", r.physical_energy}}},
            {"cidt",
             {{"co2_g", r.cidt_co2},
              {"energy_units", r.cidt_energy},
              {"co2_signed_error", optional_to_json(r.cidt_co2_error)},
              {"energy_signed_error", optional_to_json(r.cidt_energy_error)}}},
            {"pidt",
             {{"co2_g", r.pidt_co2},
              {"energy_units", r.pidt_energy},
              {"co2_signed_error", optional_to_json(r.pidt_co2_error)},
              {"energy_signed_error", optional_to_json(r.pidt_energy_error)},
              {"co2_signed_error_seed_mean", optional_to_json(r.pidt_co2_error_seed_mean)},
              {"energy_signed_error_seed_mean", optional_to_json(r.pidt_energy_error_seed_mean)}}},
        });
    }
    return {{"rows", rows}};
}

json to_json(const CostAggregate& a)
{
    return {{"label", a.label},
            {"total_co2_g", a.total_co2_g},
            {"total_energy_units", a.total_energy_units},
            {"co2_by_class_g",
             {{"Euro4", a.co2_by_class[0]}, {"Euro5", a.co2_by_class[1]}, {"Euro6", a.co2_by_class[2]}}},
            {"icev_trips", a.icev_trips},
            {"ev_trips", a.ev_trips},
            {"clamp_events", a.clamp_events}};
}

json aggregates_by_level(std::span<const CostAggregate> aggregates)
{
    json out = json::object();
    for (const CostAggregate& a : aggregates) {
        out[a.label] = to_json(a);
    }
    return out;
}

json ground_truth_bundle(const GroundTruth& truth)
{
    json schedule = json::array();
    for (const Insertion& i : truth.schedule.insertions) {
        schedule.push_back({i.time_s, i.origin, i.destination});
    }
    std::ostringstream fleet_csv;
    write_fleet_csv(fleet_csv, truth.fleet);

    json detectors = json::array();
    for (const DetectorReading& r : truth.observations.detectors) detectors.push_back(reading_json(r));
    json probes = json::array();
    for (const ProbeSample& p : truth.observations.probes) probes.push_back({p.vehicle_id, p.mean_speed_mps});
    json classifications = json::array();
    for (const ClassificationEvent& c : truth.observations.classifications) {
        classifications.push_back({c.time_s, c.origin, c.is_ev});
    }
    const SimOutput& o = truth.output;
    return {
        {"config", emit_config(truth.config)},
        {"schedule", schedule},
        {"reference_interval", truth.schedule.reference_interval},
        {"fleet_csv", fleet_csv.str()},
        {"observations",
         {{"detectors", detectors}, {"probes", probes}, {"classifications", classifications}}},
        {"counts",
         {{"scheduled", o.scheduled},
          {"inserted", o.inserted},
          {"completed", o.completed},
          {"active", o.active},
          {"aborted", o.aborted},
          {"queued", o.queued}}},
    };
}

GroundTruth load_ground_truth_bundle(const json& bundle)
{
    GroundTruth truth;
    truth.config = parse_config(bundle.at("config").get<std::string>());
    truth.schedule.reference_interval = bundle.at("reference_interval").get<bool>();
    for (const json& row : bundle.at("schedule")) {
        truth.schedule.insertions.push_back({row.at(0).get<double>(), row.at(1).get<int>(), row.at(2).get<int>()});
    }
    std::istringstream fleet_csv(bundle.at("fleet_csv").get<std::string>());
    truth.fleet = read_fleet_csv(fleet_csv, truth.config.dynamics);

    const json& obs = bundle.at("observations");
    for (const json& r : obs.at("detectors")) truth.observations.detectors.push_back(reading_from_json(r));
    for (const json& p : obs.at("probes")) {
        truth.observations.probes.push_back({p.at(0).get<VehicleId>(), p.at(1).get<double>()});
    }
    for (const json& c : obs.at("classifications")) {
        truth.observations.classifications.push_back(
            {c.at(0).get<double>(), c.at(1).get<int>(), c.at(2).get<bool>()});
    }

    // The trajectories are not stored; replaying the schedule restores them exactly.
    truth.output = run(truth.config, truth.schedule, truth.fleet);
    const json& counts = bundle.at("counts");
    if (counts.at("inserted").get<std::size_t>() != truth.output.inserted ||
        counts.at("completed").get<std::size_t>() != truth.output.completed) {
        throw std::runtime_error("ground-truth bundle does not replay to its recorded counts");
    }
    return truth;
}

// ===========================================================================
// Report emission
// ===========================================================================

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

json RunManifest::to_json() const
{
    json seeds = json::object();
    for (const auto& [name, seed] : stream_seeds) seeds[name] = seed;
    json outputs = json::object();
    for (const auto& [name, hash] : output_hashes) outputs[name] = hash;
    return {{"tool_version", tool_version},
            {"master_seed", master_seed},
            {"stream_seeds", seeds},
            {"resolved_config", resolved_config},
            {"output_hashes", outputs}};
}

RunManifest make_manifest(const ScenarioConfig& config)
{
    RunManifest m;
    m.resolved_config = emit_config(config);
    m.master_seed = config.seed;
    for (std::string_view name : streams::kAll) {
        m.stream_seeds.emplace(std::string(name), derive_stream_seed(config.seed, name));
    }
    return m;
}

ReportWriter::ReportWriter(std::filesystem::path directory) : directory_(std::move(directory)) {}

void ReportWriter::add(std::string name, std::string contents)
{
    files_.emplace_back(std::move(name), std::move(contents));
}

RunManifest ReportWriter::commit(RunManifest manifest) const
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory_, ec);
    if (ec || !fs::is_directory(directory_)) {
        throw std::runtime_error("cannot create output directory " + directory_.string());
    }
    const fs::path probe = directory_ / ".twinway-write-probe";
    {
        std::ofstream out(probe, std::ios::binary);
        if (!out || !(out << "probe") || !out.flush()) {
            throw std::runtime_error("output directory is not writable: " + directory_.string());
        }
    }
    fs::remove(probe, ec);

    manifest.output_hashes.clear();
    const auto write = [&](const std::string& name, const std::string& contents) {
        std::ofstream out(directory_ / name, std::ios::binary | std::ios::trunc);
        out << contents;
        if (!out) {
            throw std::runtime_error("failed writing " + (directory_ / name).string());
        }
    };
    for (const auto& [name, contents] : files_) {
        write(name, contents);
        manifest.output_hashes[name] = sha256_hex(contents);
    }
    write("manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

RunManifest emit_reports(const RunResults& results, const std::filesystem::path& directory)
{
    ReportWriter writer(directory);
    if (results.simulation) {
        std::ostringstream traces, detectors;
        write_trace_csv(traces, results.simulation->traces);
        write_detector_csv(detectors, results.simulation->detector_readings);
        writer.add("traces.csv", traces.str());
        writer.add("detectors.csv", detectors.str());
    }
    if (!results.fleet.empty()) {
        std::ostringstream fleet;
        write_fleet_csv(fleet, results.fleet);
        writer.add("fleet.csv", fleet.str());
        if (results.simulation) {
            std::ostringstream costs;
            write_cost_csv(costs, results.simulation->traces, results.fleet);
            writer.add("costs.csv", costs.str());
        }
    }
    if (!results.aggregates.empty()) {
        writer.add("aggregates.json", aggregates_by_level(results.aggregates).dump(2) + "\n");
    }
    if (results.cidt_report) {
        writer.add("validation_cidt.json", to_json(*results.cidt_report).dump(2) + "\n");
    }
    if (results.pidt_report) {
        writer.add("validation_pidt.json", to_json(*results.pidt_report).dump(2) + "\n");
    }
    if (!results.divergences.empty()) {
        std::ostringstream csv;
        write_divergence_csv(csv, results.divergences);
        writer.add("divergence_by_interval.csv", csv.str());
    }
    if (results.sweep && !results.sweep->rows.empty()) {
        std::ostringstream csv;
        write_sweep_csv(csv, *results.sweep);
        writer.add("sweep.csv", csv.str());
        writer.add("sweep.json", to_json(*results.sweep).dump(2) + "\n");
    }
    if (results.ground_truth) {
        writer.add("ground_truth.json", ground_truth_bundle(*results.ground_truth).dump() + "\n");
    }
    return writer.commit(make_manifest(results.config));
}

} // namespace twinway
