#pragma once

#include "twinway/fleet.hpp"
#include "twinway/microsim.hpp"

#include <array>
#include <map>
#include <span>
#include <string>

namespace twinway {

inline constexpr double kMinEmissionSpeedKmh = 5.0;
inline constexpr double kMinEnergySpeedMps = 1.0;

struct Co2PerDistance {
    double grams_per_km = 0.0;
    bool clamped = false; // speed was raised to kMinEmissionSpeedKmh
};

struct EnergyPerDistance {
    double units_per_km = 0.0;
    bool clamped = false; // speed was raised to kMinEnergySpeedMps
};

/// k * (a + b s + c s^2 + ... + g s^6) / s with s in km/h.
Co2PerDistance icev_co2_per_km(double speed_kmh, const EuroCoefficients& coeff);

/// alpha0 / v + alpha1 + alpha2 v + alpha3 v^2 with v in m/s.
EnergyPerDistance ev_energy_per_km(double speed_mps, const EvParams& params);

struct TripCost {
    double co2_g = 0.0;        // ICEVs only
    double energy_units = 0.0; // EVs only
    double distance_km = 0.0;
    int clamp_events = 0;
    bool empty_trace = false;
};

/// Sums the per-km rate at each sample interval's mean speed times the
/// interval's distance.
TripCost trip_cost(const TripTrace& trace, const VehicleSpec& spec);

struct CostAggregate {
    std::string label;
    double total_co2_g = 0.0;
    double total_energy_units = 0.0;
    std::array<double, 3> co2_by_class{}; // indexed by EuroClass
    std::size_t icev_trips = 0;
    std::size_t ev_trips = 0;
    int clamp_events = 0;
};

/// Aggregates trip costs. Throws std::out_of_range when a trace has no spec.
CostAggregate fleet_totals(std::span<const TripTrace> traces, std::span<const VehicleSpec> specs,
                           std::string label = {});

} // namespace twinway
