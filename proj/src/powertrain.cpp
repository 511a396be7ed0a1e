#include "twinway/powertrain.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace twinway {

Co2PerDistance icev_co2_per_km(double speed_kmh, const EuroCoefficients& coeff)
{
    Co2PerDistance out;
    double s = speed_kmh;
    if (!(s >= kMinEmissionSpeedKmh)) {
        s = kMinEmissionSpeedKmh;
        out.clamped = true;
    }
    // Horner form of a + b s + ... + g s^6
    const double poly =
        coeff.a +
        s * (coeff.b + s * (coeff.c + s * (coeff.d + s * (coeff.e + s * (coeff.f + s * coeff.g)))));
    out.grams_per_km = coeff.k * (poly / s);
    return out;
}

EnergyPerDistance ev_energy_per_km(double speed_mps, const EvParams& params)
{
    EnergyPerDistance out;
    double v = speed_mps;
    if (!(v >= kMinEnergySpeedMps)) {
        v = kMinEnergySpeedMps;
        out.clamped = true;
    }
    out.units_per_km = params.alpha0 / v + params.alpha1 + params.alpha2 * v + params.alpha3 * v * v;
    return out;
}

TripCost trip_cost(const TripTrace& trace, const VehicleSpec& spec)
{
    TripCost cost;
    if (trace.samples.size() < 2) {
        cost.empty_trace = true;
        return cost;
    }
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const TraceSample& from = trace.samples[i - 1];
        const TraceSample& to = trace.samples[i];
        const double dt = to.t - from.t;
        const double distance_m = to.position - from.position;
        if (!(dt > 0.0) || !(distance_m > 0.0)) {
            continue;
        }
        const double speed_mps = distance_m / dt;
        const double km = distance_m / 1000.0;
        cost.distance_km += km;
        if (const auto* icev = std::get_if<Icev>(&spec.powertrain)) {
            const Co2PerDistance rate = icev_co2_per_km(speed_mps * 3.6, icev->coefficients);
            cost.co2_g += rate.grams_per_km * km;
            cost.clamp_events += rate.clamped ? 1 : 0;
        } else {
            const EnergyPerDistance rate =
                ev_energy_per_km(speed_mps, std::get<Ev>(spec.powertrain).params);
            cost.energy_units += rate.units_per_km * km;
            cost.clamp_events += rate.clamped ? 1 : 0;
        }
    }
    return cost;
}

CostAggregate fleet_totals(std::span<const TripTrace> traces, std::span<const VehicleSpec> specs,
                           std::string label)
{
    std::unordered_map<VehicleId, const VehicleSpec*> by_id;
    by_id.reserve(specs.size());
    for (const VehicleSpec& s : specs) {
        by_id.emplace(s.id, &s);
    }

    CostAggregate agg;
    agg.label = std::move(label);
    for (const TripTrace& trace : traces) {
        const auto it = by_id.find(trace.vehicle_id);
        if (it == by_id.end()) {
            throw std::out_of_range("no vehicle spec for trace of vehicle " +
                                    std::to_string(trace.vehicle_id));
        }
        const VehicleSpec& spec = *it->second;
        const TripCost cost = trip_cost(trace, spec);
        agg.clamp_events += cost.clamp_events;
        if (const auto* icev = std::get_if<Icev>(&spec.powertrain)) {
            agg.total_co2_g += cost.co2_g;
            agg.co2_by_class[static_cast<std::size_t>(icev->euro_class)] += cost.co2_g;
            ++agg.icev_trips;
        } else {
            agg.total_energy_units += cost.energy_units;
            ++agg.ev_trips;
        }
    }
    return agg;
}

} // namespace twinway
