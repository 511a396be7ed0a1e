#include "twinway/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace twinway {

const char* to_string(EuroClass cls)
{
    switch (cls) {
    case EuroClass::Euro4: return "Euro4";
    case EuroClass::Euro5: return "Euro5";
    case EuroClass::Euro6: return "Euro6";
    }
    return "Euro6";
}

EuroClass euro_class_from_string(std::string_view text)
{
    for (EuroClass cls : kEuroClasses) {
        if (text == to_string(cls)) return cls;
    }
    throw std::invalid_argument("unknown Euro class '" + std::string(text) + "'");
}

EuroCoefficients EuroCoefficients::for_class(EuroClass cls)
{
    EuroCoefficients c;
    c.a = 3747.3;
    c.c = -0.8527;
    c.d = 0.010318;
    c.k = 1.0;
    switch (cls) {
    case EuroClass::Euro4: c.b = 155.99; break;
    case EuroClass::Euro5: c.b = 128.77; break;
    case EuroClass::Euro6: c.b = 105.71; break;
    }
    return c;
}

double rolling_resistance_alpha(int n_pass)
{
    return 0.0293 + 0.05 * ((kCurbMassKg + kPassengerMassKg * n_pass) / kCurbMassKg);
}

Icev make_icev(EuroClass cls) { return Icev{cls, EuroCoefficients::for_class(cls)}; }

EuroClass sample_euro_class(Engine& rng, const std::array<double, 3>& priors)
{
    std::discrete_distribution<int> dist(priors.begin(), priors.end());
    return static_cast<EuroClass>(dist(rng));
}

EvParams sample_ev_params(Engine& rng)
{
    std::uniform_real_distribution<double> ancillary(0.0, 2.0);
    std::uniform_int_distribution<int> passengers(1, 4);
    std::normal_distribution<double> aero(3.12e-5, 5e-6);

    EvParams p;
    p.alpha0 = 0.2 + ancillary(rng);
    p.alpha1 = kDrivetrainLoss;
    p.n_pass = passengers(rng);
    p.alpha2 = rolling_resistance_alpha(p.n_pass);
    double aero_loss = aero(rng);
    while (aero_loss < 0.0) {
        aero_loss = aero(rng);
    }
    p.alpha3 = aero_loss + 4e-6;
    return p;
}

Fleet compose_fleet(std::size_t n, double ev_penetration, const DynamicsParams& dynamics,
                    Engine& assignment, Engine& classes, Engine& ev)
{
    if (!(ev_penetration >= 0.0 && ev_penetration <= 1.0)) {
        throw std::invalid_argument("EV penetration must be in [0, 1]");
    }
    // Half-up rounding; the small offset absorbs products like 5 * 0.3 = 1.4999999999999998.
    const auto ev_count =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * ev_penetration + 0.5 + 1e-9));

    std::vector<bool> electric(n, false);
    std::fill_n(electric.begin(), ev_count, true);
    std::shuffle(electric.begin(), electric.end(), assignment);

    Fleet fleet;
    fleet.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        VehicleSpec spec;
        spec.id = static_cast<VehicleId>(i);
        spec.dynamics = dynamics;
        if (electric[i]) {
            spec.powertrain = Ev{sample_ev_params(ev)};
        } else {
            spec.powertrain = make_icev(sample_euro_class(classes));
        }
        fleet.push_back(spec);
    }
    return fleet;
}

Fleet compose_fleet(std::size_t n, double ev_penetration, Engine& rng)
{
    return compose_fleet(n, ev_penetration, DynamicsParams{}, rng, rng, rng);
}

void apply_speed_jitter(std::span<VehicleSpec> fleet, double nominal_v0, double jitter, Engine& rng)
{
    std::uniform_real_distribution<double> factor(1.0 - jitter, 1.0 + jitter);
    for (VehicleSpec& spec : fleet) {
        spec.dynamics.desired_speed = jitter > 0.0 ? nominal_v0 * factor(rng) : nominal_v0;
    }
}

Fleet degrade_to_partial(std::span<const VehicleSpec> fleet, Engine& classes, Engine& ev)
{
    Fleet partial;
    partial.reserve(fleet.size());
    for (const VehicleSpec& truth : fleet) {
        VehicleSpec spec = truth;
        if (truth.is_ev()) {
            spec.powertrain = Ev{sample_ev_params(ev)};
        } else {
            spec.powertrain = make_icev(sample_euro_class(classes));
        }
        partial.push_back(spec);
    }
    return partial;
}

Fleet degrade_to_partial(std::span<const VehicleSpec> fleet, Engine& rng)
{
    return degrade_to_partial(fleet, rng, rng);
}

std::size_t count_evs(std::span<const VehicleSpec> fleet)
{
    return static_cast<std::size_t>(
        std::count_if(fleet.begin(), fleet.end(), [](const VehicleSpec& s) { return s.is_ev(); }));
}

} // namespace twinway
