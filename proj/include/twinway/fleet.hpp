#pragma once

#include "twinway/rng.hpp"
#include "twinway/scenario.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace twinway {

using VehicleId = std::uint32_t;

enum class EuroClass { Euro4 = 0, Euro5 = 1, Euro6 = 2 };

inline constexpr std::array<EuroClass, 3> kEuroClasses{EuroClass::Euro4, EuroClass::Euro5,
                                                       EuroClass::Euro6};

/// Registration shares of the Euro 4/5/6 passenger-car stock.
inline constexpr std::array<double, 3> kEuroPriors{0.148, 0.218, 0.634};

const char* to_string(EuroClass cls);
EuroClass euro_class_from_string(std::string_view text);

/// Coefficients of the average-speed CO2 model (speed in km/h, output g/km).
struct EuroCoefficients {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0, f = 0.0, g = 0.0;
    double k = 1.0;

    static EuroCoefficients for_class(EuroClass cls);

    friend bool operator==(const EuroCoefficients&, const EuroCoefficients&) = default;
};

/// EV energy model parameters.
struct EvParams {
    double alpha0 = 0.0; // ancillary power
    double alpha1 = 0.0; // drivetrain losses
    double alpha2 = 0.0; // rolling resistance
    double alpha3 = 0.0; // aerodynamic losses
    int n_pass = 1;

    friend bool operator==(const EvParams&, const EvParams&) = default;
};

inline constexpr double kDrivetrainLoss = 5e-4;
inline constexpr double kCurbMassKg = 1235.0;
inline constexpr double kPassengerMassKg = 80.0;

/// Rolling-resistance term for a given passenger load.
double rolling_resistance_alpha(int n_pass);

struct Icev {
    EuroClass euro_class = EuroClass::Euro6;
    EuroCoefficients coefficients = EuroCoefficients::for_class(EuroClass::Euro6);

    friend bool operator==(const Icev&, const Icev&) = default;
};

struct Ev {
    EvParams params;

    friend bool operator==(const Ev&, const Ev&) = default;
};

using Powertrain = std::variant<Icev, Ev>;

struct VehicleSpec {
    VehicleId id = 0;
    Powertrain powertrain;
    DynamicsParams dynamics;

    bool is_ev() const { return std::holds_alternative<Ev>(powertrain); }

    friend bool operator==(const VehicleSpec&, const VehicleSpec&) = default;
};

using Fleet = std::vector<VehicleSpec>;

EuroClass sample_euro_class(Engine& rng, const std::array<double, 3>& priors = kEuroPriors);

EvParams sample_ev_params(Engine& rng);

Icev make_icev(EuroClass cls);

/// Builds `n` vehicles with exactly round(n * ev_penetration) EVs. Which slots
/// are electric is drawn from `assignment`; ICEV classes from `classes`; EV
/// parameters from `ev`. Ids are 0..n-1 and every vehicle gets `dynamics`.
Fleet compose_fleet(std::size_t n, double ev_penetration, const DynamicsParams& dynamics,
                    Engine& assignment, Engine& classes, Engine& ev);

/// Convenience overload drawing all three streams from one engine.
Fleet compose_fleet(std::size_t n, double ev_penetration, Engine& rng);

/// Scales each vehicle's desired speed by a uniform factor in [1 - jitter, 1 + jitter].
void apply_speed_jitter(std::span<VehicleSpec> fleet, double nominal_v0, double jitter,
                        Engine& rng);

/// Partial-information view of a fleet: keeps ids, dynamics and powertrain kind;
/// Euro classes are redrawn from the priors and EV parameters from their
/// sampling distributions, independently of the true values.
Fleet degrade_to_partial(std::span<const VehicleSpec> fleet, Engine& classes, Engine& ev);

Fleet degrade_to_partial(std::span<const VehicleSpec> fleet, Engine& rng);

std::size_t count_evs(std::span<const VehicleSpec> fleet);

} // namespace twinway
