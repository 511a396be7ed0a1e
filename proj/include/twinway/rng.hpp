#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace twinway {

using Engine = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a stream name.
/// Each sampling dimension (classes, EV parameters, demand, jitter, ...) owns a
/// named stream so that changing one dimension never perturbs the others.
std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view stream);

inline Engine make_stream(std::uint64_t master, std::string_view stream)
{
    return Engine{derive_stream_seed(master, stream)};
}

// Stream names used throughout the toolkit.
namespace streams {
inline constexpr std::string_view kEuroClass = "euro-class";
inline constexpr std::string_view kEvParams = "ev-params";
inline constexpr std::string_view kDemand = "demand";
inline constexpr std::string_view kJitter = "jitter";
inline constexpr std::string_view kAssignment = "assignment";
inline constexpr std::string_view kNoise = "noise";
inline constexpr std::string_view kPartialClass = "partial-class";
inline constexpr std::string_view kPartialEv = "partial-ev";
inline constexpr std::string_view kPartialJitter = "partial-jitter";
inline constexpr std::string_view kPartialDemand = "partial-demand";
inline constexpr std::string_view kAll[] = {
    kEuroClass, kEvParams,      kDemand,        kJitter,        kAssignment,
    kNoise,     kPartialClass,  kPartialEv,     kPartialJitter, kPartialDemand,
};
} // namespace streams

} // namespace twinway
