#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hrlsched {

// Error categories used across the library. All inherit from std::runtime_error
// so callers may catch coarsely; the CLI maps them to exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};
struct TopologyError : std::runtime_error {
    explicit TopologyError(const std::string& msg) : std::runtime_error("topology error: " + msg) {}
};
struct LookupError : std::runtime_error {
    explicit LookupError(const std::string& msg) : std::runtime_error("lookup error: " + msg) {}
};
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};
struct LifecycleError : std::runtime_error {
    explicit LifecycleError(const std::string& msg) : std::runtime_error("lifecycle error: " + msg) {}
};
struct EnvironmentError : std::runtime_error {
    explicit EnvironmentError(const std::string& msg) : std::runtime_error("environment error: " + msg) {}
};

inline constexpr const char* kVersion = "0.1.0";

using Rng = std::mt19937_64;

inline std::string rng_state_string(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

// splitmix64 step; used to derive independent sub-seeds from one master seed
// so parallel jobs stay reproducible regardless of scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a over a string; stable across platforms, used for topology and config
// fingerprints in manifests.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

// Unit discipline: energies in microjoule, powers in milliwatt, delays in
// millisecond, throughput in packets/second. Conversions live here only.
namespace units {
inline double ms_to_s(double ms) { return ms * 1e-3; }
inline double s_to_ms(double s) { return s * 1e3; }
// microjoule per second is microwatt; report as milliwatt.
inline double uj_per_s_to_mw(double uj_per_s) { return uj_per_s * 1e-3; }
inline double ma_at_3v_to_mw(double ma) { return ma * 3.0; }
}  // namespace units

}  // namespace hrlsched
