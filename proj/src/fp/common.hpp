#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fp {

// Error taxonomy. The numeric codes double as CLI exit codes and as the
// status codes of the C API, so they are part of the public contract.
class Error : public std::runtime_error {
public:
    Error(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(2, what) {}
};

class GenerationError : public Error {
public:
    explicit GenerationError(const std::string& what) : Error(3, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(4, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(5, what) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& what) : Error(6, what) {}
};

// Deterministic RNG (splitmix64). Not std::mt19937 + distributions because
// distribution output is implementation-defined; all artifacts must be
// byte-reproducible across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [0, n), bias-free.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent stream derived from this seed and a stream key.
    Rng fork(uint64_t key) const {
        uint64_t z = state_ ^ (0x9E3779B97F4A7C15ull * (key + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fp
