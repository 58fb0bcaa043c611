#pragma once

#include <cmath>
#include <cstring>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace zs {

#ifdef ZS_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

// Error taxonomy maps onto the CLI exit codes: Usage=1, Data=2, Numeric=3.
enum class ErrorKind { Usage, Data, Numeric, Internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::Numeric, msg); }

inline void check_data(bool cond, const std::string& msg) {
    if (!cond) fail_data(msg);
}

/// Deterministic RNG. All randomness in the project flows through explicit
/// seeds; the raw mt19937_64 stream is mapped to floats by hand so results
/// do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t raw() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
    }

    /// Standard normal via Box-Muller (deterministic, no cached state across copies).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::string state() const {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(spare_));
        std::memcpy(&bits, &spare_, sizeof(bits));
        std::ostringstream os;
        os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << bits;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        int hs = 0;
        uint64_t bits = 0;
        is >> eng_ >> hs >> bits;
        std::memcpy(&spare_, &bits, sizeof(bits));
        has_spare_ = hs != 0;
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derive an independent stream from a base seed, a purpose label and indices.
/// Counter-based so that data order, per-step parameter draws etc. are pure
/// functions of (seed, step) and checkpoint resume is trivially exact.
uint64_t seed_stream(uint64_t base, const std::string& label, uint64_t a = 0, uint64_t b = 0);

/// FNV-1a over raw bytes; used for parameter freeze checksums.
uint64_t bytes_checksum(const void* data, size_t n);

}  // namespace zs
