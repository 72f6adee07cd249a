#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wildmatch {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};
class IngestError : public Error {
public:
    using Error::Error;
};
class PreconditionError : public Error {
public:
    using Error::Error;
};
class ShapeError : public Error {
public:
    using Error::Error;
};
class InfeasibleSplitError : public Error {
public:
    using Error::Error;
};
class CalibrationError : public Error {
public:
    using Error::Error;
};
class FormatError : public Error {
public:
    using Error::Error;
};

/// Calendar date at day granularity. Comparable, hashable via day number.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    /// Days since 1970-01-01 (proleptic Gregorian).
    long day_number() const;
    static Date from_day_number(long z);

    std::string to_string() const;
    /// Parses "YYYY-MM-DD". Throws FormatError on malformed or invalid dates.
    static Date parse(const std::string& text);
};

/// Deterministic 64-bit generator (splitmix64) with a portable shuffle.
/// The standard library distributions are implementation-defined, so all
/// randomness that reaches an output file goes through this.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Modulo bias is negligible for n far below 2^64.
    uint64_t below(uint64_t n) { return next() % n; }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double gaussian();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    /// Derives an independent stream, e.g. one per identity or per run.
    static uint64_t mix(uint64_t seed, uint64_t stream) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
        return r.next();
    }

private:
    uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

inline constexpr const char* kGeneratorName = "splitmix64-fisheryates";

/// FNV-1a, used to derive per-run seeds from string keys.
uint64_t hash_string(const std::string& s);

}  // namespace wildmatch
