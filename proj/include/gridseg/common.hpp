#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridseg {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Base class for all gridseg failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input: schema violations, dangling references, bad values.
/// Always carries the offending field path in the message.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Analysis-level failure on a well-formed case (divergence, exhausted
/// search, unservable island, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Element identifier (bus or branch). Kept as text so externally supplied
/// cases can use arbitrary names; ordering is numeric-aware.
using Id = std::string;

/// True if the whole string is a base-10 unsigned integer.
inline bool is_all_digits(const Id& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

/// Orders "2" < "10" but falls back to lexicographic for non-numeric ids.
/// Used for every deterministic tie-break in the library.
inline bool natural_less(const Id& a, const Id& b) {
    if (is_all_digits(a) && is_all_digits(b)) {
        if (a.size() != b.size()) {
            // strip leading zeros before comparing lengths
            auto strip = [](const Id& s) {
                size_t i = s.find_first_not_of('0');
                return i == Id::npos ? Id("0") : s.substr(i);
            };
            Id sa = strip(a), sb = strip(b);
            if (sa.size() != sb.size()) return sa.size() < sb.size();
            if (sa != sb) return sa < sb;
            return a < b;
        }
        if (a != b) return a < b;
        return false;
    }
    return a < b;
}

/// Absolute angular distance between two complex numbers' arguments,
/// wrapped to [0, pi].
inline double phase_gap(Complex a, Complex b) {
    return std::abs(std::arg(a * std::conj(b)));
}

inline std::string join_ids(const std::vector<Id>& ids, const std::string& sep = "-") {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += sep;
        out += ids[i];
    }
    return out;
}

}  // namespace gridseg
