#pragma once

#include <string>

#include "graphdyn/rational.hpp"

namespace graphdyn {

// The number log(radicand)/root with radicand a positive rational and
// root >= 1. All certified entropy bounds are carried in this form so that
// comparisons can be decided without uncontrolled floating-point rounding:
// pure LogValue comparisons reduce to rational powering, mixed comparisons
// (with a rational offset) go through an MPFR directed-rounding ladder
// whose verdicts are certified at every precision.
struct LogValue {
    Rational radicand = 1;
    unsigned long root = 1;

    static LogValue zero() { return LogValue{Rational(1), 1}; }
    static LogValue log_of(long num, long den = 1, unsigned long root = 1) {
        return LogValue{rat(num, den), root};
    }
    double approx() const;
};

// Sign of a - b. Exact: uses radicand cross-powering, with an MPFR interval
// filter for large exponents.
int lv_cmp(const LogValue& a, const LogValue& b);

// Sign of (a + t) - b for a rational offset t. For t != 0 the two sides can
// never be equal, so the precision ladder always terminates.
int lv_cmp_offset(const LogValue& a, const Rational& t, const LogValue& b);

inline bool lv_eq(const LogValue& a, const LogValue& b) { return lv_cmp(a, b) == 0; }
inline bool lv_lt(const LogValue& a, const LogValue& b) { return lv_cmp(a, b) < 0; }
inline bool lv_le(const LogValue& a, const LogValue& b) { return lv_cmp(a, b) <= 0; }

LogValue lv_max(const LogValue& a, const LogValue& b);
LogValue lv_min(const LogValue& a, const LogValue& b);

// k * value. Divides the root when possible, else powers the radicand.
LogValue lv_scale(const LogValue& a, unsigned long k);

std::string lv_str(const LogValue& a);

// Certified enclosure of a topological entropy value.
struct EntropyEnclosure {
    LogValue lower = LogValue::zero();
    LogValue upper = LogValue::zero();
    int depth = 0;           // doubling depth 2^depth used on the reduced block
    bool converged = true;   // tolerance reached (always true for exact enclosures)
    bool base_has_circle = false;  // entropy-equals-log-rho applied beyond trees

    bool exact() const { return lv_eq(lower, upper); }
    double approx_lower() const { return lower.approx(); }
    double approx_upper() const { return upper.approx(); }
};

// Certified test of (upper - lower) <= tol. Sound in both directions; if the
// precision ladder cannot decide, reports false (treated as not converged).
bool width_at_most(const EntropyEnclosure& e, const Rational& tol);

// Certified test of (b - a) <= tol for LogValues (gap of enclosures etc.).
bool lv_diff_at_most(const LogValue& a, const LogValue& b, const Rational& tol);

}  // namespace graphdyn
