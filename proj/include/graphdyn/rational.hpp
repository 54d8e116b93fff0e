#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>

namespace graphdyn {

// Exact rational arithmetic. mpq_class values are kept canonical (lowest
// terms, positive denominator) by GMP; the parser additionally rejects
// strings that are not in canonical form.
using Rational = mpq_class;
using BigInt = mpz_class;

Rational rat(long num, long den = 1);

// Strict parser for "p" / "p/q" with q >= 2, gcd(|p|,q) = 1, no leading
// zeros, no '+'. Returns nullopt and fills *error on rejection.
std::optional<Rational> try_parse_rational(const std::string& s, std::string* error = nullptr);

// Throwing variant of try_parse_rational.
Rational parse_rational(const std::string& s);

// Canonical serialization: "p" when the denominator is 1, else "p/q".
std::string rat_str(const Rational& q);

double rat_double(const Rational& q);

// Decimal expansion truncated to `digits` fractional digits (display only).
std::string decimal_approx(const Rational& q, int digits = 12);

}  // namespace graphdyn
