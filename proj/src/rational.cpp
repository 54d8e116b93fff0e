#include "graphdyn/rational.hpp"

#include <cctype>

#include "graphdyn/errors.hpp"

namespace graphdyn {

Rational rat(long num, long den) {
    if (den == 0) throw DomainError("rational with zero denominator");
    Rational q(num, den);
    q.canonicalize();
    return q;
}

namespace {

bool valid_integer_token(const std::string& s) {
    std::size_t i = 0;
    if (i < s.size() && s[i] == '-') ++i;
    if (i >= s.size()) return false;
    for (std::size_t j = i; j < s.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
    // no leading zeros ("0" itself is fine, "-0" is not)
    if (s[i] == '0' && s.size() - i > 1) return false;
    if (s == "-0") return false;
    return true;
}

}  // namespace

std::optional<Rational> try_parse_rational(const std::string& s, std::string* error) {
    auto fail = [&](const std::string& msg) -> std::optional<Rational> {
        if (error) *error = msg + ": '" + s + "'";
        return std::nullopt;
    };
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        if (!valid_integer_token(s)) return fail("malformed rational");
        return Rational(BigInt(s));
    }
    std::string num = s.substr(0, slash);
    std::string den = s.substr(slash + 1);
    if (!valid_integer_token(num) || !valid_integer_token(den)) return fail("malformed rational");
    if (!den.empty() && den[0] == '-') return fail("negative denominator");
    BigInt n(num), d(den);
    if (d == 0) return fail("zero denominator");
    if (d == 1) return fail("non-canonical rational (denominator 1 must be written as an integer)");
    BigInt g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), d.get_mpz_t());
    if (g != 1) return fail("non-canonical rational (not in lowest terms)");
    Rational q(n, d);
    q.canonicalize();
    return q;
}

Rational parse_rational(const std::string& s) {
    std::string err;
    auto q = try_parse_rational(s, &err);
    if (!q) throw DomainError(err);
    return *q;
}

std::string rat_str(const Rational& q) {
    if (q.get_den() == 1) return q.get_num().get_str();
    return q.get_num().get_str() + "/" + q.get_den().get_str();
}

double rat_double(const Rational& q) { return q.get_d(); }

std::string decimal_approx(const Rational& q, int digits) {
    bool neg = q < 0;
    Rational a = neg ? Rational(-q) : q;
    BigInt ip = a.get_num() / a.get_den();
    Rational frac = a - Rational(ip);
    std::string out = (neg ? "-" : "") + ip.get_str();
    if (digits <= 0) return out;
    out += ".";
    BigInt rem = frac.get_num();
    const BigInt& den = frac.get_den();
    for (int i = 0; i < digits; ++i) {
        rem *= 10;
        BigInt digit = rem / den;
        rem -= digit * den;
        out += digit.get_str();
    }
    return out;
}

}  // namespace graphdyn
