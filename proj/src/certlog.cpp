#include "graphdyn/certlog.hpp"

#include <mpfr.h>

#include <numeric>

#include <algorithm>
#include <cmath>

#include "graphdyn/errors.hpp"

namespace graphdyn {

namespace {

class Mp {
  public:
    explicit Mp(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
    ~Mp() { mpfr_clear(v_); }
    Mp(const Mp&) = delete;
    Mp& operator=(const Mp&) = delete;
    mpfr_ptr get() { return v_; }

  private:
    mpfr_t v_;
};

// Directed bound of log(radicand)/root at the given precision.
void lv_bound(const LogValue& a, mpfr_rnd_t rnd, mpfr_prec_t prec, mpfr_ptr out) {
    // log q = log num - log den, with opposite rounding on the subtrahend.
    mpfr_rnd_t anti = (rnd == MPFR_RNDD) ? MPFR_RNDU : MPFR_RNDD;
    Mp n(prec), d(prec);
    mpfr_set_z(n.get(), a.radicand.get_num().get_mpz_t(), rnd);
    mpfr_log(n.get(), n.get(), rnd);
    mpfr_set_z(d.get(), a.radicand.get_den().get_mpz_t(), anti);
    mpfr_log(d.get(), d.get(), anti);
    mpfr_sub(out, n.get(), d.get(), rnd);
    mpfr_div_ui(out, out, a.root, rnd);
}

// Certified interval comparison of (a + t) and b at one precision.
// Returns -1/+1 when decided, 0 when the intervals overlap.
int interval_cmp(const LogValue& a, const Rational& t, const LogValue& b, mpfr_prec_t prec) {
    Mp alo(prec), ahi(prec), blo(prec), bhi(prec), tv(prec);
    lv_bound(a, MPFR_RNDD, prec, alo.get());
    lv_bound(a, MPFR_RNDU, prec, ahi.get());
    lv_bound(b, MPFR_RNDD, prec, blo.get());
    lv_bound(b, MPFR_RNDU, prec, bhi.get());
    mpfr_set_q(tv.get(), t.get_mpq_t(), MPFR_RNDD);
    mpfr_add(alo.get(), alo.get(), tv.get(), MPFR_RNDD);
    mpfr_set_q(tv.get(), t.get_mpq_t(), MPFR_RNDU);
    mpfr_add(ahi.get(), ahi.get(), tv.get(), MPFR_RNDU);
    if (mpfr_cmp(ahi.get(), blo.get()) < 0) return -1;
    if (mpfr_cmp(alo.get(), bhi.get()) > 0) return 1;
    return 0;
}

// Exact sign of a - b via cross-powering of radicands.
int exact_cmp(const LogValue& a, const LogValue& b) {
    unsigned long g = std::gcd(a.root, b.root);
    unsigned long ea = b.root / g, eb = a.root / g;
    // a - b ~ log(a.q^ea) - log(b.q^eb); compare a.q^ea vs b.q^eb as rationals:
    // an^ea * bd^eb  vs  bn^eb * ad^ea   (all positive).
    BigInt lhs, rhs, tmp;
    mpz_pow_ui(lhs.get_mpz_t(), a.radicand.get_num().get_mpz_t(), ea);
    mpz_pow_ui(tmp.get_mpz_t(), b.radicand.get_den().get_mpz_t(), eb);
    lhs *= tmp;
    mpz_pow_ui(rhs.get_mpz_t(), b.radicand.get_num().get_mpz_t(), eb);
    mpz_pow_ui(tmp.get_mpz_t(), a.radicand.get_den().get_mpz_t(), ea);
    rhs *= tmp;
    return cmp(lhs, rhs) < 0 ? -1 : (lhs == rhs ? 0 : 1);
}

std::size_t bits(const Rational& q) {
    return mpz_sizeinbase(q.get_num().get_mpz_t(), 2) + mpz_sizeinbase(q.get_den().get_mpz_t(), 2);
}

}  // namespace

double LogValue::approx() const {
    Mp x(64);
    lv_bound(*this, MPFR_RNDN, 64, x.get());
    return mpfr_get_d(x.get(), MPFR_RNDN);
}

int lv_cmp(const LogValue& a, const LogValue& b) {
    if (a.radicand <= 0 || b.radicand <= 0) throw DomainError("log of non-positive radicand");
    unsigned long g = std::gcd(a.root, b.root);
    double est = std::max(double(b.root / g) * double(bits(a.radicand)),
                          double(a.root / g) * double(bits(b.radicand)));
    if (est <= double(1 << 20)) return exact_cmp(a, b);
    for (mpfr_prec_t prec = 128; prec <= 4096; prec *= 2) {
        int c = interval_cmp(a, Rational(0), b, prec);
        if (c != 0) return c;
    }
    return exact_cmp(a, b);
}

int lv_cmp_offset(const LogValue& a, const Rational& t, const LogValue& b) {
    if (t == 0) return lv_cmp(a, b);
    for (mpfr_prec_t prec = 128; prec <= (1 << 20); prec *= 2) {
        int c = interval_cmp(a, t, b, prec);
        if (c != 0) return c;
    }
    // log(x) + t = log(y) with rational t != 0 would make exp(t) rational.
    throw DomainError("certified log comparison did not terminate");
}

LogValue lv_max(const LogValue& a, const LogValue& b) { return lv_cmp(a, b) >= 0 ? a : b; }
LogValue lv_min(const LogValue& a, const LogValue& b) { return lv_cmp(a, b) <= 0 ? a : b; }

LogValue lv_scale(const LogValue& a, unsigned long k) {
    if (k == 0) return LogValue::zero();
    if (a.root % k == 0) return LogValue{a.radicand, a.root / k};
    BigInt n, d;
    mpz_pow_ui(n.get_mpz_t(), a.radicand.get_num().get_mpz_t(), k);
    mpz_pow_ui(d.get_mpz_t(), a.radicand.get_den().get_mpz_t(), k);
    return LogValue{Rational(n, d), a.root};
}

std::string lv_str(const LogValue& a) {
    if (a.radicand == 1) return "0";
    std::string s = "log(" + rat_str(a.radicand) + ")";
    if (a.root != 1) s += "/" + std::to_string(a.root);
    return s;
}

bool lv_diff_at_most(const LogValue& a, const LogValue& b, const Rational& tol) {
    // b - a <= tol  <=>  b <= a + tol
    if (lv_cmp(a, b) >= 0) return true;
    return lv_cmp_offset(a, tol, b) >= 0;
}

bool width_at_most(const EntropyEnclosure& e, const Rational& tol) {
    if (lv_eq(e.lower, e.upper)) return true;
    return lv_diff_at_most(e.lower, e.upper, tol);
}

}  // namespace graphdyn
