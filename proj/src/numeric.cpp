#include "birkhoff/numeric.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace birkhoff {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::RationalInput: return "RationalInput";
    case ErrorKind::PrecisionExhausted: return "PrecisionExhausted";
    case ErrorKind::TableTooShort: return "TableTooShort";
    case ErrorKind::InvalidDigits: return "InvalidDigits";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::NotAStepFunction: return "NotAStepFunction";
    case ErrorKind::InvalidBlock: return "InvalidBlock";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::VerificationFailed: return "VerificationFailed";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Integer parse_integer(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) fail(ErrorKind::InvalidInput, "empty integer");
  std::size_t start = (t[0] == '-' || t[0] == '+') ? 1 : 0;
  if (start == t.size()) fail(ErrorKind::InvalidInput, "bad integer '" + text + "'");
  for (std::size_t i = start; i < t.size(); ++i)
    if (t[i] < '0' || t[i] > '9') fail(ErrorKind::InvalidInput, "bad integer '" + text + "'");
  if (t[0] == '+') t = t.substr(1);
  return Integer(t, 10);
}

Rational parse_rational(const std::string& text) {
  std::string t = trim(text);
  auto slash = t.find('/');
  if (slash != std::string::npos) {
    Integer num = parse_integer(t.substr(0, slash));
    Integer den = parse_integer(t.substr(slash + 1));
    if (den == 0) fail(ErrorKind::InvalidInput, "zero denominator in '" + text + "'");
    Rational r(num, den);
    r.canonicalize();
    return r;
  }
  auto dot = t.find('.');
  if (dot != std::string::npos) {
    std::string whole = t.substr(0, dot);
    std::string digits = t.substr(dot + 1);
    bool neg = !whole.empty() && whole[0] == '-';
    if (whole.empty() || whole == "-" || whole == "+") whole += "0";
    Integer w = parse_integer(whole);
    Integer f = digits.empty() ? Integer(0) : parse_integer(digits);
    Integer scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, digits.size());
    Integer wa = abs(w);
    Rational r(wa * scale + f, scale);
    r.canonicalize();
    return neg ? Rational(-r) : r;
  }
  return Rational(parse_integer(t));
}

std::string to_string(const Integer& x) { return x.get_str(); }

std::string to_string(const Rational& x) {
  if (x.get_den() == 1) return x.get_num().get_str();
  return x.get_num().get_str() + "/" + x.get_den().get_str();
}

Integer floor_of(const Rational& x) {
  Integer r;
  mpz_fdiv_q(r.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return r;
}

Rational frac_of(const Rational& x) { return x - Rational(floor_of(x)); }

Integer lcm_of(const Integer& a, const Integer& b) {
  Integer r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

int sign_of(const Rational& x) { return sgn(x); }
int sign_of(const Integer& x) { return sgn(x); }

namespace {

using i128 = __int128;

i128 floor_sum_small(i128 n, i128 m, i128 a, i128 b) {
  i128 ans = 0;
  while (true) {
    if (a >= m) {
      ans += (n - 1) * n / 2 * (a / m);
      a %= m;
    }
    if (b >= m) {
      ans += n * (b / m);
      b %= m;
    }
    i128 y_max = a * n + b;
    if (y_max < m) break;
    n = y_max / m;
    b = y_max % m;
    std::swap(m, a);
  }
  return ans;
}

bool fits_small(const Integer& x) { return mpz_sizeinbase(x.get_mpz_t(), 2) <= 50; }

i128 to_i128(const Integer& x) {
  return static_cast<i128>(x.get_si());
}

Integer from_i128(i128 v) {
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  Integer hi(static_cast<unsigned long>(u >> 64));
  Integer lo(static_cast<unsigned long>(u & 0xffffffffffffffffULL));
  Integer r = (hi << 64) + lo;
  return neg ? Integer(-r) : r;
}

}  // namespace

Integer floor_sum(const Integer& n0, const Integer& m0, const Integer& a0, const Integer& b0) {
  if (n0 <= 0) return 0;
  if (m0 <= 0 || a0 < 0 || b0 < 0) fail(ErrorKind::InvalidInput, "floor_sum domain");
  if (fits_small(n0) && fits_small(m0) && fits_small(a0) && fits_small(b0) && a0 < m0 && b0 < m0)
    return from_i128(floor_sum_small(to_i128(n0), to_i128(m0), to_i128(a0), to_i128(b0)));
  Integer n = n0, m = m0, a = a0, b = b0, ans = 0;
  Integer q, r;
  while (true) {
    if (a >= m) {
      mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
      ans += (n - 1) * n / 2 * q;
      a = r;
    }
    if (b >= m) {
      mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), b.get_mpz_t(), m.get_mpz_t());
      ans += n * q;
      b = r;
    }
    Integer y_max = a * n + b;
    if (y_max < m) break;
    mpz_fdiv_qr(n.get_mpz_t(), b.get_mpz_t(), y_max.get_mpz_t(), m.get_mpz_t());
    std::swap(m, a);
  }
  return ans;
}

// ---------------------------------------------------------------- BigFloat

BigFloat::BigFloat(unsigned prec) { mpfr_init2(v_, prec); mpfr_set_zero(v_, 1); }
BigFloat::BigFloat(const BigFloat& o) {
  mpfr_init2(v_, mpfr_get_prec(o.v_));
  mpfr_set(v_, o.v_, MPFR_RNDN);
}
BigFloat::BigFloat(BigFloat&& o) noexcept {
  mpfr_init2(v_, mpfr_get_prec(o.v_));
  mpfr_swap(v_, o.v_);
}
BigFloat& BigFloat::operator=(const BigFloat& o) {
  if (this != &o) {
    mpfr_set_prec(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  return *this;
}
BigFloat& BigFloat::operator=(BigFloat&& o) noexcept {
  if (this != &o) mpfr_swap(v_, o.v_);
  return *this;
}
BigFloat::~BigFloat() { mpfr_clear(v_); }

Rational BigFloat::to_rational() const {
  Rational r;
  mpfr_get_q(r.get_mpq_t(), v_);
  return r;
}

// ---------------------------------------------------------------- Interval

Interval Interval::from_rational(const Rational& x, unsigned prec) {
  Interval iv(prec);
  mpfr_set_q(iv.lo.get(), x.get_mpq_t(), MPFR_RNDD);
  mpfr_set_q(iv.hi.get(), x.get_mpq_t(), MPFR_RNDU);
  return iv;
}

Interval Interval::from_rationals(const Rational& lo, const Rational& hi, unsigned prec) {
  Interval iv(prec);
  mpfr_set_q(iv.lo.get(), lo.get_mpq_t(), MPFR_RNDD);
  mpfr_set_q(iv.hi.get(), hi.get_mpq_t(), MPFR_RNDU);
  return iv;
}

Interval Interval::log2_const(unsigned prec) {
  Interval iv(prec);
  mpfr_const_log2(iv.lo.get(), MPFR_RNDD);
  mpfr_const_log2(iv.hi.get(), MPFR_RNDU);
  return iv;
}

bool Interval::contains_integer_boundary() const {
  BigFloat fl(precision()), fh(precision());
  mpfr_floor(fl.get(), lo.get());
  mpfr_floor(fh.get(), hi.get());
  return mpfr_cmp(fl.get(), fh.get()) != 0;
}

double Interval::width() const {
  BigFloat w(precision());
  mpfr_sub(w.get(), hi.get(), lo.get(), MPFR_RNDU);
  return w.to_double(MPFR_RNDU);
}

double Interval::mid() const {
  BigFloat m(precision() + 1);
  mpfr_add(m.get(), lo.get(), hi.get(), MPFR_RNDN);
  mpfr_div_2ui(m.get(), m.get(), 1, MPFR_RNDN);
  return m.to_double();
}

Interval& Interval::operator+=(const Interval& o) {
  mpfr_add(lo.get(), lo.get(), o.lo.get(), MPFR_RNDD);
  mpfr_add(hi.get(), hi.get(), o.hi.get(), MPFR_RNDU);
  return *this;
}

Interval& Interval::operator-=(const Interval& o) {
  BigFloat nl(precision());
  mpfr_sub(nl.get(), lo.get(), o.hi.get(), MPFR_RNDD);
  mpfr_sub(hi.get(), hi.get(), o.lo.get(), MPFR_RNDU);
  mpfr_swap(lo.get(), nl.get());
  return *this;
}

Interval& Interval::add_rational(const Rational& x) {
  mpfr_add_q(lo.get(), lo.get(), x.get_mpq_t(), MPFR_RNDD);
  mpfr_add_q(hi.get(), hi.get(), x.get_mpq_t(), MPFR_RNDU);
  return *this;
}

Interval& Interval::mul_si(long k) {
  if (k >= 0) {
    mpfr_mul_si(lo.get(), lo.get(), k, MPFR_RNDD);
    mpfr_mul_si(hi.get(), hi.get(), k, MPFR_RNDU);
  } else {
    BigFloat nl(precision());
    mpfr_mul_si(nl.get(), hi.get(), k, MPFR_RNDD);
    mpfr_mul_si(hi.get(), lo.get(), k, MPFR_RNDU);
    mpfr_swap(lo.get(), nl.get());
  }
  return *this;
}

Interval& Interval::mul_z(const Integer& k) {
  if (k >= 0) {
    mpfr_mul_z(lo.get(), lo.get(), k.get_mpz_t(), MPFR_RNDD);
    mpfr_mul_z(hi.get(), hi.get(), k.get_mpz_t(), MPFR_RNDU);
  } else {
    BigFloat nl(precision());
    mpfr_mul_z(nl.get(), hi.get(), k.get_mpz_t(), MPFR_RNDD);
    mpfr_mul_z(hi.get(), lo.get(), k.get_mpz_t(), MPFR_RNDU);
    mpfr_swap(lo.get(), nl.get());
  }
  return *this;
}

Interval& Interval::mul_rational(const Rational& x) {
  if (x >= 0) {
    mpfr_mul_q(lo.get(), lo.get(), x.get_mpq_t(), MPFR_RNDD);
    mpfr_mul_q(hi.get(), hi.get(), x.get_mpq_t(), MPFR_RNDU);
  } else {
    BigFloat nl(precision());
    mpfr_mul_q(nl.get(), hi.get(), x.get_mpq_t(), MPFR_RNDD);
    mpfr_mul_q(hi.get(), lo.get(), x.get_mpq_t(), MPFR_RNDU);
    mpfr_swap(lo.get(), nl.get());
  }
  return *this;
}

Interval log_of(const Interval& x) {
  if (mpfr_sgn(x.lo.get()) <= 0) fail(ErrorKind::PrecisionExhausted, "log of an enclosure touching 0");
  Interval r(x.precision());
  mpfr_log(r.lo.get(), x.lo.get(), MPFR_RNDD);
  mpfr_log(r.hi.get(), x.hi.get(), MPFR_RNDU);
  return r;
}

Interval operator+(Interval a, const Interval& b) { return a += b; }
Interval operator-(Interval a, const Interval& b) { return a -= b; }

// ---------------------------------------------------------------- CertifiedValue

CertifiedValue::CertifiedValue() : lo_(0), hi_(0), bits_(0) {}
CertifiedValue::CertifiedValue(const Rational& exact) : lo_(exact), hi_(exact), bits_(0) {}
CertifiedValue::CertifiedValue(Rational lo, Rational hi, unsigned bits, Refiner refiner)
    : lo_(std::move(lo)), hi_(std::move(hi)), bits_(bits), refiner_(std::move(refiner)) {
  if (lo_ > hi_) fail(ErrorKind::InvalidInput, "inverted enclosure");
}

CertifiedValue CertifiedValue::from_interval(const Interval& iv, Refiner refiner) {
  return CertifiedValue(iv.lo.to_rational(), iv.hi.to_rational(), iv.precision(), std::move(refiner));
}

double CertifiedValue::mid() const { return Rational((lo_ + hi_) / 2).get_d(); }
double CertifiedValue::width() const { return Rational(hi_ - lo_).get_d(); }

namespace {
std::atomic<unsigned> g_precision_cap{kPrecisionCap};
}

unsigned precision_cap() { return g_precision_cap.load(std::memory_order_relaxed); }

void set_precision_cap(unsigned bits) {
  if (bits < kDefaultPrecision || bits > kPrecisionCap)
    fail(ErrorKind::InvalidInput, "precision cap must be in [" + std::to_string(kDefaultPrecision) + ", " +
                                      std::to_string(kPrecisionCap) + "]");
  g_precision_cap.store(bits, std::memory_order_relaxed);
}

CertifiedValue CertifiedValue::refined(unsigned bits) const {
  if (is_exact() || !refiner_) return *this;
  if (bits > precision_cap()) fail(ErrorKind::PrecisionExhausted, "refinement beyond precision cap");
  auto [l, h] = refiner_(bits);
  // intersect with the current enclosure; both are valid
  Rational nl = l > lo_ ? l : lo_;
  Rational nh = h < hi_ ? h : hi_;
  return CertifiedValue(nl, nh, bits, refiner_);
}

int CertifiedValue::compare(const Rational& t, unsigned cap) const {
  CertifiedValue cur = *this;
  unsigned bits = std::max(bits_, kDefaultPrecision);
  while (true) {
    if (cur.lo_ > t) return 1;
    if (cur.hi_ < t) return -1;
    if (cur.is_exact()) return 0;
    if (!cur.refiner_) fail(ErrorKind::PrecisionExhausted, "undecidable comparison without refiner");
    bits *= 2;
    if (bits > std::min(cap, precision_cap())) fail(ErrorKind::PrecisionExhausted, "comparison undecided at precision cap");
    cur = cur.refined(bits);
  }
}

std::string CertifiedValue::to_string(int digits) const {
  if (is_exact()) return birkhoff::to_string(lo_);
  return "[" + format_double(lo_.get_d(), digits) + ", " + format_double(hi_.get_d(), digits) + "]";
}

std::string format_double(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

}  // namespace birkhoff
