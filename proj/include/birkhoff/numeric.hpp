#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace birkhoff {

using Integer = mpz_class;
using Rational = mpq_class;

enum class ErrorKind {
  InvalidInput,
  RationalInput,
  PrecisionExhausted,
  TableTooShort,
  InvalidDigits,
  Unreachable,
  InvalidTarget,
  NotAStepFunction,
  InvalidBlock,
  BudgetExceeded,
  VerificationFailed,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline constexpr unsigned kDefaultPrecision = 128;
inline constexpr unsigned kPrecisionCap = 1u << 20;
// process-wide working cap, at most kPrecisionCap; adaptive refinement stops here
unsigned precision_cap();
void set_precision_cap(unsigned bits);

Rational parse_rational(const std::string& text);
Integer parse_integer(const std::string& text);
std::string to_string(const Integer& x);
std::string to_string(const Rational& x);

Integer floor_of(const Rational& x);
Rational frac_of(const Rational& x);
Integer lcm_of(const Integer& a, const Integer& b);
int sign_of(const Rational& x);
int sign_of(const Integer& x);

// Sum_{i=0}^{n-1} floor((a*i + b)/m) for n >= 0, m >= 1, a >= 0, b >= 0.
Integer floor_sum(const Integer& n, const Integer& m, const Integer& a, const Integer& b);

// RAII MPFR number.
class BigFloat {
 public:
  explicit BigFloat(unsigned prec = kDefaultPrecision);
  BigFloat(const BigFloat& other);
  BigFloat(BigFloat&& other) noexcept;
  BigFloat& operator=(const BigFloat& other);
  BigFloat& operator=(BigFloat&& other) noexcept;
  ~BigFloat();

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }
  unsigned precision() const { return static_cast<unsigned>(mpfr_get_prec(v_)); }
  double to_double(mpfr_rnd_t rnd = MPFR_RNDN) const { return mpfr_get_d(v_, rnd); }
  Rational to_rational() const;

 private:
  mpfr_t v_;
};

// Closed interval with MPFR endpoints, rounded outward.
struct Interval {
  BigFloat lo;
  BigFloat hi;

  explicit Interval(unsigned prec = kDefaultPrecision) : lo(prec), hi(prec) {}
  static Interval from_rational(const Rational& x, unsigned prec);
  static Interval from_rationals(const Rational& lo, const Rational& hi, unsigned prec);
  static Interval log2_const(unsigned prec);

  unsigned precision() const { return lo.precision(); }
  bool contains_integer_boundary() const;
  double width() const;
  double mid() const;

  Interval& operator+=(const Interval& o);
  Interval& operator-=(const Interval& o);
  Interval& add_rational(const Rational& x);
  Interval& mul_si(long k);
  Interval& mul_z(const Integer& k);
  Interval& mul_rational(const Rational& x);
};

Interval log_of(const Interval& x);  // requires x.lo > 0
Interval operator+(Interval a, const Interval& b);
Interval operator-(Interval a, const Interval& b);

// An enclosure [lo, hi] of a real with exact rational endpoints. A refiner, when present,
// produces tighter enclosures at a requested working precision.
class CertifiedValue {
 public:
  using Refiner = std::function<std::pair<Rational, Rational>(unsigned bits)>;

  CertifiedValue();
  explicit CertifiedValue(const Rational& exact);
  CertifiedValue(Rational lo, Rational hi, unsigned bits, Refiner refiner = {});
  static CertifiedValue from_interval(const Interval& iv, Refiner refiner = {});

  const Rational& lo() const { return lo_; }
  const Rational& hi() const { return hi_; }
  unsigned precision() const { return bits_; }
  bool is_exact() const { return lo_ == hi_; }
  double mid() const;
  double width() const;
  bool contains(const Rational& x) const { return lo_ <= x && x <= hi_; }

  CertifiedValue refined(unsigned bits) const;
  // Sign of (value - t); refines until decided. Returns 0 only for an exact point equal to t.
  int compare(const Rational& t, unsigned cap = kPrecisionCap) const;
  std::string to_string(int digits = 12) const;

 private:
  Rational lo_, hi_;
  unsigned bits_ = 0;
  Refiner refiner_;
};

std::string format_double(double x, int digits = 12);

}  // namespace birkhoff
