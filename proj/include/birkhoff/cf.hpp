#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "birkhoff/numeric.hpp"

namespace birkhoff::cf {

enum class TailKind { Ones, Periodic, Sampled };

// alpha = [0; a_1, a_2, ...] in (0, 1). Quotients a_1..a_size() are materialized; the tail rule
// produces more on demand through extend().
class ContinuedFraction {
 public:
  ContinuedFraction();
  static ContinuedFraction with_ones_tail(std::vector<Integer> prefix);
  static ContinuedFraction periodic(std::vector<Integer> prefix, std::vector<Integer> block);
  static ContinuedFraction sampled(std::uint64_t seed, std::size_t depth = 0);

  std::size_t size() const { return a_.size(); }
  // 1-based access; throws TableTooShort beyond the materialized depth
  const Integer& a(std::size_t k) const;
  const std::vector<Integer>& quotients() const { return a_; }
  void extend(std::size_t depth);

  TailKind tail() const { return tail_; }
  std::optional<std::uint64_t> seed() const { return seed_; }
  const std::vector<Integer>& prefix() const { return prefix_; }
  const std::vector<Integer>& block() const { return block_; }
  // number of random bits drawn so far (sampled tail only)
  std::size_t bits_drawn() const { return nbits_; }
  std::string describe() const;

 private:
  std::vector<Integer> a_;
  TailKind tail_ = TailKind::Ones;
  std::vector<Integer> prefix_;
  std::vector<Integer> block_;
  std::optional<std::uint64_t> seed_;
  std::mt19937_64 gen_;
  Integer bits_ = 0;
  std::size_t nbits_ = 0;
};

// Quotients shared by every real in [lo_num, hi_num] / den, stopping before either endpoint
// would terminate. Both endpoints must lie in (0, 1].
std::vector<Integer> common_prefix(const Integer& lo_num, const Integer& hi_num, const Integer& den,
                                   std::size_t max_digits);
std::vector<Integer> rational_cf(const Rational& x);

// Sources of reals in (0, 1) for expand_cf.
class RealSource {
 public:
  virtual ~RealSource() = default;
  // enclosure of width at most about 2^-bits; lo == hi means the source is an exact rational
  virtual std::pair<Rational, Rational> enclose(unsigned bits) const = 0;
  virtual std::string describe() const = 0;
};

// (p + r*sqrt(d)) / s with d > 0 not a perfect square.
class QuadraticSource : public RealSource {
 public:
  QuadraticSource(Integer p, Integer r, Integer d, Integer s);
  std::pair<Rational, Rational> enclose(unsigned bits) const override;
  std::string describe() const override;

 private:
  Integer p_, r_, d_, s_;
};

class RationalSource : public RealSource {
 public:
  explicit RationalSource(Rational x) : x_(std::move(x)) {}
  std::pair<Rational, Rational> enclose(unsigned) const override { return {x_, x_}; }
  std::string describe() const override { return to_string(x_); }

 private:
  Rational x_;
};

class ContinuedFractionSource : public RealSource {
 public:
  explicit ContinuedFractionSource(ContinuedFraction cf) : cf_(std::move(cf)) {}
  std::pair<Rational, Rational> enclose(unsigned bits) const override;
  std::string describe() const override { return cf_.describe(); }

 private:
  mutable ContinuedFraction cf_;
};

ContinuedFraction expand_cf(const RealSource& x, std::size_t K, unsigned cap = kPrecisionCap);
ContinuedFraction sample_alpha(std::uint64_t seed, std::size_t K);

// Convergents p_k/q_k for k = 0..depth(), with p_0 = 0, q_0 = 1, p_1 = 1, q_1 = a_1.
class ConvergentTable {
 public:
  explicit ConvergentTable(ContinuedFraction cf);

  const ContinuedFraction& cf() const { return cf_; }
  std::size_t depth() const { return q_.size() - 1; }
  const Integer& a(std::size_t k) const { return cf_.a(k); }
  const Integer& p(std::size_t k) const;
  const Integer& q(std::size_t k) const;
  // p_{-1} = 1, q_{-1} = 0 through signed index
  Integer p_signed(long k) const;
  Integer q_signed(long k) const;

  void extend(std::size_t depth);
  // extend until q_depth exceeds bound, plus `extra` further quotients
  void ensure_q_exceeds(const Integer& bound, std::size_t extra = 2);
  void ensure_bits(unsigned bits);

  // unique K >= 1 with q_{K-1} <= N < q_K
  std::size_t k_of(const Integer& N) const;
  // sum_{i=1}^{k} a_i
  Integer partial_quotient_sum(std::size_t k) const;
  // sign(alpha - t), exact
  int sign_alpha_minus(const Rational& t) const;
  // sign(n*alpha + c) for integer n, exact (n == 0 uses c alone)
  int sign_affine(const Integer& n, const Rational& c) const;
  // smallest k with q_k + q_{k+1} > bound
  std::size_t farey_index(const Integer& bound) const;

  // alpha lies strictly between p_k/q_k and p_{k+1}/q_{k+1}; returns (min, max)
  std::pair<Rational, Rational> bracket(std::size_t k) const;
  Interval alpha_interval(unsigned bits) const;
  CertifiedValue alpha() const;
  double alpha_double() const { return alpha_d_; }
  // delta_k = |q_k alpha - p_k|
  CertifiedValue delta(std::size_t k) const;
  // smallest k whose bracket is narrower than 2^-bits
  std::size_t bracket_index_for_bits(unsigned bits) const;

 private:
  void rebuild_double();

  ContinuedFraction cf_;
  std::vector<Integer> p_, q_;
  std::vector<Integer> a_sum_;
  double alpha_d_ = 0.0;
  bool alpha_d_valid_ = false;
};

// Ostrowski expansion N = sum_{l=0}^{K-1} b_l q_l (greedy form).
struct OstrowskiExpansion {
  Integer N;
  std::vector<Integer> digits;  // b_0..b_{K-1}
  std::size_t K = 0;
  Integer digit_sum() const;
};

OstrowskiExpansion ostrowski_expand(const Integer& N, const ConvergentTable& table);
Integer ostrowski_value(const std::vector<Integer>& digits, const ConvergentTable& table);

// {n*alpha + q} with exactly decided integer part.
CertifiedValue certified_frac(const ConvergentTable& table, const Integer& n, const Rational& q);
Integer certified_floor(const ConvergentTable& table, const Integer& n, const Rational& q);

struct CongruenceTarget {
  Integer modulus = 2;
  Integer residue = 0;
  // K congruent to first modulo second, when set
  std::optional<std::pair<unsigned, unsigned>> k_congruence;
  std::vector<Integer> alphabet;  // empty means 1..2d+1
  std::size_t max_extension = 64;
};

struct ConstructedAlpha {
  ContinuedFraction cf;
  std::size_t K = 0;
  Integer q_Km1;
};

ConstructedAlpha construct_alpha(const std::vector<Integer>& prefix, const CongruenceTarget& target,
                                 const Integer& big_quotient);

// "[2r]" periodic, "[1,2,3 r]" periodic block, "[1,2,3]" ones tail, "seed:7" sampled,
// "sqrt2" and "golden" as shorthands.
ContinuedFraction parse_alpha(const std::string& text, std::size_t depth = 64);

nlohmann::json to_json(const ContinuedFraction& cf);
ContinuedFraction cf_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OstrowskiExpansion& e);

}  // namespace birkhoff::cf
