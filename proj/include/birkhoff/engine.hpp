#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "birkhoff/cf.hpp"
#include "birkhoff/functions.hpp"

namespace birkhoff::engine {

using cf::ConvergentTable;
using rot::Function;
using rot::JumpFunctionSpec;
using rot::LogFunctionSpec;

// coef * alpha + constant; exact Birkhoff sums of jump functions have this form.
struct AlphaAffine {
  Rational coef = 0;
  Rational constant = 0;

  bool operator==(const AlphaAffine& o) const { return coef == o.coef && constant == o.constant; }
  bool operator!=(const AlphaAffine& o) const { return !(*this == o); }
  Interval enclose(const ConvergentTable& table, unsigned bits = kDefaultPrecision) const;
  CertifiedValue value(const ConvergentTable& table) const;
  // sign(value - t), exact
  int compare(const Rational& t, const ConvergentTable& table) const;
  std::string to_string() const;
};

struct BirkhoffResult {
  Integer N;
  CertifiedValue value;
  std::optional<AlphaAffine> exact;
  std::size_t K_of_N = 0;
  Integer sum_a;
  unsigned precision_bits = 0;
};

// sum_{n=1}^{N} floor(n alpha + beta)
Integer floor_sum_alpha(const ConvergentTable& table, const Integer& N, const Rational& beta);
// #{1 <= n <= N : {n alpha + q} in [a, b)}, 0 <= a < b <= 1
Integer count_points(const ConvergentTable& table, const Rational& q, const Integer& N, const Rational& a,
                     const Rational& b);

AlphaAffine step_sum_fast(const JumpFunctionSpec& f, const ConvergentTable& table, const Rational& q,
                          const Integer& N);
AlphaAffine step_sum_naive(const JumpFunctionSpec& f, const ConvergentTable& table, const Rational& q,
                           const Integer& N);

BirkhoffResult birkhoff_naive(const Function& f, const ConvergentTable& table, const Rational& q, const Integer& N,
                              unsigned bits = 256);
BirkhoffResult birkhoff_step_fast(const Function& f, const ConvergentTable& table, const Rational& q,
                                  const Integer& N);
// fast route for jump functions, naive route for log functions
BirkhoffResult birkhoff_sum(const Function& f, const ConvergentTable& table, const Rational& q, const Integer& N,
                            unsigned bits = 256);

// The table must cover denominators up to N * lcm(denominators of q and the cut points).
void prepare_table(ConvergentTable& table, const Function& f, const Rational& q, const Integer& N);

// Incremental S_1, S_2, ... with certified enclosures.
class Trajectory {
 public:
  Trajectory(Function f, ConvergentTable table, Rational q, std::size_t max_N, unsigned bits = 256);

  void step();  // advance N -> N + 1
  std::size_t N() const { return N_; }
  std::size_t K_of_N() const { return K_; }
  const Integer& sum_a() const { return sum_a_; }
  // cheap certified double enclosure of S_N
  std::pair<double, double> enclosure_d() const;
  // tight enclosure of S_N at the working precision
  Interval enclosure(unsigned bits = 0) const;
  std::optional<AlphaAffine> exact() const;
  // ||n alpha + q - x1|| minimised over n <= N (log functions only), as a double enclosure
  std::pair<double, double> min_distance_d() const { return {gmin_lo_, gmin_hi_}; }
  std::size_t argmin_distance() const { return gmin_n_; }
  const ConvergentTable& table() const { return table_; }
  const Function& function() const { return f_; }
  static const char* csv_header() { return "N,S_lo,S_hi,K_of_N,sum_a"; }
  void write_csv_row(std::ostream& os) const;

 private:
  void step_jump();
  void step_log();
  std::size_t locate(const rot::StepTable& t, std::size_t n, const Integer& m, const Rational& shift,
                     double frac_d, double margin) const;
  Interval alpha_at(unsigned bits);

  Function f_;
  ConvergentTable table_;
  Rational q_;
  std::size_t max_N_;
  unsigned bits_;
  std::size_t N_ = 0;
  std::size_t K_ = 1;
  Integer sum_a_;
  double q_d_ = 0;

  // jump functions: S_N = U alpha + V / L
  rot::StepTable st_;
  Integer L_ = 1;
  std::vector<Integer> W_;
  Integer sigmaL_;
  Rational sigma_;
  Integer V_ = 0;
  double Sd_ = 0, Sd_err_ = 0;

  // log functions
  LogFunctionSpec ls_;
  rot::StepTable tt_;
  bool has_t_ = false;
  Rational shift_x1_;
  Interval S_;
  Interval const_shift_;
  std::vector<Interval> alpha_cache_;
  std::vector<unsigned> alpha_bits_;
  double gmin_lo_ = 1.0, gmin_hi_ = 1.0;
  std::size_t gmin_n_ = 0;
};

// S_{b q_{K-1}}(f, alpha, q), 1 <= b <= a_K
BirkhoffResult block_sum(const Function& f, const ConvergentTable& table, const Rational& q, std::size_t K,
                         const Integer& b);
// (-1)^K (b/2)(1 - b/a_K)
Rational sawtooth_block_main_term(std::size_t K, const Integer& b, const Integer& aK);

struct ClosedForm {
  Rational value;
  bool valid = false;  // b <= a_k / (2 s1 s2)
};
// S_{b q_{k-1}}(1_[x1, x2]) = b({r1 q/s1} + e 1_{s1|q} - {r2 q/s2} - e 1_{s2|q}), e = 1 for odd k, 0 for even k
ClosedForm indicator_block_closed_form(const Rational& x1, const Rational& x2, const ConvergentTable& table,
                                       std::size_t k, const Integer& b);

// Var(f) * sum_{i <= K(N)} a_i
Rational dk_bound(const Rational& variation, const ConvergentTable& table, const Integer& N);

struct SingularWindow {
  Integer n_star;                 // minimiser of ||n alpha + q - x1|| over 1..N
  CertifiedValue g;               // the minimum distance
  Rational center;                // x1 - q mod 1
  Integer s;                      // denominator of the center
  std::optional<std::size_t> K_used;  // smallest K with N < q_K / s
  std::optional<CertifiedValue> lower_bound;  // ||q_{K+1} alpha|| / s
};
SingularWindow min_orbit_distance(const ConvergentTable& table, const Rational& q, const Rational& x1,
                                  const Integer& N);

struct SingularBound {
  Interval sup_term;     // sup_{outside window} |f| * sum of Ostrowski digits
  Interval window_term;  // N * |integral of f over the window|
  Interval total;
  Interval sup_abs_f;
  Integer digit_sum;
  double g = 0;
};
// window half-width g (a double enclosure upper end is fine); f must be a log function
Interval sup_abs_outside(const LogFunctionSpec& f, const Interval& g);
Interval window_integral(const LogFunctionSpec& f, const Interval& g);
SingularBound dk_singular_bound(const Function& f, const ConvergentTable& table, const Rational& q,
                                const Integer& N);
SingularBound dk_singular_bound_from(const Function& f, const ConvergentTable& table, const Integer& N,
                                     const Interval& g);

struct BlockResidual {
  Interval lhs;        // sum_j log((j + eps_j)/q) - q * integral of log
  Interval main_term;  // sum_{j>=1} (eps_j - 1/2)/j + log eps_0
};
BlockResidual log_block_residual(const std::vector<Rational>& eps, unsigned bits = 256);

nlohmann::json to_json(const BirkhoffResult& r);

}  // namespace birkhoff::engine
