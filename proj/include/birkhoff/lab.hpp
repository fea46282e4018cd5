#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "birkhoff/engine.hpp"

namespace birkhoff::lab {

using cf::ConvergentTable;
using rot::Function;

enum class PsiFamily { KLogK, KLogKLogLogK, KLog2K, KLogKLogLog2K, Infinite };

// c1 * base(c2 * x), base from the family, with log(x+1) and log log(x+10) shifts.
struct PsiFunction {
  PsiFamily family = PsiFamily::KLogK;
  double c1 = 1.0;
  double c2 = 1.0;
  double k0 = 0.0;  // monotone increasing on [k0, inf)

  double operator()(double x) const;
  bool convergent() const;  // sum 1/psi(k) < inf
  std::string name() const;
  // "klogk", "klogk_loglogk", "klog2k", "klogk_loglog2k", "inf", optionally "c1*name" or "name@c2"
  static PsiFunction parse(const std::string& text);
};

struct Checkpoint {
  std::size_t M = 0;
  std::size_t up = 0, down = 0, undecided = 0;
  double up_fraction = 0, down_fraction = 0;
  double running_max_up = 0, running_max_down = 0;  // upper-density proxy
  bool proof_aligned = false;
};

struct DensityReport {
  std::size_t M = 0;
  std::size_t up = 0, down = 0, undecided = 0;
  double up_fraction = 0, down_fraction = 0;
  std::string threshold;
  std::string alpha;
  std::string function;
  std::vector<Checkpoint> checkpoints;

  double max_up_fraction() const;
  double max_down_fraction() const;
};

// threshold(N, trajectory) >= 0; may return +inf
using Threshold = std::function<double(std::size_t N, const engine::Trajectory& tr)>;

struct DensityOptions {
  std::size_t max_M = 10000000;
  double checkpoint_c = 0.25;           // proof-aligned M_j = floor(c a_k q_{k-1})
  std::optional<PsiFunction> census_psi;  // k_j selected by a_k > psi(k); all k when unset
  std::vector<std::size_t> extra_checkpoints;
  std::size_t min_running_M = 100;  // earlier checkpoints are reported but stay out of the running max
  unsigned bits = 256;
};

DensityReport density_run(const Function& f, const ConvergentTable& table, const Rational& q, std::size_t M,
                          const Threshold& threshold, const std::string& descriptor, const DensityOptions& opt = {});

// S_N >= psi(log N)
DensityReport khintchine_density(const Function& f, const PsiFunction& psi, const ConvergentTable& table,
                                 const Rational& q, std::size_t M, const DensityOptions& opt = {});
// S_N >= log N psi(log N)
DensityReport log_khintchine_density(const Function& f, const PsiFunction& psi, const ConvergentTable& table,
                                     const Rational& q, std::size_t M, const DensityOptions& opt = {});
// S_N >= C sum_{i <= K(N)} a_i
DensityReport dk_sharpness_density(const Function& f, const ConvergentTable& table, const Rational& q,
                                   std::size_t M, double C, const DensityOptions& opt = {});
// upward fraction at the last checkpoint for each C, one trajectory
std::vector<std::pair<double, double>> dk_sharpness_sweep(const Function& f, const ConvergentTable& table,
                                                          const Rational& q, std::size_t M,
                                                          const std::vector<double>& Cs);
// S_N >= C (sup_{outside A_N} |f| sum a_i + N |int_{A_N} f|)
DensityReport dk_singular_sharpness(const Function& f, const ConvergentTable& table, const Rational& q,
                                    std::size_t M, double C, const DensityOptions& opt = {});

struct ProfilePoint {
  std::size_t N = 0;
  double ratio = 0;  // running max of |S_N| / ((log N)^2 log log N), N >= 16
};
std::vector<ProfilePoint> symmetric_growth_profile(const Function& f, const ConvergentTable& table,
                                                   const Rational& q, std::size_t M,
                                                   const std::vector<std::size_t>& checkpoints = {});

struct CensusConfig {
  std::size_t K_max = 1000;
  PsiFunction psi;
  bool upper = false;  // a_K < K^2
  std::optional<std::pair<unsigned, unsigned>> k_congruence;       // K = first mod second
  std::optional<std::pair<Integer, Integer>> q_congruence;         // q_{K-1} = first mod second
  std::optional<double> sum_constant;  // sum_{i<K} a_i <= C K log K
};

struct CensusReport {
  std::size_t K_max = 0;
  std::vector<std::size_t> indices;
  std::size_t count_psi = 0, count_upper = 0, count_k = 0, count_q = 0, count_sum = 0;
};

// quotients a_1..a_{K_max} of the continued fraction are materialized as needed
CensusReport bernstein_census(cf::ContinuedFraction& cf, const CensusConfig& cfg);
// re-check every listed K from a fresh convergent table
bool verify_census(const CensusReport& r, const cf::ContinuedFraction& cf, const CensusConfig& cfg);

struct TrimmedSum {
  double ratio = 0;
  std::size_t K0 = 0;  // argmax a_l, l <= K
  Integer trimmed;
};
TrimmedSum trimmed_sum_ratio(cf::ContinuedFraction& cf, std::size_t K);

inline constexpr double kLevyConstant = 1.1865691104156254;  // pi^2 / (12 log 2)
double levy_ratio(const ConvergentTable& table, std::size_t k);
// log q_k / (k pi^2/(12 log 2)) from the quotients alone, without building big q's twice
double levy_ratio(cf::ContinuedFraction& cf, std::size_t k);

struct KestenReport {
  unsigned v = 2;
  std::size_t m = 1, p = 1, samples = 0;
  std::vector<std::pair<unsigned, unsigned>> pairs;  // admissible pairs, gcd(u1, u2, v) = 1
  std::vector<double> freq;                          // same order as pairs
  double inadmissible_freq = 0;
  double tv = 0;
};
KestenReport kesten_uniformity(std::uint64_t base_seed, std::size_t seeds, std::size_t m, std::size_t p, unsigned v);

// alpha with one huge partial quotient a_K and the congruence that makes S_{b q_{K-1}}(f) grow in the
// requested direction; `sign` is the sign of the block-sum slope on this alpha.
struct UdConstruction {
  cf::ConstructedAlpha alpha;
  int sign = 0;
  rot::Clause clause = rot::Clause::Degenerate;
  cf::CongruenceTarget target;
};
UdConstruction ud_construction(const Function& f, const Integer& big_quotient, bool upward,
                               const std::vector<Integer>& prefix = {1});

// Runs the experiments of a JSON config over sampled alpha; results are reduced in seed order.
nlohmann::json monte_carlo(const nlohmann::json& config);

nlohmann::json to_json(const DensityReport& r);
nlohmann::json to_json(const CensusReport& r);
nlohmann::json to_json(const KestenReport& r);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double p);

}  // namespace birkhoff::lab
