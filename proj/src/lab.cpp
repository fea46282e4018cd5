#include "birkhoff/lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

namespace birkhoff::lab {

using nlohmann::json;
using engine::Trajectory;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lg(double x) { return std::log(x + 1.0); }
double llg(double x) { return std::log(std::log(x + 10.0)); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------- psi

double PsiFunction::operator()(double x) const {
  double y = c2 * x;
  double b = 0;
  switch (family) {
    case PsiFamily::KLogK: b = y * lg(y); break;
    case PsiFamily::KLogKLogLogK: b = y * lg(y) * llg(y); break;
    case PsiFamily::KLog2K: b = y * lg(y) * lg(y); break;
    case PsiFamily::KLogKLogLog2K: b = y * lg(y) * llg(y) * llg(y); break;
    case PsiFamily::Infinite: return kInf;
  }
  return c1 * b;
}

bool PsiFunction::convergent() const {
  return family == PsiFamily::KLog2K || family == PsiFamily::KLogKLogLog2K || family == PsiFamily::Infinite;
}

std::string PsiFunction::name() const {
  std::string n;
  switch (family) {
    case PsiFamily::KLogK: n = "klogk"; break;
    case PsiFamily::KLogKLogLogK: n = "klogk_loglogk"; break;
    case PsiFamily::KLog2K: n = "klog2k"; break;
    case PsiFamily::KLogKLogLog2K: n = "klogk_loglog2k"; break;
    case PsiFamily::Infinite: n = "inf"; break;
  }
  if (c1 != 1.0) n = format_double(c1, 6) + "*" + n;
  if (c2 != 1.0) n += "@" + format_double(c2, 6);
  return n;
}

PsiFunction PsiFunction::parse(const std::string& text) {
  PsiFunction p;
  std::string s = text;
  auto star = s.find('*');
  try {
    if (star != std::string::npos) {
      p.c1 = std::stod(s.substr(0, star));
      s = s.substr(star + 1);
    }
    auto at = s.find('@');
    if (at != std::string::npos) {
      p.c2 = std::stod(s.substr(at + 1));
      s = s.substr(0, at);
    }
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidInput, "bad psi scale in '" + text + "'");
  }
  if (s == "klogk") p.family = PsiFamily::KLogK;
  else if (s == "klogk_loglogk") p.family = PsiFamily::KLogKLogLogK;
  else if (s == "klog2k") p.family = PsiFamily::KLog2K;
  else if (s == "klogk_loglog2k") p.family = PsiFamily::KLogKLogLog2K;
  else if (s == "inf") p.family = PsiFamily::Infinite;
  else fail(ErrorKind::InvalidInput, "unknown psi '" + text + "'");
  if (!(p.c1 > 0 && p.c2 > 0)) fail(ErrorKind::InvalidInput, "psi scales must be positive");
  return p;
}

// ---------------------------------------------------------------- density runs

double DensityReport::max_up_fraction() const {
  return checkpoints.empty() ? up_fraction : checkpoints.back().running_max_up;
}
double DensityReport::max_down_fraction() const {
  return checkpoints.empty() ? down_fraction : checkpoints.back().running_max_down;
}

namespace {

std::vector<std::pair<std::size_t, bool>> make_checkpoints(const ConvergentTable& table, std::size_t M,
                                                          const DensityOptions& opt) {
  std::map<std::size_t, bool> cps;
  for (std::size_t d = 10; d <= M; d *= 10) {
    for (std::size_t m : {d, 2 * d, 5 * d})
      if (m <= M) cps[m] |= false;
    if (d > M / 10) break;
  }
  for (std::size_t k = 1; k <= table.depth(); ++k) {
    const Integer& qk1 = table.q(k - 1);
    if (qk1 > Integer(static_cast<unsigned long>(M))) break;
    if (opt.census_psi && mpz_cmp_d(table.a(k).get_mpz_t(), (*opt.census_psi)(static_cast<double>(k))) <= 0)
      continue;
    double mj = std::floor(opt.checkpoint_c * table.a(k).get_d() * qk1.get_d());
    if (mj >= 1 && mj <= static_cast<double>(M)) cps[static_cast<std::size_t>(mj)] = true;
  }
  for (auto m : opt.extra_checkpoints)
    if (m >= 1 && m <= M) cps[m] |= false;
  if (M >= 1) cps[M] |= false;
  return {cps.begin(), cps.end()};
}

// +1 above, -1 below, 0 undecided; t may be +-inf
int classify(const Trajectory& tr, std::pair<double, double> enc, double t) {
  if (std::isinf(t)) return t > 0 ? -1 : 1;
  if (enc.first > t) return 1;
  if (enc.second < t) return -1;
  if (auto ex = tr.exact()) {
    int c = ex->compare(Rational(t), tr.table());
    return c >= 0 ? 1 : -1;
  }
  Interval iv = tr.enclosure();
  BigFloat tb(iv.precision());
  mpfr_set_d(tb.get(), t, MPFR_RNDN);
  if (mpfr_cmp(iv.lo.get(), tb.get()) >= 0) return 1;
  if (mpfr_cmp(iv.hi.get(), tb.get()) < 0) return -1;
  return 0;
}

}  // namespace

DensityReport density_run(const Function& f, const ConvergentTable& table, const Rational& q, std::size_t M,
                          const Threshold& threshold, const std::string& descriptor, const DensityOptions& opt) {
  if (M > opt.max_M) fail(ErrorKind::BudgetExceeded, "M exceeds the configured maximum");
  DensityReport r;
  r.M = M;
  r.threshold = descriptor;
  r.alpha = table.cf().describe();
  r.function = f.name;
  if (M == 0) return r;
  Trajectory tr(f, table, q, M, opt.bits);
  auto cps = make_checkpoints(tr.table(), M, opt);
  std::size_t ci = 0;
  double run_up = 0, run_down = 0;
  for (std::size_t N = 1; N <= M; ++N) {
    tr.step();
    double t = threshold(N, tr);
    auto enc = tr.enclosure_d();
    int u = classify(tr, enc, t);
    // S_N <= -t  <=>  not (S_N > -t)
    int d = 0;
    if (std::isinf(t)) {
      d = -1;
    } else if (enc.second < -t) {
      d = 1;
    } else if (enc.first > -t) {
      d = -1;
    } else if (auto ex = tr.exact()) {
      d = ex->compare(Rational(-t), tr.table()) <= 0 ? 1 : -1;
    } else {
      int c = classify(tr, enc, -t);
      d = c == 0 ? 0 : (c > 0 ? -1 : 1);
    }
    if (u == 0 || d == 0) {
      ++r.undecided;
    } else {
      r.up += u > 0;
      r.down += d > 0;
    }
    while (ci < cps.size() && cps[ci].first == N) {
      Checkpoint c;
      c.M = N;
      c.up = r.up;
      c.down = r.down;
      c.undecided = r.undecided;
      c.up_fraction = double(r.up) / double(N);
      c.down_fraction = double(r.down) / double(N);
      if (N >= opt.min_running_M || N == M) {
        run_up = std::max(run_up, c.up_fraction);
        run_down = std::max(run_down, c.down_fraction);
      }
      c.running_max_up = run_up;
      c.running_max_down = run_down;
      c.proof_aligned = cps[ci].second;
      r.checkpoints.push_back(c);
      ++ci;
    }
  }
  r.up_fraction = double(r.up) / double(M);
  r.down_fraction = double(r.down) / double(M);
  return r;
}

DensityReport khintchine_density(const Function& f, const PsiFunction& psi, const ConvergentTable& table,
                                 const Rational& q, std::size_t M, const DensityOptions& opt) {
  if (!f.is_step()) fail(ErrorKind::NotAStepFunction, "khintchine_density takes a jump function");
  auto thr = [psi](std::size_t N, const Trajectory&) { return psi(std::log(double(N))); };
  return density_run(f, table, q, M, thr, "psi(log N), psi=" + psi.name(), opt);
}

DensityReport log_khintchine_density(const Function& f, const PsiFunction& psi, const ConvergentTable& table,
                                     const Rational& q, std::size_t M, const DensityOptions& opt) {
  if (f.is_step()) fail(ErrorKind::InvalidInput, "log_khintchine_density takes a log function");
  auto thr = [psi](std::size_t N, const Trajectory&) {
    double l = std::log(double(N));
    return l * psi(l);
  };
  return density_run(f, table, q, M, thr, "log N psi(log N), psi=" + psi.name(), opt);
}

DensityReport dk_sharpness_density(const Function& f, const ConvergentTable& table, const Rational& q,
                                   std::size_t M, double C, const DensityOptions& opt) {
  if (!f.is_step()) fail(ErrorKind::NotAStepFunction, "dk_sharpness_density needs finite variation");
  auto thr = [C](std::size_t, const Trajectory& tr) { return C * tr.sum_a().get_d(); };
  return density_run(f, table, q, M, thr, "C sum a_i, C=" + format_double(C, 6), opt);
}

std::vector<std::pair<double, double>> dk_sharpness_sweep(const Function& f, const ConvergentTable& table,
                                                          const Rational& q, std::size_t M,
                                                          const std::vector<double>& Cs) {
  if (!f.is_step()) fail(ErrorKind::NotAStepFunction, "dk_sharpness_sweep needs finite variation");
  std::vector<std::size_t> up(Cs.size(), 0);
  Trajectory tr(f, table, q, M);
  for (std::size_t N = 1; N <= M; ++N) {
    tr.step();
    auto enc = tr.enclosure_d();
    double sa = tr.sum_a().get_d();
    for (std::size_t i = 0; i < Cs.size(); ++i) up[i] += classify(tr, enc, Cs[i] * sa) > 0;
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < Cs.size(); ++i) out.emplace_back(Cs[i], M ? double(up[i]) / double(M) : 0.0);
  return out;
}

DensityReport dk_singular_sharpness(const Function& f, const ConvergentTable& table, const Rational& q,
                                    std::size_t M, double C, const DensityOptions& opt) {
  if (f.is_step() || f.log().c2 == 0) fail(ErrorKind::InvalidInput, "dk_singular_sharpness takes an asymmetric log function");
  struct Cache {
    double glo = -1;
    double sup = 0, win = 0;
  };
  auto cache = std::make_shared<Cache>();
  const auto spec = f.log();
  auto thr = [C, cache, spec](std::size_t N, const Trajectory& tr) {
    auto [glo, ghi] = tr.min_distance_d();
    if (glo != cache->glo) {
      Interval g(128);
      mpfr_set_d(g.lo.get(), glo, MPFR_RNDD);
      mpfr_set_d(g.hi.get(), ghi, MPFR_RNDU);
      Interval s = engine::sup_abs_outside(spec, g);
      Interval w = engine::window_integral(spec, g);
      cache->sup = s.hi.to_double(MPFR_RNDU);
      cache->win = std::max(std::fabs(w.lo.to_double(MPFR_RNDD)), std::fabs(w.hi.to_double(MPFR_RNDU)));
      cache->glo = glo;
    }
    return C * (cache->sup * tr.sum_a().get_d() + double(N) * cache->win);
  };
  return density_run(f, table, q, M, thr, "C (sup|f| sum a_i + N |int_A f|), C=" + format_double(C, 6), opt);
}

std::vector<ProfilePoint> symmetric_growth_profile(const Function& f, const ConvergentTable& table,
                                                   const Rational& q, std::size_t M,
                                                   const std::vector<std::size_t>& checkpoints) {
  std::vector<ProfilePoint> out;
  if (M < 16) return out;
  if (f.is_step() || f.log().c2 != 0) fail(ErrorKind::InvalidInput, "symmetric_growth_profile takes a symmetric log function");
  std::set<std::size_t> cps(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty())
    for (std::size_t d = 100; d <= M; d *= 10) {
      cps.insert(d);
      if (d > M / 10) break;
    }
  cps.insert(M);
  Trajectory tr(f, table, q, M);
  double best = 0;
  for (std::size_t N = 1; N <= M; ++N) {
    tr.step();
    if (N >= 16) {
      auto [lo, hi] = tr.enclosure_d();
      double l = std::log(double(N));
      best = std::max(best, std::max(std::fabs(lo), std::fabs(hi)) / (l * l * std::log(l)));
    }
    if (N >= 16 && cps.count(N)) out.push_back({N, best});
  }
  return out;
}

// ---------------------------------------------------------------- census

CensusReport bernstein_census(cf::ContinuedFraction& cf, const CensusConfig& cfg) {
  if (cfg.K_max < 1) fail(ErrorKind::InvalidInput, "K_max must be >= 1");
  cf.extend(cfg.K_max);
  CensusReport r;
  r.K_max = cfg.K_max;
  Integer d = cfg.q_congruence ? cfg.q_congruence->second : Integer(1);
  if (d < 1) fail(ErrorKind::InvalidInput, "census modulus must be >= 1");
  Integer qm2 = 0, qm1 = 1;  // q_{K-2}, q_{K-1} mod d, starting at q_{-1} = 0, q_0 = 1
  Integer sum = 0;           // sum_{i<K} a_i
  for (std::size_t K = 1; K <= cfg.K_max; ++K) {
    const Integer& a = cf.a(K);
    double dk = double(K);
    bool c_psi = mpz_cmp_d(a.get_mpz_t(), cfg.psi(dk)) > 0;
    bool c_up = !cfg.upper || a < Integer(static_cast<unsigned long>(K)) * Integer(static_cast<unsigned long>(K));
    bool c_k = !cfg.k_congruence || K % cfg.k_congruence->second == cfg.k_congruence->first % cfg.k_congruence->second;
    bool c_q = true;
    if (cfg.q_congruence) {
      Integer r1 = qm1 - cfg.q_congruence->first;
      c_q = mpz_divisible_p(r1.get_mpz_t(), d.get_mpz_t()) != 0;
    }
    bool c_sum = !cfg.sum_constant || mpz_cmp_d(sum.get_mpz_t(), *cfg.sum_constant * dk * std::log(dk)) <= 0;
    r.count_psi += c_psi;
    r.count_upper += cfg.upper && c_up;
    r.count_k += cfg.k_congruence && c_k;
    r.count_q += cfg.q_congruence && c_q;
    r.count_sum += cfg.sum_constant && c_sum;
    if (c_psi && c_up && c_k && c_q && c_sum) r.indices.push_back(K);
    Integer next = a * qm1 + qm2;
    mpz_fdiv_r(next.get_mpz_t(), next.get_mpz_t(), d.get_mpz_t());
    qm2 = qm1;
    qm1 = next;
    sum += a;
  }
  return r;
}

bool verify_census(const CensusReport& r, const cf::ContinuedFraction& cf, const CensusConfig& cfg) {
  ConvergentTable t(cf);
  t.extend(cfg.K_max);
  for (std::size_t K : r.indices) {
    if (K < 1 || K > cfg.K_max) return false;
    double dk = double(K);
    if (!(Rational(t.a(K)) > Rational(cfg.psi(dk)))) return false;
    if (cfg.upper && !(t.a(K) < Integer(static_cast<unsigned long>(K * K)))) return false;
    if (cfg.k_congruence && K % cfg.k_congruence->second != cfg.k_congruence->first % cfg.k_congruence->second)
      return false;
    if (cfg.q_congruence) {
      Integer diff = t.q(K - 1) - cfg.q_congruence->first;
      if (!mpz_divisible_p(diff.get_mpz_t(), cfg.q_congruence->second.get_mpz_t())) return false;
    }
    if (cfg.sum_constant && Rational(t.partial_quotient_sum(K - 1)) > Rational(*cfg.sum_constant * dk * std::log(dk)))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------- ratios

TrimmedSum trimmed_sum_ratio(cf::ContinuedFraction& cf, std::size_t K) {
  if (K < 3) fail(ErrorKind::InvalidInput, "trimmed sum needs K >= 3");
  cf.extend(K);
  TrimmedSum t;
  Integer sum = 0, mx = 0;
  for (std::size_t l = 1; l <= K; ++l) {
    const Integer& a = cf.a(l);
    sum += a;
    if (a > mx) {
      mx = a;
      t.K0 = l;
    }
  }
  t.trimmed = sum - mx;
  double dk = double(K);
  t.ratio = t.trimmed.get_d() / (dk * std::log(dk) / std::log(2.0));
  return t;
}

namespace {

double log_of_integer(const Integer& x) {
  long e = 0;
  double d = mpz_get_d_2exp(&e, x.get_mpz_t());
  return std::log(d) + double(e) * std::log(2.0);
}

}  // namespace

double levy_ratio(const ConvergentTable& table, std::size_t k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "levy ratio needs k >= 1");
  return log_of_integer(table.q(k)) / (double(k) * kLevyConstant);
}

double levy_ratio(cf::ContinuedFraction& cf, std::size_t k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "levy ratio needs k >= 1");
  cf.extend(k);
  Integer a = 1, b = cf.a(1), c;  // q_0, q_1
  for (std::size_t i = 2; i <= k; ++i) {
    c = cf.a(i) * b + a;
    a.swap(b);
    b.swap(c);
  }
  return log_of_integer(b) / (double(k) * kLevyConstant);
}

// ---------------------------------------------------------------- Kesten

KestenReport kesten_uniformity(std::uint64_t base_seed, std::size_t seeds, std::size_t m, std::size_t p,
                               unsigned v) {
  if (v < 2 || p < 1 || m < 1) fail(ErrorKind::InvalidInput, "kesten needs v >= 2, m >= 1, p >= 1");
  KestenReport r;
  r.v = v;
  r.m = m;
  r.p = p;
  r.samples = seeds;
  std::vector<int> index(v * v, -1);
  for (unsigned u1 = 0; u1 < v; ++u1)
    for (unsigned u2 = 0; u2 < v; ++u2)
      if (std::gcd(std::gcd(u1, u2), v) == 1) {
        index[u1 * v + u2] = static_cast<int>(r.pairs.size());
        r.pairs.emplace_back(u1, u2);
      }
  std::vector<std::size_t> counts(r.pairs.size(), 0);
  std::size_t bad = 0;
  std::size_t top = m + p;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto cf = cf::sample_alpha(splitmix(base_seed) + s, top);
    unsigned long qa = 1, qb = cf.a(1).get_ui() % v;  // q_0, q_1 mod v
    // a_i can be huge; reduce modulo v first
    for (std::size_t i = 2; i <= top; ++i) {
      Integer ai = cf.a(i);
      unsigned long am = mpz_fdiv_ui(ai.get_mpz_t(), v);
      unsigned long qc = (am * qb + qa) % v;
      qa = qb;
      qb = qc;
    }
    if (top == 1) qa = 1;
    int idx = index[qa * v + qb];
    if (idx < 0) ++bad;
    else ++counts[static_cast<std::size_t>(idx)];
  }
  double n = seeds ? double(seeds) : 1.0;
  double k = double(r.pairs.size());
  double tv = double(bad) / n;
  for (auto c : counts) {
    r.freq.push_back(double(c) / n);
    tv += std::fabs(double(c) / n - 1.0 / k);
  }
  r.inadmissible_freq = double(bad) / n;
  r.tv = tv / 2;
  return r;
}

// ---------------------------------------------------------------- constructions

UdConstruction ud_construction(const Function& f, const Integer& big_quotient, bool upward,
                               const std::vector<Integer>& prefix) {
  UdConstruction u;
  cf::CongruenceTarget& tg = u.target;
  if (f.is_step()) {
    auto d = rot::decompose(f);
    u.clause = rot::nondegenerate(d);
    Integer L = 1;
    for (const auto& x : d.points) L = lcm_of(L, x.get_den());
    tg.modulus = L;
    if (u.clause == rot::Clause::SumA) {
      // S_{b q_{K-1}} ~ (-1)^K sum_A (b/2)(1 - b/a_K); the step part vanishes for q_{K-1} = 0 mod L
      bool even = (d.sum_A > 0) == upward;
      tg.residue = 0;
      tg.k_congruence = std::make_pair(even ? 0u : 1u, 2u);
    } else if (u.clause == rot::Clause::Drift) {
      // q_{K-1} = -1 mod L gives slope +drift, q_{K-1} = +1 gives -drift
      bool plus = (d.drift > 0) == upward;
      Integer r = plus ? L - 1 : Integer(1);
      mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), L.get_mpz_t());
      tg.residue = r;
      tg.k_congruence = std::make_pair(1u, 2u);
    } else {
      tg.residue = 0;
      tg.k_congruence = std::make_pair(0u, 2u);
    }
  } else {
    const auto& s = f.log();
    u.clause = rot::Clause::Degenerate;
    tg.modulus = s.x1.get_den();
    tg.residue = 0;
    Rational lead = s.c2 != 0 ? s.c2 : Rational(-s.c1);
    bool even = (lead > 0) == upward;
    tg.k_congruence = std::make_pair(even ? 0u : 1u, 2u);
  }
  u.alpha = cf::construct_alpha(prefix, tg, big_quotient);

  // slope sign from the block identities on the constructed alpha
  std::size_t K = u.alpha.K;
  const Integer& q = u.alpha.q_Km1;
  if (f.is_step()) {
    auto d = rot::decompose(f);
    if (u.clause == rot::Clause::SumA) {
      u.sign = sign_of(d.sum_A) * (K % 2 == 0 ? 1 : -1);
    } else {
      Rational e = (K % 2 == 1) ? Rational(1) : Rational(0);
      Rational slope = 0;
      for (std::size_t i = 0; i < d.points.size(); ++i) {
        const Rational& x = d.points[i];
        if (x == 0) continue;
        bool div = mpz_divisible_p(q.get_mpz_t(), x.get_den_mpz_t()) != 0;
        slope += d.A[i] * (e - frac_of(x * Rational(q)) - (div ? e : Rational(0)));
      }
      u.sign = sign_of(slope);
    }
  } else {
    const auto& s = f.log();
    Rational lead = s.c2 != 0 ? s.c2 : Rational(-s.c1);
    u.sign = s.c2 != 0 ? sign_of(lead) * (K % 2 == 0 ? 1 : -1) : -sign_of(s.c1);
  }
  return u;
}

// ---------------------------------------------------------------- statistics

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double pos = p * double(v.size() - 1);
  std::size_t i = static_cast<std::size_t>(std::floor(pos));
  double fr = pos - double(i);
  if (i + 1 >= v.size()) return v.back();
  return v[i] * (1 - fr) + v[i + 1] * fr;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------- json

json to_json(const DensityReport& r) {
  json j;
  j["M"] = r.M;
  j["up"] = r.up;
  j["down"] = r.down;
  j["undecided"] = r.undecided;
  j["up_fraction"] = r.up_fraction;
  j["down_fraction"] = r.down_fraction;
  j["max_up_fraction"] = r.max_up_fraction();
  j["max_down_fraction"] = r.max_down_fraction();
  j["threshold"] = r.threshold;
  j["alpha"] = r.alpha;
  j["function"] = r.function;
  json cps = json::array();
  for (const auto& c : r.checkpoints)
    cps.push_back({{"M", c.M},
                   {"up", c.up},
                   {"down", c.down},
                   {"undecided", c.undecided},
                   {"up_fraction", c.up_fraction},
                   {"down_fraction", c.down_fraction},
                   {"running_max_up", c.running_max_up},
                   {"running_max_down", c.running_max_down},
                   {"proof_aligned", c.proof_aligned}});
  j["checkpoints"] = cps;
  return j;
}

json to_json(const CensusReport& r) {
  return {{"K_max", r.K_max},
          {"count", r.indices.size()},
          {"indices", r.indices},
          {"count_psi", r.count_psi},
          {"count_upper", r.count_upper},
          {"count_k", r.count_k},
          {"count_q", r.count_q},
          {"count_sum", r.count_sum}};
}

json to_json(const KestenReport& r) {
  json pairs = json::array();
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    pairs.push_back({{"pair", {r.pairs[i].first, r.pairs[i].second}}, {"freq", r.freq[i]}});
  return {{"v", r.v},   {"m", r.m},       {"p", r.p}, {"samples", r.samples}, {"k", r.pairs.size()},
          {"pairs", pairs}, {"inadmissible_freq", r.inadmissible_freq}, {"tv", r.tv}};
}

// ---------------------------------------------------------------- monte carlo

namespace {

template <class Fn>
std::vector<json> parallel_map(std::size_t n, unsigned workers, Fn fn) {
  std::vector<json> out(n);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (const Error& e) {
        out[i] = {{"error", e.what()}, {"kind", to_string(e.kind())}};
      }
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || n <= 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers && w < n; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return out;
}

std::size_t get_size(const json& j, const char* key, std::size_t dflt) {
  return j.contains(key) ? j.at(key).get<std::size_t>() : dflt;
}

Rational get_rational(const json& j, const char* key, const Rational& dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j.at(key);
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long>());
  fail(ErrorKind::InvalidInput, std::string("'") + key + "' must be a rational string");
}

json aggregate(const std::vector<json>& rows) {
  // quantiles of every numeric field present in the rows
  std::map<std::string, std::vector<double>> cols;
  std::size_t errors = 0;
  for (const auto& r : rows) {
    if (r.contains("error")) {
      ++errors;
      continue;
    }
    for (auto it = r.begin(); it != r.end(); ++it)
      if (it.value().is_number() && it.key() != "seed") cols[it.key()].push_back(it.value().get<double>());
  }
  json a;
  for (auto& [k, v] : cols) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    a[k] = {{"median", median(v)},     {"q25", quantile(v, 0.25)}, {"q75", quantile(v, 0.75)},
            {"min", quantile(v, 0.0)}, {"max", quantile(v, 1.0)},  {"mean", mean}};
  }
  a["rows"] = rows.size();
  a["errors"] = errors;
  return a;
}

struct AlphaPlan {
  bool construct = false;
  std::optional<std::string> cf_text;
  Integer big_quotient = 10000;
  std::vector<Integer> prefix{1};
  bool upward = true;
};

AlphaPlan alpha_plan(const json& e) {
  AlphaPlan p;
  if (!e.contains("alpha")) return p;
  const auto& a = e.at("alpha");
  if (a.is_string()) {
    p.cf_text = a.get<std::string>();
    return p;
  }
  std::string mode = a.value("mode", "sample");
  if (mode == "sample") return p;
  if (mode == "cf") {
    p.cf_text = a.at("cf").get<std::string>();
    return p;
  }
  if (mode != "construct") fail(ErrorKind::InvalidInput, "alpha.mode must be sample, construct or cf");
  p.construct = true;
  if (a.contains("big_quotient")) p.big_quotient = parse_integer(a.at("big_quotient").is_string()
                                                                   ? a.at("big_quotient").get<std::string>()
                                                                   : std::to_string(a.at("big_quotient").get<long>()));
  if (a.contains("prefix")) {
    p.prefix.clear();
    for (const auto& x : a.at("prefix")) p.prefix.push_back(Integer(x.get<long>()));
  }
  p.upward = a.value("upward", true);
  return p;
}

cf::ContinuedFraction alpha_for(const AlphaPlan& plan, const Function* f, std::uint64_t seed, std::size_t depth) {
  if (plan.cf_text) return cf::parse_alpha(*plan.cf_text, depth);
  if (plan.construct) {
    if (!f) fail(ErrorKind::InvalidInput, "constructed alpha needs a function");
    return ud_construction(*f, plan.big_quotient, plan.upward, plan.prefix).alpha.cf;
  }
  return cf::sample_alpha(seed, depth);
}

json run_experiment(const json& e, std::uint64_t base_seed, unsigned workers) {
  std::string kind = e.at("experiment").get<std::string>();
  std::size_t n = get_size(e, "alphas", get_size(e, "seeds", 200));
  std::uint64_t salt = splitmix(base_seed ^ fnv1a(e.value("name", kind)));
  auto seed_of = [salt](std::size_t i) { return splitmix(salt + i); };
  AlphaPlan plan = alpha_plan(e);
  if (plan.construct || plan.cf_text) n = std::min<std::size_t>(n, 1);
  json out;
  out["experiment"] = kind;
  if (e.contains("name")) out["name"] = e.at("name");
  std::vector<json> rows;

  if (kind == "levy") {
    std::size_t k = get_size(e, "k", 10000);
    rows = parallel_map(n, workers, [&](std::size_t i) {
      auto cf = alpha_for(plan, nullptr, seed_of(i), k);
      return json{{"seed", seed_of(i)}, {"ratio", levy_ratio(cf, k)}};
    });
  } else if (kind == "trimmed") {
    std::size_t K = get_size(e, "K", 10000);
    rows = parallel_map(n, workers, [&](std::size_t i) {
      auto cf = alpha_for(plan, nullptr, seed_of(i), K);
      auto t = trimmed_sum_ratio(cf, K);
      return json{{"seed", seed_of(i)}, {"ratio", t.ratio}, {"K0", t.K0}};
    });
  } else if (kind == "census") {
    CensusConfig cfg;
    cfg.psi = PsiFunction::parse(e.value("psi", "klogk"));
    cfg.upper = e.value("upper", false);
    if (e.contains("k_congruence"))
      cfg.k_congruence = std::make_pair(e.at("k_congruence")[0].get<unsigned>(), e.at("k_congruence")[1].get<unsigned>());
    if (e.contains("q_congruence"))
      cfg.q_congruence = std::make_pair(Integer(e.at("q_congruence")[0].get<long>()), Integer(e.at("q_congruence")[1].get<long>()));
    if (e.contains("sum_constant")) cfg.sum_constant = e.at("sum_constant").get<double>();
    std::vector<std::size_t> levels;
    if (e.contains("K_max") && e.at("K_max").is_array()) levels = e.at("K_max").get<std::vector<std::size_t>>();
    else levels = {get_size(e, "K_max", 1000)};
    std::sort(levels.begin(), levels.end());
    rows = parallel_map(n, workers, [&](std::size_t i) {
      auto cf = alpha_for(plan, nullptr, seed_of(i), levels.back());
      json r{{"seed", seed_of(i)}};
      std::vector<std::size_t> counts;
      for (auto L : levels) {
        CensusConfig c = cfg;
        c.K_max = L;
        auto rep = bernstein_census(cf, c);
        if (!verify_census(rep, cf, c)) fail(ErrorKind::VerificationFailed, "census re-verification failed");
        counts.push_back(rep.indices.size());
        r["count_" + std::to_string(L)] = rep.indices.size();
      }
      if (counts.size() >= 2) {
        r["stable"] = counts.back() == counts.front() ? 1 : 0;
        r["increased"] = counts.back() > counts.front() ? 1 : 0;
      }
      return r;
    });
  } else if (kind == "kesten") {
    std::size_t m = get_size(e, "m", 1), p = get_size(e, "p", 30);
    unsigned v = static_cast<unsigned>(get_size(e, "v", 2));
    std::size_t seeds = get_size(e, "seeds", 10000);
    // one block of seeds per worker slot, merged in block order
    std::size_t blocks = 16;
    auto parts = parallel_map(blocks, workers, [&](std::size_t b) {
      std::size_t lo = seeds * b / blocks, hi = seeds * (b + 1) / blocks;
      auto rep = kesten_uniformity(salt + lo, hi - lo, m, p, v);
      json counts = json::array();
      for (double fq : rep.freq) counts.push_back(static_cast<std::size_t>(std::llround(fq * double(hi - lo))));
      return json{{"counts", counts}, {"bad", static_cast<std::size_t>(std::llround(rep.inadmissible_freq * double(hi - lo)))}};
    });
    KestenReport total = kesten_uniformity(0, 0, m, p, v);
    std::vector<std::size_t> counts(total.pairs.size(), 0);
    std::size_t bad = 0;
    for (const auto& part : parts) {
      if (part.contains("error")) fail(ErrorKind::InvalidInput, part.at("error").get<std::string>());
      for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += part.at("counts")[i].get<std::size_t>();
      bad += part.at("bad").get<std::size_t>();
    }
    total.samples = seeds;
    double k = double(counts.size()), tv = double(bad) / double(std::max<std::size_t>(seeds, 1));
    total.freq.clear();
    for (auto c : counts) {
      double fq = double(c) / double(std::max<std::size_t>(seeds, 1));
      total.freq.push_back(fq);
      tv += std::fabs(fq - 1.0 / k);
    }
    total.inadmissible_freq = double(bad) / double(std::max<std::size_t>(seeds, 1));
    total.tv = tv / 2;
    out["report"] = to_json(total);
    return out;
  } else if (kind == "khintchine" || kind == "log_khintchine" || kind == "dk_sharpness" || kind == "dk_singular" ||
             kind == "symmetric_profile") {
    Function f = rot::parse_function(e.value("function", kind == "khintchine" || kind == "dk_sharpness"
                                                             ? std::string("sawtooth")
                                                             : std::string("log_asym(1/3,0,1)")));
    Rational q = get_rational(e, "q", 0);
    std::size_t M = get_size(e, "M", 100000);
    PsiFunction psi = PsiFunction::parse(e.value("psi", kind == "khintchine" ? "klogk" : "klogk_loglogk"));
    double C = e.value("C", 0.05);
    DensityOptions opt;
    opt.max_M = get_size(e, "max_M", 10000000);
    rows = parallel_map(n, workers, [&](std::size_t i) {
      ConvergentTable t(alpha_for(plan, &f, seed_of(i), 8));
      json r{{"seed", seed_of(i)}};
      if (kind == "symmetric_profile") {
        auto prof = symmetric_growth_profile(f, t, q, M);
        r["max_ratio"] = prof.empty() ? 0.0 : prof.back().ratio;
        json pts = json::array();
        for (auto& pp : prof) pts.push_back({pp.N, pp.ratio});
        r["profile"] = pts;
        return r;
      }
      DensityReport rep;
      if (kind == "khintchine") rep = khintchine_density(f, psi, t, q, M, opt);
      else if (kind == "log_khintchine") rep = log_khintchine_density(f, psi, t, q, M, opt);
      else if (kind == "dk_sharpness") rep = dk_sharpness_density(f, t, q, M, C, opt);
      else rep = dk_singular_sharpness(f, t, q, M, C, opt);
      r["up_fraction"] = rep.up_fraction;
      r["down_fraction"] = rep.down_fraction;
      r["max_up_fraction"] = rep.max_up_fraction();
      r["max_down_fraction"] = rep.max_down_fraction();
      r["undecided"] = rep.undecided;
      return r;
    });
  } else {
    fail(ErrorKind::InvalidInput, "unknown experiment '" + kind + "'");
  }
  out["per_alpha"] = rows;
  out["aggregate"] = aggregate(rows);
  return out;
}

}  // namespace

json monte_carlo(const json& config) {
  if (!config.is_object()) fail(ErrorKind::InvalidInput, "config must be a JSON object");
  std::uint64_t seed = config.value("seed", std::uint64_t{0});
  unsigned workers = config.value("workers", 1u);
  json exps;
  if (config.contains("experiments")) exps = config.at("experiments");
  else if (config.contains("experiment")) exps = json::array({config});
  else exps = json::array();
  json report;
  report["seed"] = seed;
  json results = json::array();
  for (const auto& e : exps) {
    if (!e.contains("experiment")) fail(ErrorKind::InvalidInput, "experiment entry without 'experiment'");
    results.push_back(run_experiment(e, seed, workers));
  }
  report["results"] = results;
  return report;
}

}  // namespace birkhoff::lab
