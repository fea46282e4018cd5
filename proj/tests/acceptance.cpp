// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "birkhoff/lab.hpp"

using namespace birkhoff;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

// runs fn(i) for i < n on a few threads; fn must be thread safe
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex err_mu;
  std::exception_ptr err;
  for (unsigned w = 0; w < threads(); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::string fmt(double x, int digits = 6) { return format_double(x, digits); }

std::uint64_t alpha_seed(std::uint64_t tag, std::size_t i) { return tag * 1000003ULL + i; }

const std::vector<std::string>& step_builtins() {
  static const std::vector<std::string> v = {"sawtooth",
                                             "indicator(1/4,1/2)",
                                             "indicator(0,2/7)",
                                             "indicator(1/3,1)",
                                             "half_discrepancy",
                                             "appendix_pm(1/6,1/3,2/3)",
                                             "appendix_pm(1/5,1/2,4/5)",
                                             "appendix_sym_pair(1,2,5)",
                                             "appendix_sym_pair(1,3,7)"};
  return v;
}

// ---------------------------------------------------------------- 1

Outcome criterion1() {
  const long Nmax = 10000;
  const std::vector<Rational> qs = {0, Rational(1, 3), Rational(2, 7)};
  const auto& fs = step_builtins();
  std::size_t jobs = fs.size() * 20 * qs.size();
  std::atomic<std::size_t> mismatches{0}, compared{0}, naive_points{0};
  parallel_for(jobs, [&](std::size_t j) {
    std::size_t fi = j / (20 * qs.size()), ai = (j / qs.size()) % 20, qi = j % qs.size();
    auto f = rot::parse_function(fs[fi]);
    cf::ConvergentTable t(cf::sample_alpha(alpha_seed(1, ai), 16));
    engine::prepare_table(t, f, qs[qi], Nmax);
    // naive route: per-n certified floor, accumulated exactly
    engine::Trajectory tr(f, t, qs[qi], Nmax);
    std::size_t bad = 0, np = 0;
    for (long N = 1; N <= Nmax; ++N) {
      tr.step();
      auto fast = engine::step_sum_fast(f.step(), t, qs[qi], N);
      if (*tr.exact() != fast) ++bad;
      // direct non-incremental certified sum at a sparse set of N
      if (N <= 20 || N % 1999 == 0 || N == Nmax) {
        ++np;
        if (engine::step_sum_naive(f.step(), t, qs[qi], N) != fast) ++bad;
      }
    }
    mismatches += bad;
    compared += static_cast<std::size_t>(Nmax);
    naive_points += np;
  });
  return {mismatches == 0, std::to_string(fs.size()) + " built-ins x 20 alpha x 3 q, " + std::to_string(compared.load()) +
                               " trajectory points and " + std::to_string(naive_points.load()) +
                               " direct sums compared, " + std::to_string(mismatches.load()) + " mismatches"};
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  const std::vector<Rational> qs = {0, Rational(1, 3), Rational(2, 7)};
  const auto& fs = step_builtins();
  std::atomic<std::size_t> violations{0}, checks{0};
  parallel_for(20, [&](std::size_t ai) {
    cf::ConvergentTable t(cf::sample_alpha(alpha_seed(2, ai), 16));
    t.ensure_q_exceeds(Integer(1) << 80, 3);
    std::size_t bad = 0, n = 0;
    for (const auto& name : fs) {
      auto f = rot::parse_function(name);
      Rational var = rot::total_variation(f);
      for (const auto& q : qs)
        for (std::size_t k = 1; t.q(k) <= 100000; ++k) {
          auto s = engine::step_sum_fast(f.step(), t, q, t.q(k));
          ++n;
          if (s.compare(var, t) > 0 || s.compare(-var, t) < 0) ++bad;
        }
    }
    violations += bad;
    checks += n;
  });
  return {violations == 0, std::to_string(checks.load()) + " convergent sums checked, " +
                               std::to_string(violations.load()) + " violations"};
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  struct Pair {
    Rational x1, x2;
  };
  const std::vector<Pair> pairs = {{Rational(1, 3), Rational(1, 2)}, {Rational(1, 5), Rational(3, 4)}};
  struct Job {
    std::size_t pair;
    long aK;
    long residue;
    unsigned parity;
  };
  std::vector<Job> jobs;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    Integer s1 = pairs[pi].x1.get_den(), s2 = pairs[pi].x2.get_den();
    long mod = lcm_of(s1, s2).get_si();
    for (long aK : {1000L, 10000L})
      for (long r = 0; r < mod; ++r)
        for (unsigned par : {0u, 1u}) jobs.push_back({pi, aK, r, par});
  }
  std::atomic<std::size_t> mismatches{0}, compared{0};
  // case = (k odd, s1 | q or s2 | q)
  std::mutex mu;
  std::set<std::pair<bool, bool>> cases;
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& jb = jobs[j];
    const auto& pr = pairs[jb.pair];
    Integer s1 = pr.x1.get_den(), s2 = pr.x2.get_den();
    cf::CongruenceTarget tg;
    tg.modulus = lcm_of(s1, s2);
    tg.residue = jb.residue;
    tg.k_congruence = std::make_pair(jb.parity, 2u);
    auto c = cf::construct_alpha({Integer(1)}, tg, jb.aK);
    cf::ConvergentTable t(c.cf);
    t.ensure_q_exceeds(Integer(1) << 80, 3);
    const Integer& q = t.q(c.K - 1);
    long bmax = Integer(t.a(c.K) / (2 * s1 * s2)).get_si();
    auto f = rot::builtin("indicator", {pr.x1, pr.x2});
    engine::Trajectory tr(f, t, 0, static_cast<std::size_t>(bmax * q.get_si()));
    std::size_t bad = 0;
    long N = 0;
    for (long b = 1; b <= bmax; ++b) {
      auto cfm = engine::indicator_block_closed_form(pr.x1, pr.x2, t, c.K, b);
      long target = b * q.get_si();
      while (N < target) {
        tr.step();
        ++N;
      }
      auto naive = *tr.exact();
      if (!cfm.valid || naive.coef != 0 || naive.constant != cfm.value) ++bad;
      if ((b % 97 == 1 || b == bmax) && engine::step_sum_naive(f.step(), t, 0, target) != naive) ++bad;
    }
    bool div = mpz_divisible_p(q.get_mpz_t(), s1.get_mpz_t()) || mpz_divisible_p(q.get_mpz_t(), s2.get_mpz_t());
    {
      std::lock_guard<std::mutex> lk(mu);
      cases.insert({c.K % 2 == 1, div});
    }
    mismatches += bad;
    compared += static_cast<std::size_t>(bmax);
  });
  return {mismatches == 0 && cases.size() == 4,
          std::to_string(compared.load()) + " blocks over " + std::to_string(jobs.size()) + " constructed alpha, " +
              std::to_string(cases.size()) + "/4 parity-divisibility cases, " + std::to_string(mismatches.load()) +
              " mismatches"};
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  std::vector<double> maxima;
  auto f = rot::builtin("sawtooth");
  std::string detail;
  for (long aK : {100L, 1000L, 10000L}) {
    double mx = 0;
    std::mutex mu;
    std::vector<std::vector<Integer>> prefixes = {{1, 1, 1}, {1, 1, 1, 1}, {2, 1, 3}, {1, 4, 1, 2}};
    parallel_for(prefixes.size(), [&](std::size_t i) {
      auto pre = prefixes[i];
      std::size_t K = pre.size() + 1;
      pre.push_back(aK);
      cf::ConvergentTable t(cf::ContinuedFraction::with_ones_tail(pre));
      t.ensure_q_exceeds(Integer(1) << 80, 3);
      double local = 0;
      for (long b = 1; b <= aK; ++b) {
        auto s = engine::step_sum_fast(f.step(), t, 0, b * t.q(K - 1));
        Rational res = s.constant - engine::sawtooth_block_main_term(K, b, aK);
        Interval iv = t.alpha_interval(128);
        iv.mul_rational(s.coef).add_rational(res);
        local = std::max({local, std::fabs(iv.lo.to_double(MPFR_RNDD)), std::fabs(iv.hi.to_double(MPFR_RNDU))});
      }
      std::lock_guard<std::mutex> lk(mu);
      mx = std::max(mx, local);
    });
    maxima.push_back(mx);
    detail += (detail.empty() ? "" : ", ") + std::string("a_K=") + std::to_string(aK) + ": " + fmt(mx, 5);
  }
  double worst = 0;
  for (std::size_t i = 1; i < maxima.size(); ++i) worst = std::max(worst, maxima[i] / maxima[i - 1]);
  return {worst <= 1.5, "max residuals " + detail + "; worst ratio " + fmt(worst, 4)};
}

// ---------------------------------------------------------------- 5, 6

std::vector<cf::ContinuedFraction>& sampled_200() {
  static std::vector<cf::ContinuedFraction> v = [] {
    std::vector<cf::ContinuedFraction> out(200);
    parallel_for(200, [&](std::size_t i) { out[i] = cf::sample_alpha(alpha_seed(5, i), 10000); });
    return out;
  }();
  return v;
}

Outcome criterion5() {
  auto t0 = std::chrono::steady_clock::now();
  auto& cfs = sampled_200();
  std::vector<double> r(cfs.size());
  parallel_for(cfs.size(), [&](std::size_t i) {
    auto cf = cfs[i];
    r[i] = lab::levy_ratio(cf, 10000);
  });
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double m = lab::median(r);
  return {m >= 0.98 && m <= 1.02 && secs < 120,
          "median " + fmt(m, 6) + " (q25 " + fmt(lab::quantile(r, 0.25), 4) + ", q75 " + fmt(lab::quantile(r, 0.75), 4) +
              "), " + fmt(secs, 3) + " s including sampling"};
}

Outcome criterion6() {
  auto& cfs = sampled_200();
  std::vector<double> r(cfs.size());
  parallel_for(cfs.size(), [&](std::size_t i) {
    auto cf = cfs[i];
    r[i] = lab::trimmed_sum_ratio(cf, 10000).ratio;
  });
  double m = lab::median(r);
  return {m >= 0.85 && m <= 1.15, "median " + fmt(m, 6) + " (q25 " + fmt(lab::quantile(r, 0.25), 4) + ", q75 " +
                                      fmt(lab::quantile(r, 0.75), 4) + ")"};
}

// ---------------------------------------------------------------- 7

Outcome criterion7() {
  std::vector<int> stable(100, 0), increased(100, 0);
  parallel_for(100, [&](std::size_t i) {
    auto cf = cf::sample_alpha(alpha_seed(7, i), 10000);
    for (int div = 0; div < 2; ++div) {
      lab::CensusConfig c;
      c.psi = lab::PsiFunction::parse(div ? "klogk" : "klog2k");
      c.K_max = 1000;
      auto lo = lab::bernstein_census(cf, c);
      c.K_max = 10000;
      auto hi = lab::bernstein_census(cf, c);
      if (!lab::verify_census(hi, cf, c)) throw std::runtime_error("census re-verification failed");
      if (div) increased[i] = hi.indices.size() > lo.indices.size();
      else stable[i] = hi.indices.size() == lo.indices.size();
    }
  });
  int ns = std::accumulate(stable.begin(), stable.end(), 0);
  int ni = std::accumulate(increased.begin(), increased.end(), 0);
  return {ns >= 80 && ni >= 80, "convergent psi stable for " + std::to_string(ns) +
                                    "/100, divergent psi strictly increased for " + std::to_string(ni) + "/100"};
}

// ---------------------------------------------------------------- 8

double fraction_at_checkpoint(const rot::Function& f, const lab::PsiFunction& psi, const lab::UdConstruction& u,
                              std::size_t* M_out) {
  cf::ConvergentTable t(u.alpha.cf);
  std::size_t M = Integer(Integer(10000) * u.alpha.q_Km1 / 4).get_ui();
  *M_out = M;
  auto r = lab::khintchine_density(f, psi, t, 0, M);
  return r.up_fraction;
}

Outcome criterion8() {
  auto psi = lab::PsiFunction::parse("klogk");
  auto saw = rot::builtin("sawtooth");
  auto us = lab::ud_construction(saw, 10000, true);
  std::size_t Ms = 0, Ma = 0;
  double fs = fraction_at_checkpoint(saw, psi, us, &Ms);
  auto app = rot::builtin("appendix_sym_pair", {1, 2, 5});
  auto ua = lab::ud_construction(app, 10000, true);
  double fa = fraction_at_checkpoint(app, psi, ua, &Ma);
  return {fs >= 0.9 && fa <= 0.9, "sawtooth on " + us.alpha.cf.describe() + " at M=" + std::to_string(Ms) + ": " +
                                      fmt(fs, 5) + "; appendix_sym_pair(1,2,5) on " + ua.alpha.cf.describe() +
                                      " at M=" + std::to_string(Ma) + ": " + fmt(fa, 5)};
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  auto f = rot::builtin("appendix_sym_pair", {1, 2, 5});
  std::vector<std::pair<long, unsigned>> jobs;
  for (long aK : {1000L, 10000L})
    for (long r = 0; r < 5; ++r)
      for (unsigned par : {0u, 1u}) jobs.push_back({aK * 10 + r, par});
  std::atomic<std::size_t> nonzero{0}, blocks{0};
  parallel_for(jobs.size(), [&](std::size_t j) {
    long aK = jobs[j].first / 10, r = jobs[j].first % 10;
    cf::CongruenceTarget tg;
    tg.modulus = 5;
    tg.residue = r;
    tg.k_congruence = std::make_pair(jobs[j].second, 2u);
    auto c = cf::construct_alpha({Integer(2)}, tg, aK);
    cf::ConvergentTable t(c.cf);
    t.ensure_q_exceeds(Integer(1) << 80, 3);
    long q = t.q(c.K - 1).get_si();
    long bmax = aK / 50;  // delta = 1 / (2 w^2)
    engine::Trajectory tr(f, t, 0, static_cast<std::size_t>(bmax * q));
    std::size_t bad = 0;
    long N = 0;
    for (long b = 1; b <= bmax; ++b) {
      while (N < b * q) {
        tr.step();
        ++N;
      }
      auto fast = engine::step_sum_fast(f.step(), t, 0, b * q);
      auto naive = *tr.exact();
      if (!(fast.coef == 0 && fast.constant == 0 && naive == fast)) ++bad;
    }
    nonzero += bad;
    blocks += static_cast<std::size_t>(bmax);
  });
  return {nonzero == 0, std::to_string(blocks.load()) + " blocks with b <= a_K/50 over " +
                            std::to_string(jobs.size()) + " constructed alpha, " + std::to_string(nonzero.load()) +
                            " nonzero"};
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
  auto asym = rot::builtin("log_asym", {Rational(1, 3), 0, 1});
  auto sym = rot::builtin("log_sym", {Rational(1, 3), 1});
  auto u = lab::ud_construction(asym, 10000, true);
  cf::ConvergentTable t(u.alpha.cf);
  double r4 = 0, r6 = 0, frac = 0;
  std::thread ts([&] {
    auto prof = lab::symmetric_growth_profile(sym, t, 0, 1000000, {10000, 1000000});
    for (auto& p : prof) {
      if (p.N == 10000) r4 = p.ratio;
      if (p.N == 1000000) r6 = p.ratio;
    }
  });
  auto rep = lab::log_khintchine_density(asym, lab::PsiFunction::parse("klogk_loglogk"), t, 0, 1000000);
  frac = rep.up_fraction;
  ts.join();
  double growth = r6 / r4;
  return {growth < 3 && frac >= 0.5, "alpha " + u.alpha.cf.describe() + ": log_sym max ratio " + fmt(r4, 5) +
                                         " at 1e4, " + fmt(r6, 5) + " at 1e6 (x" + fmt(growth, 4) +
                                         "); log_asym upward fraction at 1e6 " + fmt(frac, 5) + " (" +
                                         std::to_string(rep.undecided) + " undecided)"};
}

// ---------------------------------------------------------------- 11

Outcome criterion11() {
  auto r = lab::kesten_uniformity(11, 10000, 1, 30, 2);
  bool ok = r.pairs.size() == 3 && r.inadmissible_freq == 0.0;
  std::string detail;
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    ok = ok && std::fabs(r.freq[i] - 1.0 / 3) <= 0.02;
    detail += "(" + std::to_string(r.pairs[i].first) + "," + std::to_string(r.pairs[i].second) +
              "): " + fmt(r.freq[i], 4) + " ";
  }
  return {ok, detail + "(0,0): " + fmt(r.inadmissible_freq, 4)};
}

// ---------------------------------------------------------------- 12

Outcome criterion12() {
  json cfg = json::parse(R"({"seed": 2024, "experiments": [
    {"experiment": "levy", "k": 2000, "alphas": 16},
    {"experiment": "trimmed", "K": 2000, "alphas": 16},
    {"experiment": "census", "psi": "klogk", "K_max": [100, 1000], "alphas": 16},
    {"experiment": "kesten", "v": 3, "p": 10, "seeds": 2000},
    {"experiment": "khintchine", "function": "sawtooth", "M": 5000, "alphas": 6},
    {"experiment": "dk_sharpness", "M": 5000, "alphas": 6, "C": 0.05},
    {"experiment": "log_khintchine", "M": 3000, "alphas": 4},
    {"experiment": "khintchine", "name": "constructed", "M": 5000, "alpha": {"mode": "construct", "big_quotient": 4000}}]})");
  std::vector<std::string> dumps;
  for (unsigned w : {1u, 1u, 4u, 7u}) {
    cfg["workers"] = w;
    dumps.push_back(lab::monte_carlo(cfg).dump());
  }
  bool same = std::all_of(dumps.begin(), dumps.end(), [&](const std::string& d) { return d == dumps[0]; });
  return {same, "4 runs (workers 1, 1, 4, 7), " + std::to_string(dumps[0].size()) + " bytes each, " +
                    (same ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<int, Outcome (*)()>> all = {
      {1, criterion1}, {2, criterion2}, {3, criterion3},   {4, criterion4},   {5, criterion5},   {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}, {12, criterion12}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (auto& [id, fn] : all) {
    if (!only.empty() && !only.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
