#include <doctest.h>

#include <cmath>

#include "birkhoff/lab.hpp"

using namespace birkhoff;
using namespace birkhoff::lab;
using nlohmann::json;

namespace {
std::vector<Integer> ints(std::initializer_list<long> xs) {
  std::vector<Integer> v;
  for (long x : xs) v.emplace_back(x);
  return v;
}
}  // namespace

TEST_CASE("psi parsing and values") {
  auto p = PsiFunction::parse("klogk");
  CHECK(p(10) == doctest::Approx(10 * std::log(11.0)));
  CHECK_FALSE(p.convergent());
  auto q = PsiFunction::parse("2*klog2k@0.5");
  CHECK(q.c1 == 2.0);
  CHECK(q.c2 == 0.5);
  CHECK(q(8) == doctest::Approx(2 * 4 * std::log(5.0) * std::log(5.0)));
  CHECK(q.convergent());
  CHECK(PsiFunction::parse(q.name()).c1 == 2.0);
  auto ll = PsiFunction::parse("klogk_loglogk");
  CHECK(ll(100) == doctest::Approx(100 * std::log(101.0) * std::log(std::log(110.0))));
  CHECK(std::isinf(PsiFunction::parse("inf")(3)));
  CHECK_THROWS_AS(PsiFunction::parse("klogk2"), Error);
  CHECK_THROWS_AS(PsiFunction::parse("0*klogk"), Error);
  CHECK_THROWS_AS(PsiFunction::parse("x*klogk"), Error);
}

TEST_CASE("trimmed ratio on the golden ratio") {
  auto cf = cf::ContinuedFraction::with_ones_tail({});
  auto t = trimmed_sum_ratio(cf, 3);
  // (3 - 1) / (3 log 3 / log 2)
  CHECK(t.ratio == doctest::Approx(2 * std::log(2.0) / (3 * std::log(3.0))).epsilon(1e-12));
  CHECK(t.ratio == doctest::Approx(0.4206).epsilon(1e-3));
  CHECK(t.K0 == 1);
  CHECK_THROWS_AS(trimmed_sum_ratio(cf, 2), Error);
  auto big = cf::ContinuedFraction::with_ones_tail(ints({1, 5, 2, 40, 3}));
  auto tb = trimmed_sum_ratio(big, 5);
  CHECK(tb.K0 == 4);
  CHECK(tb.trimmed == 11);
}

TEST_CASE("levy ratio on the golden ratio") {
  auto cf = cf::ContinuedFraction::with_ones_tail({});
  double logphi = std::log((1 + std::sqrt(5.0)) / 2);
  for (std::size_t k : {30u, 60u, 200u}) {
    // q_k = F_{k+1} = round(phi^{k+1} / sqrt 5)
    double expected = ((double(k) + 1) * logphi - 0.5 * std::log(5.0)) / (double(k) * kLevyConstant);
    CHECK(levy_ratio(cf, k) == doctest::Approx(expected).epsilon(1e-10));
    cf::ConvergentTable t(cf);
    t.extend(k);
    CHECK(levy_ratio(t, k) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(levy_ratio(cf, 1) == 0.0);
  CHECK(levy_ratio(cf, 200) == doctest::Approx(logphi / kLevyConstant).epsilon(5e-3));
  CHECK_THROWS_AS(levy_ratio(cf, 0), Error);
}

TEST_CASE("kesten pairs exclude the zero pair") {
  auto r = kesten_uniformity(5, 3000, 1, 10, 2);
  REQUIRE(r.pairs.size() == 3);
  for (auto& pr : r.pairs) CHECK_FALSE((pr.first == 0 && pr.second == 0));
  CHECK(r.inadmissible_freq == 0.0);
  double total = 0;
  for (double f : r.freq) {
    total += f;
    CHECK(f == doctest::Approx(1.0 / 3).epsilon(0.15));
  }
  CHECK(total == doctest::Approx(1.0));
  auto r3 = kesten_uniformity(5, 10, 1, 4, 3);
  CHECK(r3.pairs.size() == 8);
  CHECK_THROWS_AS(kesten_uniformity(1, 10, 1, 1, 1), Error);
}

TEST_CASE("census on a hand-built continued fraction") {
  auto cf = cf::ContinuedFraction::with_ones_tail(ints({1, 1, 100, 10, 1, 1000}));
  CensusConfig c;
  c.K_max = 50;
  c.psi = PsiFunction::parse("klogk");
  auto r = bernstein_census(cf, c);
  // a_1 = 1 > log 2, a_3 = 100 > 3 log 4, a_4 = 10 > 4 log 5, a_6 = 1000 > 6 log 7
  CHECK(r.indices == std::vector<std::size_t>{1, 3, 4, 6});
  CHECK(verify_census(r, cf, c));
  c.upper = true;
  auto ru = bernstein_census(cf, c);
  CHECK(ru.indices == std::vector<std::size_t>{4});
  c.upper = false;
  c.k_congruence = std::make_pair(0u, 3u);
  CHECK(bernstein_census(cf, c).indices == std::vector<std::size_t>{3, 6});
  c.k_congruence.reset();
  c.q_congruence = std::make_pair(Integer(0), Integer(2));
  auto rq = bernstein_census(cf, c);
  cf::ConvergentTable t(cf);
  t.extend(10);
  std::vector<std::size_t> want;
  for (std::size_t K : {1u, 3u, 4u, 6u})
    if (t.q(K - 1) % 2 == 0) want.push_back(K);
  CHECK(rq.indices == want);
  CHECK(verify_census(rq, cf, c));
  CensusReport forged = r;
  forged.indices.push_back(2);
  c.q_congruence.reset();
  CHECK_FALSE(verify_census(forged, cf, c));
}

TEST_CASE("density guards") {
  auto f = rot::builtin("sawtooth");
  cf::ConvergentTable t(cf::sample_alpha(3, 16));
  auto r = khintchine_density(f, PsiFunction::parse("inf"), t, 0, 2000);
  CHECK(r.up == 0);
  CHECK(r.down == 0);
  CHECK(r.undecided == 0);
  auto d = dk_sharpness_density(f, t, 0, 2000, 1e12);
  CHECK(d.up == 0);
  CHECK(d.max_up_fraction() == 0.0);
  auto z = dk_sharpness_density(f, t, 0, 0, 0.1);
  CHECK(z.checkpoints.empty());
  DensityOptions small;
  small.max_M = 10;
  CHECK_THROWS_AS(dk_sharpness_density(f, t, 0, 11, 0.1, small), Error);
  auto g = rot::builtin("log_sym", {Rational(1, 3), 1});
  CHECK(symmetric_growth_profile(g, t, 0, 15).empty());
  auto prof = symmetric_growth_profile(g, t, 0, 1000);
  REQUIRE(prof.size() == 2);
  CHECK(prof[0].N == 100);
  CHECK(prof[1].N == 1000);
  CHECK(prof[1].ratio >= prof[0].ratio);
  CHECK_THROWS_AS(symmetric_growth_profile(rot::builtin("log_asym", {Rational(1, 3), 0, 1}), t, 0, 100), Error);
}

TEST_CASE("density counts match a direct scan") {
  auto f = rot::builtin("sawtooth");
  cf::ConvergentTable t(cf::sample_alpha(11, 16));
  t.ensure_q_exceeds(Integer(1) << 70, 3);
  double C = 0.1;
  auto r = dk_sharpness_density(f, t, 0, 3000, C);
  std::size_t up = 0, down = 0;
  for (long N = 1; N <= 3000; ++N) {
    double s = engine::step_sum_fast(f.step(), t, 0, N).value(t).mid();
    double thr = C * engine::dk_bound(1, t, N).get_d();
    up += s >= thr;
    down += s <= -thr;
  }
  CHECK(r.up == up);
  CHECK(r.down == down);
  CHECK(r.undecided == 0);
  REQUIRE_FALSE(r.checkpoints.empty());
  CHECK(r.checkpoints.back().M == 3000);
}

TEST_CASE("ud construction moves the block sum in the requested direction") {
  for (auto name : {"sawtooth", "indicator(1/4,1/2)", "appendix_pm(1/6,1/3,2/3)"}) {
    auto f = rot::parse_function(name);
    for (bool up : {true, false}) {
      auto u = ud_construction(f, 2000, up);
      CHECK(u.sign == (up ? 1 : -1));
      cf::ConvergentTable t(u.alpha.cf);
      t.ensure_q_exceeds(Integer(1) << 64, 3);
      // jump clauses hold for b up to a_K / (2 L^2)
      auto mid = engine::block_sum(f, t, 0, u.alpha.K, 20).value.mid();
      if (up) CHECK(mid > 2);
      else CHECK(mid < -2);
    }
  }
}

TEST_CASE("monte carlo is deterministic and worker independent") {
  json cfg = json::parse(R"({"seed": 4, "experiments": [
    {"experiment": "levy", "k": 100, "alphas": 6},
    {"experiment": "trimmed", "K": 300, "alphas": 6},
    {"experiment": "census", "K_max": [50, 200], "alphas": 4},
    {"experiment": "kesten", "v": 3, "p": 5, "seeds": 400},
    {"experiment": "dk_sharpness", "M": 2000, "alphas": 3}]})");
  json a = monte_carlo(cfg);
  cfg["workers"] = 3;
  json b = monte_carlo(cfg);
  CHECK(a == b);
  CHECK(a.at("results").size() == 5);
  cfg["seed"] = 5;
  CHECK(monte_carlo(cfg) != a);
  json empty = monte_carlo(json::parse(R"({"seed": 1, "experiments": []})"));
  CHECK(empty.at("results").empty());
  CHECK_THROWS_AS(monte_carlo(json::parse(R"({"experiments": [{"experiment": "nope"}]})")), Error);
  CHECK_THROWS_AS(monte_carlo(json::array()), Error);
}

TEST_CASE("quantiles") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2));
  CHECK(quantile({7}, 0.9) == 7);
}
