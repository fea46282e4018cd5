#include <doctest.h>

#include <cmath>
#include <random>

#include "birkhoff/functions.hpp"

using namespace birkhoff;
using namespace birkhoff::rot;

namespace {

const char* kStepBuiltins[] = {"sawtooth", "indicator(1/4,1/2)", "indicator(0,1/2)", "half_discrepancy",
                               "appendix_pm(1/6,1/3,2/3)", "appendix_sym_pair(1,2,5)", "indicator(1/3,1)"};

}  // namespace

TEST_CASE("appendix_sym_pair jump bookkeeping") {
  auto f = builtin("appendix_sym_pair", {1, 2, 5});
  auto d = decompose(f);
  REQUIRE(d.points.size() == 4);
  CHECK(d.points[0] == Rational(1, 5));
  CHECK(d.points[3] == Rational(4, 5));
  CHECK(d.A == std::vector<Rational>{-1, 1, 1, -1});
  CHECK(d.sum_A == 0);
  CHECK(d.drift == 0);
  CHECK(nondegenerate(d) == Clause::Degenerate);
  // pointwise: 1 on [1/5, 2/5), -1 on [3/5, 4/5)
  CHECK(evaluate(f.step(), Rational(3, 10)) == 1);
  CHECK(evaluate(f.step(), Rational(7, 10)) == -1);
  CHECK(evaluate(f.step(), Rational(1, 2)) == 0);
}

TEST_CASE("sawtooth decomposition") {
  auto f = builtin("sawtooth");
  auto d = decompose(f);
  CHECK(d.sum_A == 1);
  CHECK(d.drift == 0);
  CHECK(nondegenerate(d) == Clause::SumA);
  CHECK(total_variation(f) == 2);
  CHECK(evaluate(f.step(), Rational(1, 4)) == Rational(-1, 4));
}

TEST_CASE("indicator decomposition") {
  auto f = builtin("indicator", {Rational(1, 4), Rational(1, 2)});
  auto d = decompose(f);
  CHECK(d.A == std::vector<Rational>{-1, 1});
  CHECK(d.sum_A == 0);
  CHECK(d.drift == Rational(1, 4));
  CHECK(nondegenerate(d) == Clause::Drift);
  CHECK(total_variation(f) == 2);
  CHECK(mean(f.step()) == 0);
}

TEST_CASE("decomposition reproduces each built-in") {
  std::mt19937_64 rng(5);
  for (auto name : kStepBuiltins) {
    auto f = parse_function(name);
    auto d = decompose(f);
    Rational c = 0;
    for (std::size_t i = 0; i < d.A.size(); ++i) {
      c += d.A[i];
      CHECK(d.partial_sums[i] == c);
    }
    Rational drift = 0;
    for (std::size_t i = 0; i < d.A.size(); ++i) drift += d.A[i] * d.points[i];
    CHECK(d.drift == drift);
    for (int i = 0; i < 200; ++i) {
      Rational x(static_cast<long>(rng() % 9973), 9973);
      CHECK(evaluate(d, x) == evaluate(f.step(), x) - f.step().offset);
    }
  }
}

TEST_CASE("built-ins have zero mean") {
  // midpoint rule on a fine grid is exact up to O(1/n) for jump functions
  for (auto name : kStepBuiltins) {
    auto f = parse_function(name);
    const long n = 3000;
    Rational s = 0;
    for (long i = 0; i < n; ++i) s += evaluate(f.step(), Rational(2 * i + 1, 2 * n));
    CHECK(std::fabs(Rational(s / n).get_d()) < 5e-3);
  }
}

TEST_CASE("total variation against a grid lower bound") {
  for (auto name : kStepBuiltins) {
    auto f = parse_function(name);
    const long n = 5040;
    Rational tv = 0, prev = evaluate(f.step(), 0);
    for (long i = 1; i <= n; ++i) {
      Rational cur = evaluate(f.step(), Rational(i, n));
      Rational d = cur - prev;
      tv += d < 0 ? Rational(-d) : d;
      prev = cur;
    }
    CHECK(tv <= total_variation(f));
    CHECK(tv.get_d() > total_variation(f).get_d() - 0.01);
  }
}

TEST_CASE("nondegeneracy is translation invariant on the nondegenerate built-ins") {
  std::mt19937_64 rng(17);
  for (auto name : {"sawtooth", "indicator(1/4,1/2)", "indicator(1/3,1)", "half_discrepancy"}) {
    auto f = parse_function(name);
    bool nd = nondegenerate(decompose(f)) != Clause::Degenerate;
    for (int i = 0; i < 20; ++i) {
      Rational y(static_cast<long>(rng() % 1000), 997);
      auto g = shifted(f.step(), y);
      CHECK((nondegenerate(decompose(g)) != Clause::Degenerate) == nd);
      Rational x(static_cast<long>(rng() % 1009), 1009);
      CHECK(evaluate(g, x) == evaluate(f.step(), x + y));
    }
  }
}

TEST_CASE("log functions") {
  auto f = builtin("log_asym", {0, 0, 1});
  auto v = evaluate(f, Rational(1, 2));
  // normalized: log(1/2) minus the mean -1
  CHECK(std::fabs(v.mid() - (std::log(0.5) + 1)) < 1e-12);
  CHECK(std::fabs(mean(f).approx()) < 1e-15);
  try {
    evaluate(builtin("log_sym", {Rational(1, 2), 1}), Rational(1, 2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
  // numerical mean of log_sym(1/3, 1) is zero
  auto g = builtin("log_sym", {Rational(1, 3), 1});
  double s = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) s += evaluate(g, Rational(2 * i + 1, 2 * n) + Rational(1, 7 * n)).mid();
  CHECK(std::fabs(s / n) < 1e-3);
}

TEST_CASE("function json round trip") {
  for (auto name : {"sawtooth", "appendix_pm(1/6,1/3,2/3)", "log_asym(1/3,0,1)", "log_sym(0,2)"}) {
    auto f = parse_function(name);
    auto g = function_from_json(to_json(f));
    CHECK(to_json(g) == to_json(f));
  }
}
