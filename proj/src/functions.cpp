#include "birkhoff/functions.hpp"

#include <algorithm>
#include <map>

namespace birkhoff::rot {

using nlohmann::json;

Interval ExactReal::enclose(unsigned bits) const {
  Interval v = Interval::log2_const(bits);
  v.mul_rational(l2);
  v.add_rational(r);
  return v;
}

double ExactReal::approx() const { return r.get_d() + l2.get_d() * 0.69314718055994530942; }

std::string ExactReal::to_string() const {
  if (l2 == 0) return birkhoff::to_string(r);
  return birkhoff::to_string(r) + " + " + birkhoff::to_string(l2) + "*log(2)";
}

const char* to_string(Clause c) {
  switch (c) {
    case Clause::SumA: return "SumA";
    case Clause::Drift: return "Drift";
    case Clause::Degenerate: return "Degenerate";
  }
  return "?";
}

const JumpFunctionSpec& Function::step() const {
  if (!is_step()) fail(ErrorKind::NotAStepFunction, name + " has a logarithmic singularity");
  return std::get<JumpFunctionSpec>(body);
}

const LogFunctionSpec& Function::log() const {
  if (is_step()) fail(ErrorKind::InvalidInput, name + " is a step function");
  return std::get<LogFunctionSpec>(body);
}

namespace {

void check_unit(const Rational& x, bool allow_one, const std::string& what) {
  if (x < 0 || x > 1 || (!allow_one && x == 1)) fail(ErrorKind::InvalidInput, what + " must lie in [0, 1)");
}

void add_jump(std::vector<Jump>& jumps, const Rational& x, const Rational& A) {
  Rational fx = frac_of(x);
  if (fx == 0 || A == 0) return;
  jumps.push_back({fx, A});
}

Function log_builtin(const std::string& name, const Rational& x1, const Rational& c1, const Rational& c2) {
  check_unit(x1, false, "singularity x1");
  if (c1 == 0 && c2 == 0) fail(ErrorKind::InvalidInput, "log function needs c1 or c2 nonzero");
  LogFunctionSpec s;
  s.x1 = x1;
  s.c1 = c1;
  s.c2 = c2;
  // integral of log||x|| is -1 - log 2, integral of log{x} is -1
  s.constant = ExactReal{c1 + c2, c1};
  return Function{s, name};
}

std::string param_str(const std::vector<Rational>& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ",";
    s += birkhoff::to_string(p[i]);
  }
  return s + ")";
}

}  // namespace

Function builtin(const std::string& name, const std::vector<Rational>& p) {
  auto need = [&](std::size_t n) {
    if (p.size() != n)
      fail(ErrorKind::InvalidInput, name + " expects " + std::to_string(n) + " parameters");
  };
  std::string label = p.empty() ? name : name + param_str(p);
  if (name == "sawtooth") {
    need(0);
    JumpFunctionSpec f;
    f.sawtooth = 1;
    return Function{f, label};
  }
  if (name == "indicator") {
    need(2);
    check_unit(p[0], false, "indicator start");
    check_unit(p[1], true, "indicator end");
    if (!(p[0] < p[1])) fail(ErrorKind::InvalidInput, "indicator needs a < b");
    JumpFunctionSpec f;
    add_jump(f.jumps, p[0], -1);
    if (p[1] < 1) add_jump(f.jumps, p[1], 1);
    return Function{f, label};
  }
  if (name == "half_discrepancy") {
    need(0);
    JumpFunctionSpec f;
    add_jump(f.jumps, Rational(1, 2), 2);
    return Function{f, label};
  }
  if (name == "appendix_pm") {
    need(3);
    check_unit(p[0], false, "x1");
    check_unit(p[2], true, "x3");
    if (!(p[0] < p[1] && p[1] < p[2])) fail(ErrorKind::InvalidInput, "appendix_pm needs x1 < x2 < x3");
    JumpFunctionSpec f;
    add_jump(f.jumps, p[0], -1);
    add_jump(f.jumps, p[1], 2);
    if (p[2] < 1) add_jump(f.jumps, p[2], -1);
    return Function{f, label};
  }
  if (name == "appendix_sym_pair") {
    need(3);
    for (const auto& x : p)
      if (x.get_den() != 1 || x <= 0) fail(ErrorKind::InvalidInput, "appendix_sym_pair takes positive integers");
    Integer u = p[0].get_num(), v = p[1].get_num(), w = p[2].get_num();
    if (!(u < v && 2 * v < w)) fail(ErrorKind::InvalidInput, "appendix_sym_pair needs u < v < w/2");
    if (gcd(u, w) != 1 || gcd(v, w) != 1) fail(ErrorKind::InvalidInput, "appendix_sym_pair needs gcd(u,w)=gcd(v,w)=1");
    JumpFunctionSpec f;
    add_jump(f.jumps, Rational(u, w), -1);
    add_jump(f.jumps, Rational(v, w), 1);
    add_jump(f.jumps, 1 - Rational(v, w), 1);
    add_jump(f.jumps, 1 - Rational(u, w), -1);
    return Function{f, label};
  }
  if (name == "log_asym") {
    need(3);
    return log_builtin(label, p[0], p[1], p[2]);
  }
  if (name == "log_sym") {
    need(2);
    return log_builtin(label, p[0], p[1], 0);
  }
  fail(ErrorKind::InvalidInput, "unknown built-in '" + name + "'");
}

Function parse_function(const std::string& text) {
  std::string t;
  for (char ch : text)
    if (ch != ' ') t += ch;
  auto open = t.find('(');
  if (open == std::string::npos) return builtin(t);
  if (t.back() != ')') fail(ErrorKind::InvalidInput, "bad function syntax '" + text + "'");
  std::string name = t.substr(0, open);
  std::string inner = t.substr(open + 1, t.size() - open - 2);
  std::vector<Rational> params;
  std::string cur;
  for (char ch : inner) {
    if (ch == ',') {
      params.push_back(parse_rational(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) params.push_back(parse_rational(cur));
  return builtin(name, params);
}

StepDecomposition decompose(const JumpFunctionSpec& f) {
  std::map<Rational, Rational> pts;
  Rational step_total = 0;
  for (const auto& j : f.jumps) {
    check_unit(j.x, false, "jump location");
    if (j.x == 0) continue;
    pts[j.x] += j.A;
    step_total += j.A;
  }
  Rational at_zero = f.sawtooth - step_total;
  if (at_zero != 0) pts[Rational(0)] += at_zero;
  StepDecomposition d;
  for (const auto& [x, A] : pts) {
    if (A == 0) continue;
    d.points.push_back(x);
    d.A.push_back(A);
    d.denominator_lcm = lcm_of(d.denominator_lcm, x.get_den());
  }
  Rational run = 0;
  for (const auto& A : d.A) {
    run += A;
    d.partial_sums.push_back(run);
  }
  d.sum_A = run;
  d.interval_weights.assign(d.A.size(), Rational(0));
  Rational tail = 0;
  for (std::size_t j = d.A.size(); j-- > 0;) {
    tail += d.A[j];
    d.interval_weights[j] = tail;
  }
  Rational prev = 0;
  for (std::size_t j = 0; j < d.points.size(); ++j) {
    d.drift += d.interval_weights[j] * (d.points[j] - prev);
    prev = d.points[j];
  }
  return d;
}

StepDecomposition decompose(const Function& f) { return decompose(f.step()); }

Clause nondegenerate(const StepDecomposition& d) {
  if (d.sum_A != 0) return Clause::SumA;
  if (d.drift != 0) return Clause::Drift;
  return Clause::Degenerate;
}

Rational total_variation(const JumpFunctionSpec& f) {
  auto d = decompose(f);
  Rational v = abs(f.sawtooth);
  for (const auto& A : d.A) v += abs(A);
  return v;
}

Rational total_variation(const Function& f) { return total_variation(f.step()); }

Rational mean(const JumpFunctionSpec& f) { return f.offset; }

ExactReal mean(const Function& f) {
  if (f.is_step()) return ExactReal{f.step().offset, 0};
  const auto& s = f.log();
  ExactReal m{-s.c1 - s.c2, -s.c1};
  if (s.t) m.r += s.t->offset;
  return m + s.constant;
}

Rational evaluate(const JumpFunctionSpec& f, const Rational& x) {
  Rational fr = frac_of(x);
  Rational v = f.sawtooth * (fr - Rational(1, 2)) + f.offset;
  for (const auto& j : f.jumps) {
    if (j.x == 0) continue;
    v += j.A * ((fr < j.x ? Rational(1) : Rational(0)) - j.x);
  }
  return v;
}

Rational evaluate(const StepDecomposition& d, const Rational& x) {
  Rational fr = frac_of(x);
  Rational v = d.sum_A * (fr - Rational(1, 2));
  Rational prev = 0;
  for (std::size_t j = 0; j < d.points.size(); ++j) {
    Rational len = d.points[j] - prev;
    bool inside = prev <= fr && fr < d.points[j];
    v += d.interval_weights[j] * ((inside ? Rational(1) : Rational(0)) - len);
    prev = d.points[j];
  }
  return v;
}

CertifiedValue evaluate(const Function& f, const Rational& x) {
  if (f.is_step()) return CertifiedValue(evaluate(f.step(), x));
  const auto s = f.log();
  Rational u = frac_of(x - s.x1);
  if (u == 0) fail(ErrorKind::InvalidInput, "evaluation at the singularity");
  Rational tval = s.t ? evaluate(*s.t, x) : Rational(0);
  auto compute = [s, u, tval](unsigned bits) {
    Interval uu = Interval::from_rational(u, bits);
    Interval vv = Interval::from_rational(u < 1 - u ? u : Rational(1 - u), bits);
    Interval total = s.constant.enclose(bits);
    total.add_rational(tval);
    if (s.c1 != 0) total += log_of(vv).mul_rational(s.c1);
    if (s.c2 != 0) total += log_of(uu).mul_rational(s.c2);
    return std::make_pair(total.lo.to_rational(), total.hi.to_rational());
  };
  auto [lo, hi] = compute(kDefaultPrecision);
  return CertifiedValue(lo, hi, kDefaultPrecision, compute);
}

JumpFunctionSpec from_jumps(const std::vector<Jump>& all, const Rational& sawtooth, const Rational& offset) {
  JumpFunctionSpec f;
  f.sawtooth = sawtooth;
  f.offset = offset;
  std::map<Rational, Rational> pts;
  Rational total = 0, at_zero = 0;
  bool zero_listed = false;
  for (const auto& j : all) {
    Rational x = frac_of(j.x);
    total += j.A;
    if (x == 0) {
      zero_listed = true;
      at_zero += j.A;
    } else {
      pts[x] += j.A;
    }
  }
  if (zero_listed && total != sawtooth)
    fail(ErrorKind::InvalidInput, "jumps must add up to the sawtooth coefficient");
  for (const auto& [x, A] : pts)
    if (A != 0) f.jumps.push_back({x, A});
  return f;
}

JumpFunctionSpec shifted(const JumpFunctionSpec& f, const Rational& y) {
  auto d = decompose(f);
  std::vector<Jump> all;
  for (std::size_t i = 0; i < d.points.size(); ++i) all.push_back({frac_of(d.points[i] - y), d.A[i]});
  bool has_zero = false;
  for (const auto& j : all) has_zero = has_zero || j.x == 0;
  if (!has_zero) all.push_back({Rational(0), Rational(0)});
  Rational total = 0;
  for (const auto& j : all) total += j.A;
  if (total != f.sawtooth) fail(ErrorKind::InvalidInput, "internal: jump total mismatch");
  return from_jumps(all, f.sawtooth, f.offset);
}

StepTable step_table(const JumpFunctionSpec& f) {
  std::map<Rational, Rational> pts;
  for (const auto& j : f.jumps) {
    check_unit(j.x, false, "jump location");
    if (j.x != 0) pts[j.x] += j.A;
  }
  StepTable t;
  t.sawtooth = f.sawtooth;
  t.offset = f.offset;
  std::vector<Rational> A;
  Rational ax = 0;
  for (const auto& [x, a] : pts) {
    if (a == 0) continue;
    t.cuts.push_back(x);
    t.cuts_d.push_back(x.get_d());
    A.push_back(a);
    ax += a * x;
  }
  t.cell_value.assign(A.size() + 1, Rational(0));
  Rational suffix = 0;
  for (std::size_t c = A.size() + 1; c-- > 0;) {
    t.cell_value[c] = suffix - ax;
    if (c > 0) suffix += A[c - 1];
  }
  return t;
}

// ---------------------------------------------------------------- JSON

namespace {

json jump_json(const JumpFunctionSpec& f) {
  json j;
  j["kind"] = "jump";
  json arr = json::array();
  for (const auto& jp : f.jumps) arr.push_back({{"x", birkhoff::to_string(jp.x)}, {"A", birkhoff::to_string(jp.A)}});
  j["jumps"] = arr;
  j["sawtooth"] = birkhoff::to_string(f.sawtooth);
  j["offset"] = birkhoff::to_string(f.offset);
  return j;
}

Rational rat(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(Integer(std::to_string(j.get<long long>())));
  fail(ErrorKind::InvalidInput, "expected a rational as a string");
}

JumpFunctionSpec jump_from_json(const json& j) {
  std::vector<Jump> all;
  if (j.contains("jumps"))
    for (const auto& e : j.at("jumps")) all.push_back({rat(e.at("x")), rat(e.at("A"))});
  Rational saw = j.contains("sawtooth") ? rat(j.at("sawtooth")) : Rational(0);
  Rational off = j.contains("offset") ? rat(j.at("offset")) : Rational(0);
  for (const auto& jp : all) check_unit(jp.x, false, "jump location");
  if (all.empty() && saw == 0) fail(ErrorKind::InvalidInput, "jump function without jumps");
  return from_jumps(all, saw, off);
}

}  // namespace

json to_json(const Function& f) {
  json j;
  if (f.is_step()) {
    j = jump_json(f.step());
  } else {
    const auto& s = f.log();
    j["kind"] = "log";
    j["x1"] = birkhoff::to_string(s.x1);
    j["c1"] = birkhoff::to_string(s.c1);
    j["c2"] = birkhoff::to_string(s.c2);
    j["t"] = s.t ? jump_json(*s.t) : json(nullptr);
    j["constant"] = {{"r", birkhoff::to_string(s.constant.r)}, {"log2", birkhoff::to_string(s.constant.l2)}};
  }
  j["name"] = f.name;
  return j;
}

json to_json(const StepDecomposition& d) {
  auto arr = [](const std::vector<Rational>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(birkhoff::to_string(x));
    return a;
  };
  json j;
  j["points"] = arr(d.points);
  j["A"] = arr(d.A);
  j["partial_sums"] = arr(d.partial_sums);
  j["interval_weights"] = arr(d.interval_weights);
  j["sum_A"] = birkhoff::to_string(d.sum_A);
  j["drift"] = birkhoff::to_string(d.drift);
  j["clause"] = to_string(nondegenerate(d));
  return j;
}

Function function_from_json(const json& j) {
  if (j.is_string()) return parse_function(j.get<std::string>());
  if (j.contains("builtin")) {
    std::vector<Rational> params;
    if (j.contains("params"))
      for (const auto& p : j.at("params")) params.push_back(rat(p));
    return builtin(j.at("builtin").get<std::string>(), params);
  }
  std::string kind = j.at("kind").get<std::string>();
  std::string name = j.contains("name") ? j.at("name").get<std::string>() : kind;
  if (kind == "jump") return Function{jump_from_json(j), name};
  if (kind == "log") {
    LogFunctionSpec s;
    s.x1 = rat(j.at("x1"));
    check_unit(s.x1, false, "x1");
    s.c1 = j.contains("c1") ? rat(j.at("c1")) : Rational(0);
    s.c2 = j.contains("c2") ? rat(j.at("c2")) : Rational(0);
    if (s.c1 == 0 && s.c2 == 0) fail(ErrorKind::InvalidInput, "log function needs c1 or c2 nonzero");
    if (j.contains("t") && !j.at("t").is_null()) s.t = jump_from_json(j.at("t"));
    if (j.contains("constant")) {
      s.constant.r = rat(j.at("constant").at("r"));
      s.constant.l2 = rat(j.at("constant").at("log2"));
    } else {
      s.constant = ExactReal{s.c1 + s.c2 - (s.t ? s.t->offset : Rational(0)), s.c1};
    }
    return Function{s, name};
  }
  fail(ErrorKind::InvalidInput, "unknown function kind '" + kind + "'");
}

}  // namespace birkhoff::rot
