// birkhoff_lab: command-line front end for the continued-fraction, Birkhoff-sum and metric-lab code.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "birkhoff/lab.hpp"

using namespace birkhoff;
using nlohmann::json;

namespace {

struct Options {
  std::string alpha = "[2r]";
  std::string f = "sawtooth";
  std::string q = "0";
  std::string N = "10";
  std::size_t M = 1000;
  std::size_t K = 10;
  std::string psi = "klogk";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  unsigned precision_cap = kPrecisionCap;
  std::string out;
  std::string format = "json";
  // subcommand extras
  std::string a = "0", b = "1/2";
  std::string block_b = "1";
  std::string kind = "khintchine";
  double C = 0.05;
  std::size_t K_max = 1000;
  std::vector<unsigned> k_mod;
  std::vector<long> q_mod;
  bool upper = false;
  double sum_constant = 0;
  std::size_t seeds = 10000, m = 1, p = 30;
  unsigned v = 2;
  std::string config;
  std::size_t stride = 1;
};

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "construct:<a_K>" builds alpha from f with ud_construction; "construct:<a_K>:down" for the downward case
cf::ContinuedFraction resolve_alpha(const Options& o, const rot::Function* f, std::size_t depth = 64) {
  if (o.alpha.rfind("construct:", 0) == 0) {
    std::optional<rot::Function> own;
    if (!f) f = &own.emplace(rot::parse_function(o.f));
    std::string rest = o.alpha.substr(10);
    bool up = true;
    auto colon = rest.find(':');
    if (colon != std::string::npos) {
      std::string dir = rest.substr(colon + 1);
      if (dir != "up" && dir != "down") throw Error(ErrorKind::InvalidInput, "direction must be up or down");
      up = dir == "up";
      rest = rest.substr(0, colon);
    }
    auto cf = lab::ud_construction(*f, parse_integer(rest), up).alpha.cf;
    cf.extend(depth);
    return cf;
  }
  return cf::parse_alpha(o.alpha, depth);
}

Integer parse_N(const std::string& s) {
  Integer n = parse_integer(s);
  if (n < 0) throw Error(ErrorKind::InvalidInput, "N must be >= 0");
  return n;
}

json effective_config(const std::string& cmd, const Options& o, const CLI::App& sub) {
  json c;
  c["command"] = cmd;
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_name(false, false);
    if (name.empty() || name == "--help" || name == "-h" || name == "--workers" || name == "--out") continue;
    auto res = opt->results();
    if (name.rfind("--", 0) == 0) name = name.substr(2);
    if (opt->get_expected_max() == 0) {
      c[name] = opt->count() > 0;
      continue;
    }
    if (res.empty()) {
      std::string dflt = opt->get_default_str();
      if (!dflt.empty()) c[name] = dflt;
      continue;
    }
    c[name] = res.size() == 1 ? json(res[0]) : json(res);
  }
  (void)o;
  return c;
}

std::string comment_block(const json& cfg, const char* prefix) {
  std::ostringstream os;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) os << prefix << " " << it.key() << "=" << it.value().dump() << "\n";
  return os.str();
}

void emit(const Options& o, const std::string& cmd, const json& cfg, const json& result, const std::string& csv,
          const std::string& dat) {
  std::string body;
  if (o.format == "json") {
    json doc{{"config", cfg}, {"result", result}};
    body = doc.dump(2) + "\n";
  } else if (o.format == "csv") {
    body = comment_block(cfg, "#") + (csv.empty() ? "# no tabular output for this command\n" : csv);
  } else {
    body = comment_block(cfg, "#") + (dat.empty() ? (csv.empty() ? "" : csv) : dat);
  }
  if (o.out.empty()) {
    std::cout << body;
    return;
  }
  std::filesystem::create_directories(o.out);
  std::string ext = o.format == "dat" ? "dat" : o.format;
  auto path = std::filesystem::path(o.out) / (cmd + "." + ext);
  std::ofstream f(path);
  f << body;
  if (o.format == "dat") {
    std::ofstream g(std::filesystem::path(o.out) / (cmd + ".gp"));
    g << "# gnuplot script\nset datafile separator whitespace\nplot '" << cmd << ".dat' using 1:2 with lines title '"
      << cmd << "'\n";
  }
  std::cerr << "wrote " << path.string() << "\n";
}

std::string rounded(double x, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, x);
  return buf;
}

json value_json(const CertifiedValue& v) {
  return {{"lo", to_string(v.lo())},
          {"hi", to_string(v.hi())},
          {"approx", v.mid()},
          {"rounded", rounded(v.mid(), 5)},
          {"enclosure", v.to_string(15)}};
}

// ---------------------------------------------------------------- commands

void cmd_cf(const Options& o, const std::string& cmd, const json& cfg) {
  auto cf = resolve_alpha(o, nullptr, o.K);
  json a = json::array();
  std::ostringstream csv;
  csv << "k,a_k\n";
  for (std::size_t k = 1; k <= o.K; ++k) {
    a.push_back(cf.a(k).get_str());
    csv << k << "," << cf.a(k).get_str() << "\n";
  }
  emit(o, cmd, cfg, {{"alpha", cf.describe()}, {"quotients", a}, {"cf", cf::to_json(cf)}}, csv.str(), "");
}

void cmd_convergents(const Options& o, const std::string& cmd, const json& cfg) {
  cf::ConvergentTable t(resolve_alpha(o, nullptr, o.K + 1));
  t.extend(o.K);
  json rows = json::array();
  std::ostringstream csv;
  csv << "k,a_k,p_k,q_k\n";
  for (std::size_t k = 0; k <= o.K; ++k) {
    std::string a = k == 0 ? "" : t.a(k).get_str();
    rows.push_back({{"k", k}, {"a", a}, {"p", t.p(k).get_str()}, {"q", t.q(k).get_str()}});
    csv << k << "," << a << "," << t.p(k).get_str() << "," << t.q(k).get_str() << "\n";
  }
  emit(o, cmd, cfg, {{"alpha", t.cf().describe()}, {"convergents", rows}}, csv.str(), "");
}

void cmd_ostrowski(const Options& o, const std::string& cmd, const json& cfg) {
  Integer N = parse_N(o.N);
  cf::ConvergentTable t(resolve_alpha(o, nullptr));
  t.ensure_q_exceeds(N + 1, 2);
  auto e = cf::ostrowski_expand(N, t);
  std::string digits;
  for (std::size_t i = 0; i < e.digits.size(); ++i) digits += (i ? "," : "") + e.digits[i].get_str();
  json r = cf::to_json(e);
  r["digits_text"] = digits;
  if (o.format == "json" || !o.out.empty()) emit(o, cmd, cfg, r, "l,b_l\n" + [&] {
    std::string s;
    for (std::size_t i = 0; i < e.digits.size(); ++i) s += std::to_string(i) + "," + e.digits[i].get_str() + "\n";
    return s;
  }(), "");
  else emit(o, cmd, cfg, r, "digits\n" + digits + "\n", "");
}

void cmd_birkhoff(const Options& o, const std::string& cmd, const json& cfg, bool trajectory) {
  auto f = rot::parse_function(o.f);
  Rational q = parse_rational(o.q);
  auto table = cf::ConvergentTable(resolve_alpha(o, &f));
  if (trajectory) {
    engine::Trajectory tr(f, table, q, o.M);
    std::ostringstream csv, dat;
    csv << engine::Trajectory::csv_header() << "\n";
    dat << "# N S_mid\n";
    json rows = json::array();
    for (std::size_t N = 1; N <= o.M; ++N) {
      tr.step();
      if (N % o.stride != 0 && N != o.M) continue;
      tr.write_csv_row(csv);
      auto [lo, hi] = tr.enclosure_d();
      dat << N << " " << format_double(0.5 * (lo + hi), 17) << "\n";
      if (o.format == "json") rows.push_back({N, lo, hi});
    }
    emit(o, cmd, cfg, {{"alpha", table.cf().describe()}, {"function", f.name}, {"rows", rows}}, csv.str(), dat.str());
    return;
  }
  Integer N = parse_N(o.N);
  engine::prepare_table(table, f, q, N);
  auto r = engine::birkhoff_sum(f, table, q, N);
  json j = engine::to_json(r);
  j["value"] = value_json(r.value);
  j["alpha"] = table.cf().describe();
  j["function"] = f.name;
  std::string csv = "N,S_lo,S_hi,K_of_N,sum_a\n" + N.get_str() + "," + format_double(r.value.lo().get_d(), 17) + "," +
                    format_double(r.value.hi().get_d(), 17) + "," + std::to_string(r.K_of_N) + "," + r.sum_a.get_str() +
                    "\n";
  emit(o, cmd, cfg, j, csv, "");
}

void cmd_count(const Options& o, const std::string& cmd, const json& cfg) {
  Integer N = parse_N(o.N);
  Rational q = parse_rational(o.q), a = parse_rational(o.a), b = parse_rational(o.b);
  cf::ConvergentTable t(resolve_alpha(o, nullptr));
  t.ensure_q_exceeds(N * lcm_of(lcm_of(q.get_den(), a.get_den()), b.get_den()) * 2 + 2, 3);
  Integer c = engine::count_points(t, q, N, a, b);
  emit(o, cmd, cfg, {{"N", N.get_str()}, {"a", to_string(a)}, {"b", to_string(b)}, {"count", c.get_str()}},
       "N,a,b,count\n" + N.get_str() + "," + to_string(a) + "," + to_string(b) + "," + c.get_str() + "\n", "");
}

void cmd_block(const Options& o, const std::string& cmd, const json& cfg) {
  auto f = rot::parse_function(o.f);
  Rational q = parse_rational(o.q);
  Integer b = parse_N(o.block_b);
  cf::ConvergentTable t(resolve_alpha(o, &f));
  t.extend(o.K + 1);
  json r{{"K", o.K}, {"b", b.get_str()}, {"a_K", t.a(o.K).get_str()}, {"q_Km1", t.q(o.K - 1).get_str()}};
  if (b == 0) {
    r["value"] = value_json(CertifiedValue(Rational(0)));
  } else {
    engine::prepare_table(t, f, q, b * t.q(o.K - 1));
    auto s = engine::block_sum(f, t, q, o.K, b);
    r["value"] = value_json(s.value);
  }
  if (f.is_step() && f.step().jumps.empty() && f.step().sawtooth == 1)
    r["main_term"] = to_string(engine::sawtooth_block_main_term(o.K, b, t.a(o.K)));
  if (f.is_step() && q == 0 && o.f.rfind("indicator", 0) == 0) {
    auto d = rot::decompose(f);
    Rational x1 = d.points.size() == 2 ? d.points[0] : Rational(0), x2 = d.points.back();
    if (d.points.size() == 1) x2 = 1, x1 = d.points[0];
    auto c = engine::indicator_block_closed_form(x1, x2, t, o.K, b);
    r["closed_form"] = {{"value", to_string(c.value)}, {"valid", c.valid}};
  }
  emit(o, cmd, cfg, r, "", "");
}

void cmd_dk_bound(const Options& o, const std::string& cmd, const json& cfg) {
  auto f = rot::parse_function(o.f);
  Integer N = parse_N(o.N);
  if (N < 1) throw Error(ErrorKind::InvalidInput, "N must be >= 1");
  Rational q = parse_rational(o.q);
  cf::ConvergentTable t(resolve_alpha(o, &f));
  engine::prepare_table(t, f, q, N);
  json r{{"N", N.get_str()}, {"K_of_N", t.k_of(N)}};
  if (f.is_step()) {
    Rational var = rot::total_variation(f);
    r["variation"] = to_string(var);
    r["bound"] = to_string(engine::dk_bound(var, t, N));
    r["S_N"] = value_json(engine::birkhoff_sum(f, t, q, N).value);
  } else {
    auto b = engine::dk_singular_bound(f, t, q, N);
    r["bound"] = b.total.hi.to_double(MPFR_RNDU);
    r["sup_term"] = b.sup_term.hi.to_double(MPFR_RNDU);
    r["window_term"] = b.window_term.hi.to_double(MPFR_RNDU);
    r["digit_sum"] = b.digit_sum.get_str();
    r["g"] = b.g;
    r["S_N"] = value_json(engine::birkhoff_sum(f, t, q, N).value);
  }
  emit(o, cmd, cfg, r, "", "");
}

void cmd_density(const Options& o, const std::string& cmd, const json& cfg) {
  auto f = rot::parse_function(o.f);
  Rational q = parse_rational(o.q);
  cf::ConvergentTable t(resolve_alpha(o, &f));
  auto psi = lab::PsiFunction::parse(o.psi);
  lab::DensityReport r;
  if (o.kind == "khintchine") r = lab::khintchine_density(f, psi, t, q, o.M);
  else if (o.kind == "log_khintchine") r = lab::log_khintchine_density(f, psi, t, q, o.M);
  else if (o.kind == "dk") r = lab::dk_sharpness_density(f, t, q, o.M, o.C);
  else if (o.kind == "dk_singular") r = lab::dk_singular_sharpness(f, t, q, o.M, o.C);
  else if (o.kind == "profile") {
    auto prof = lab::symmetric_growth_profile(f, t, q, o.M);
    json rows = json::array();
    std::ostringstream csv, dat;
    csv << "N,ratio\n";
    for (auto& p : prof) {
      rows.push_back({p.N, p.ratio});
      csv << p.N << "," << format_double(p.ratio, 17) << "\n";
      dat << p.N << " " << format_double(p.ratio, 17) << "\n";
    }
    emit(o, cmd, cfg, {{"profile", rows}}, csv.str(), dat.str());
    return;
  } else {
    throw Error(ErrorKind::InvalidInput, "unknown density kind '" + o.kind + "'");
  }
  std::ostringstream csv, dat;
  csv << "M,up,down,undecided,up_fraction,down_fraction,running_max_up,running_max_down,proof_aligned\n";
  for (const auto& c : r.checkpoints) {
    csv << c.M << "," << c.up << "," << c.down << "," << c.undecided << "," << format_double(c.up_fraction, 17) << ","
        << format_double(c.down_fraction, 17) << "," << format_double(c.running_max_up, 17) << ","
        << format_double(c.running_max_down, 17) << "," << (c.proof_aligned ? 1 : 0) << "\n";
    dat << c.M << " " << format_double(c.up_fraction, 17) << " " << format_double(c.down_fraction, 17) << "\n";
  }
  emit(o, cmd, cfg, lab::to_json(r), csv.str(), dat.str());
}

void cmd_census(const Options& o, const std::string& cmd, const json& cfg) {
  auto cf = resolve_alpha(o, nullptr, o.K_max);
  lab::CensusConfig c;
  c.K_max = o.K_max;
  c.psi = lab::PsiFunction::parse(o.psi);
  c.upper = o.upper;
  if (o.k_mod.size() == 2) c.k_congruence = std::make_pair(o.k_mod[0], o.k_mod[1]);
  if (o.q_mod.size() == 2) c.q_congruence = std::make_pair(Integer(o.q_mod[0]), Integer(o.q_mod[1]));
  if (o.sum_constant > 0) c.sum_constant = o.sum_constant;
  auto r = lab::bernstein_census(cf, c);
  if (!lab::verify_census(r, cf, c)) throw VerificationFailure("census re-verification failed");
  std::ostringstream csv;
  csv << "K,a_K\n";
  for (auto K : r.indices) csv << K << "," << cf.a(K).get_str() << "\n";
  emit(o, cmd, cfg, lab::to_json(r), csv.str(), "");
}

void cmd_ratios(const Options& o, const std::string& cmd, const json& cfg) {
  auto cf = resolve_alpha(o, nullptr, o.K);
  auto tr = lab::trimmed_sum_ratio(cf, std::max<std::size_t>(o.K, 3));
  double lv = lab::levy_ratio(cf, o.K);
  emit(o, cmd, cfg,
       {{"K", o.K}, {"levy_ratio", lv}, {"trimmed_ratio", tr.ratio}, {"K0", tr.K0}, {"trimmed_sum", tr.trimmed.get_str()}},
       "K,levy_ratio,trimmed_ratio,K0\n" + std::to_string(o.K) + "," + format_double(lv, 17) + "," +
           format_double(tr.ratio, 17) + "," + std::to_string(tr.K0) + "\n",
       "");
}

void cmd_kesten(const Options& o, const std::string& cmd, const json& cfg) {
  auto r = lab::kesten_uniformity(o.seed, o.seeds, o.m, o.p, o.v);
  std::ostringstream csv;
  csv << "u1,u2,freq\n";
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    csv << r.pairs[i].first << "," << r.pairs[i].second << "," << format_double(r.freq[i], 17) << "\n";
  emit(o, cmd, cfg, lab::to_json(r), csv.str(), "");
}

void cmd_montecarlo(const Options& o, const std::string& cmd, json cfg, const CLI::App& sub) {
  json conf = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot read config '" + o.config + "'");
    conf = json::parse(in);
  }
  if (sub.count("--seed")) conf["seed"] = o.seed;
  if (sub.count("--workers")) conf["workers"] = o.workers;
  json echoed = conf;
  echoed.erase("workers");  // worker count never changes results
  cfg["experiment_config"] = echoed;
  auto r = lab::monte_carlo(conf);
  emit(o, cmd, cfg, r, "", "");
}

// ---------------------------------------------------------------- verify-lemmas

struct Suite {
  int failures = 0;
  json checks = json::array();
  void record(const std::string& name, bool ok, const std::string& detail) {
    checks.push_back({{"check", name}, {"ok", ok}, {"detail", detail}});
    std::cerr << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
  }
};

json verify_lemmas(std::uint64_t seed) {
  Suite s;
  std::mt19937_64 rng(seed);

  // sawtooth block asymptotics: residual stays bounded as a_K grows
  {
    double prev = 0, worst_ratio = 0;
    bool ok = true;
    for (long aK : {100L, 1000L, 10000L}) {
      double mx = 0;
      for (std::size_t K : {4u, 5u}) {
        std::vector<Integer> pre(K - 1, 1);
        pre.push_back(aK);
        cf::ConvergentTable t(cf::ContinuedFraction::with_ones_tail(pre));
        t.ensure_q_exceeds(Integer(1) << 64, 3);
        auto f = rot::builtin("sawtooth");
        for (long b = 0; b <= aK; b += std::max(1L, aK / 200)) {
          double v = b == 0 ? 0.0 : engine::block_sum(f, t, 0, K, b).value.mid();
          mx = std::max(mx, std::fabs(v - engine::sawtooth_block_main_term(K, b, aK).get_d()));
        }
      }
      if (prev > 0) worst_ratio = std::max(worst_ratio, mx / prev);
      prev = mx;
      ok = ok && mx < 5;
    }
    s.record("sawtooth block residual", ok && worst_ratio <= 1.5, "max growth ratio " + format_double(worst_ratio, 4));
  }

  // indicator block closed form, all parity and divisibility cases
  {
    int mismatches = 0, cases = 0;
    Rational x1(1, 3), x2(1, 2);
    auto f = rot::builtin("indicator", {x1, x2});
    for (long res = 0; res < 6; ++res)
      for (unsigned par = 0; par < 2; ++par) {
        cf::CongruenceTarget tg;
        tg.modulus = 6;
        tg.residue = res;
        tg.k_congruence = std::make_pair(par, 2u);
        auto c = cf::construct_alpha({Integer(1 + static_cast<long>(rng() % 3))}, tg, 1000);
        cf::ConvergentTable t(c.cf);
        t.ensure_q_exceeds(Integer(1) << 64, 3);
        for (long b = 1; b <= 1000 / 12; ++b) {
          auto cfm = engine::indicator_block_closed_form(x1, x2, t, c.K, b);
          auto v = engine::step_sum_fast(f.step(), t, 0, b * t.q(c.K - 1));
          ++cases;
          if (!(v.coef == 0 && v.constant == cfm.value)) ++mismatches;
        }
      }
    s.record("indicator block closed form", mismatches == 0,
             std::to_string(mismatches) + " mismatches in " + std::to_string(cases));
  }

  // distance to a rational point: analytic lower bound never violated
  {
    int bad = 0, used = 0;
    for (int i = 0; i < 200; ++i) {
      cf::ConvergentTable t(cf::sample_alpha(rng(), 16));
      t.ensure_q_exceeds(Integer(1) << 80, 3);
      long sden = 2 + static_cast<long>(rng() % 9);
      Rational x1(static_cast<long>(rng() % static_cast<unsigned long>(sden)), sden);
      long N = 2 + static_cast<long>(rng() % 2000);
      auto w = engine::min_orbit_distance(t, 0, x1, N);
      if (!w.lower_bound) continue;
      ++used;
      if (!(w.g.lo() > w.lower_bound->hi())) ++bad;
    }
    s.record("orbit distance lower bound", bad == 0, std::to_string(bad) + " violations in " + std::to_string(used));
  }

  // sum versus integral: residual bounded independently of q
  {
    double worst = 0;
    for (long q : {100L, 1000L, 10000L}) {
      std::vector<Rational> eps;
      for (long j = 0; j < q; ++j) eps.emplace_back(1 + static_cast<long>(rng() % 999), 1000);
      auto r = engine::log_block_residual(eps, 128);
      Interval d = r.lhs - r.main_term;
      worst = std::max(worst, std::fabs(d.mid()));
    }
    s.record("sum vs integral residual", worst < 5, "max |lhs - main| " + format_double(worst, 6));
  }

  // appendix zero identity
  {
    int bad = 0, cases = 0;
    auto f = rot::builtin("appendix_sym_pair", {1, 2, 5});
    for (long res = 0; res < 5; ++res)
      for (unsigned par = 0; par < 2; ++par) {
        cf::CongruenceTarget tg;
        tg.modulus = 5;
        tg.residue = res;
        tg.k_congruence = std::make_pair(par, 2u);
        auto c = cf::construct_alpha({1}, tg, 5000);
        cf::ConvergentTable t(c.cf);
        t.ensure_q_exceeds(Integer(1) << 64, 3);
        for (long b = 1; b <= 5000 / 50; ++b) {
          ++cases;
          auto v = engine::step_sum_fast(f.step(), t, 0, b * t.q(c.K - 1));
          if (!(v.coef == 0 && v.constant == 0)) ++bad;
        }
      }
    s.record("appendix zero identity", bad == 0, std::to_string(bad) + " nonzero in " + std::to_string(cases));
  }

  // Denjoy-Koksma at convergents
  {
    int bad = 0, cases = 0;
    for (int i = 0; i < 5; ++i) {
      cf::ConvergentTable t(cf::sample_alpha(rng(), 16));
      t.ensure_q_exceeds(Integer(1) << 80, 3);
      for (auto name : {"sawtooth", "indicator(1/4,1/2)"}) {
        auto f = rot::parse_function(name);
        Rational var = rot::total_variation(f);
        for (std::size_t k = 1; t.q(k) <= 100000; ++k) {
          auto v = engine::step_sum_fast(f.step(), t, Rational(1, 3), t.q(k));
          ++cases;
          if (v.compare(var, t) > 0 || v.compare(-var, t) < 0) ++bad;
        }
      }
    }
    s.record("Denjoy-Koksma at convergents", bad == 0, std::to_string(bad) + " violations in " + std::to_string(cases));
  }

  // fast and naive evaluators agree
  {
    int bad = 0;
    cf::ConvergentTable t(cf::sample_alpha(rng(), 16));
    t.ensure_q_exceeds(Integer(1) << 80, 3);
    for (auto name : {"sawtooth", "indicator(1/4,1/2)", "appendix_pm(1/6,1/3,2/3)"}) {
      auto f = rot::parse_function(name);
      engine::Trajectory tr(f, t, Rational(2, 7), 2000);
      for (long N = 1; N <= 2000; ++N) {
        tr.step();
        auto fast = engine::step_sum_fast(f.step(), t, Rational(2, 7), N);
        if (*tr.exact() != fast) ++bad;
        if (N % 97 == 0 && engine::step_sum_naive(f.step(), t, Rational(2, 7), N) != fast) ++bad;
      }
    }
    s.record("fast vs naive evaluator", bad == 0, std::to_string(bad) + " mismatches");
  }
  return {{"checks", s.checks}, {"failures", s.failures}};
}

void check_fixtures(const json& result, std::uint64_t seed) {
  const char* dir = std::getenv("BIRKHOFF_LAB_CACHE");
  if (!dir || !*dir) return;
  std::filesystem::create_directories(dir);
  auto path = std::filesystem::path(dir) / ("verify_lemmas_seed" + std::to_string(seed) + ".json");
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    json stored = json::parse(in);
    if (stored != result) throw VerificationFailure("result differs from fixture " + path.string());
  } else {
    std::ofstream out(path);
    out << result.dump(2) << "\n";
  }
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::BudgetExceeded:
    case ErrorKind::PrecisionExhausted:
    case ErrorKind::TableTooShort:
      return 3;
    case ErrorKind::VerificationFailed:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continued fractions, Birkhoff sums of rotations and metric experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* s, bool alpha = true) {
    if (alpha) {
      s->add_option("--alpha", o.alpha, "alpha: [2r], [1;2 3r], [3,4], seed:7, sqrt2, golden, construct:<a_K>[:up|down]")
          ->capture_default_str();
      s->add_option("--f", o.f, "function")->capture_default_str();
    }
    s->add_option("--seed", o.seed, "seed")->capture_default_str();
    s->add_option("--workers", o.workers, "worker threads")->capture_default_str();
    s->add_option("--precision-cap", o.precision_cap, "precision cap in bits")->capture_default_str();
    s->add_option("--out", o.out, "output directory");
    s->add_option("--format", o.format, "json, csv or dat")->check(CLI::IsMember({"json", "csv", "dat"}))->capture_default_str();
  };

  auto* s_cf = app.add_subcommand("cf", "partial quotients");
  common(s_cf);
  s_cf->add_option("--K", o.K, "number of quotients")->capture_default_str();

  auto* s_conv = app.add_subcommand("convergents", "convergent table");
  common(s_conv);
  s_conv->add_option("--K", o.K, "depth")->capture_default_str();

  auto* s_ost = app.add_subcommand("ostrowski", "Ostrowski digits of N");
  common(s_ost);
  s_ost->add_option("--N", o.N, "N")->capture_default_str();

  auto* s_bk = app.add_subcommand("birkhoff", "Birkhoff sum S_N, or a trajectory with --M");
  common(s_bk);
  s_bk->add_option("--q", o.q, "starting point")->capture_default_str();
  s_bk->add_option("--N", o.N, "N")->capture_default_str();
  auto* traj_M = s_bk->add_option("--M", o.M, "trajectory length");
  s_bk->add_option("--stride", o.stride, "trajectory stride")->capture_default_str()->check(CLI::PositiveNumber);

  auto* s_count = app.add_subcommand("count", "number of n <= N with {n alpha + q} in [a, b)");
  common(s_count);
  s_count->add_option("--q", o.q, "starting point")->capture_default_str();
  s_count->add_option("--N", o.N, "N")->capture_default_str();
  s_count->add_option("--a", o.a, "left end")->capture_default_str();
  s_count->add_option("--b", o.b, "right end")->capture_default_str();

  auto* s_block = app.add_subcommand("block", "block sum S_{b q_{K-1}}");
  common(s_block);
  s_block->add_option("--q", o.q, "starting point")->capture_default_str();
  s_block->add_option("--K", o.K, "index K")->capture_default_str();
  s_block->add_option("--b", o.block_b, "multiplier b")->capture_default_str();

  auto* s_dk = app.add_subcommand("dk-bound", "Denjoy-Koksma type bound at N");
  common(s_dk);
  s_dk->add_option("--q", o.q, "starting point")->capture_default_str();
  s_dk->add_option("--N", o.N, "N")->capture_default_str();

  auto* s_den = app.add_subcommand("density", "upward/downward set fractions along a trajectory");
  common(s_den);
  s_den->add_option("--q", o.q, "starting point")->capture_default_str();
  s_den->add_option("--M", o.M, "trajectory length")->capture_default_str();
  s_den->add_option("--psi", o.psi, "growth function")->capture_default_str();
  s_den->add_option("--kind", o.kind, "khintchine, log_khintchine, dk, dk_singular, profile")->capture_default_str();
  s_den->add_option("--C", o.C, "constant for dk thresholds")->capture_default_str();

  auto* s_census = app.add_subcommand("census", "indices K with a_K > psi(K) and optional clauses");
  common(s_census);
  s_census->add_option("--psi", o.psi, "growth function")->capture_default_str();
  s_census->add_option("--K-max", o.K_max, "largest index")->capture_default_str();
  s_census->add_option("--k-mod", o.k_mod, "K = a mod b")->expected(2);
  s_census->add_option("--q-mod", o.q_mod, "q_{K-1} = c mod d")->expected(2);
  s_census->add_flag("--upper", o.upper, "require a_K < K^2");
  s_census->add_option("--sum-constant", o.sum_constant, "require sum_{i<K} a_i <= C K log K");

  auto* s_rat = app.add_subcommand("ratios", "Levy and trimmed-sum ratios");
  common(s_rat);
  s_rat->add_option("--K", o.K, "index")->capture_default_str();

  auto* s_kes = app.add_subcommand("kesten", "pair distribution of (q_{m+p-1}, q_{m+p}) mod v");
  common(s_kes, false);
  s_kes->add_option("--seeds", o.seeds, "number of sampled alpha")->capture_default_str();
  s_kes->add_option("--m", o.m, "m")->capture_default_str();
  s_kes->add_option("--p", o.p, "p")->capture_default_str();
  s_kes->add_option("--v", o.v, "modulus")->capture_default_str();

  auto* s_mc = app.add_subcommand("montecarlo", "run a JSON experiment config");
  common(s_mc, false);
  s_mc->add_option("--config", o.config, "config file")->required();

  auto* s_ver = app.add_subcommand("verify-lemmas", "exact identity suite");
  common(s_ver, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::string cmd = sub->get_name();
  try {
    set_precision_cap(o.precision_cap);
    json cfg = effective_config(cmd, o, *sub);
    if (cmd == "cf") cmd_cf(o, cmd, cfg);
    else if (cmd == "convergents") cmd_convergents(o, cmd, cfg);
    else if (cmd == "ostrowski") cmd_ostrowski(o, cmd, cfg);
    else if (cmd == "birkhoff") cmd_birkhoff(o, cmd, cfg, traj_M->count() > 0);
    else if (cmd == "count") cmd_count(o, cmd, cfg);
    else if (cmd == "block") cmd_block(o, cmd, cfg);
    else if (cmd == "dk-bound") cmd_dk_bound(o, cmd, cfg);
    else if (cmd == "density") cmd_density(o, cmd, cfg);
    else if (cmd == "census") cmd_census(o, cmd, cfg);
    else if (cmd == "ratios") cmd_ratios(o, cmd, cfg);
    else if (cmd == "kesten") cmd_kesten(o, cmd, cfg);
    else if (cmd == "montecarlo") cmd_montecarlo(o, cmd, cfg, *sub);
    else if (cmd == "verify-lemmas") {
      json r = verify_lemmas(o.seed);
      emit(o, cmd, cfg, r, "", "");
      check_fixtures(r, o.seed);
      if (r.at("failures").get<int>() > 0) return 1;
    }
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
