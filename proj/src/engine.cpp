#include "birkhoff/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>

namespace birkhoff::engine {

using nlohmann::json;

// ---------------------------------------------------------------- AlphaAffine

Interval AlphaAffine::enclose(const ConvergentTable& table, unsigned bits) const {
  std::size_t j = table.depth() >= 2 ? table.depth() - 1 : 0;
  auto br = table.bracket(j);
  Interval a = Interval::from_rationals(br.first, br.second, bits);
  a.mul_rational(coef);
  a.add_rational(constant);
  return a;
}

namespace {

struct SharedTable {
  std::mutex m;
  ConvergentTable t;
  explicit SharedTable(const ConvergentTable& src) : t(src) {}
};

}  // namespace

CertifiedValue AlphaAffine::value(const ConvergentTable& table) const {
  if (coef == 0) return CertifiedValue(constant);
  auto shared = std::make_shared<SharedTable>(table);
  Rational c = coef, k = constant;
  auto refine = [shared, c, k](unsigned bits) {
    std::lock_guard<std::mutex> lock(shared->m);
    unsigned extra = static_cast<unsigned>(mpz_sizeinbase(c.get_num_mpz_t(), 2));
    shared->t.ensure_bits(bits + extra);
    auto br = shared->t.bracket(shared->t.depth() - 1);
    Rational a = c * br.first + k, b = c * br.second + k;
    if (a > b) std::swap(a, b);
    return std::make_pair(a, b);
  };
  auto br = table.bracket(table.depth() >= 2 ? table.depth() - 1 : 0);
  Rational a = coef * br.first + constant, b = coef * br.second + constant;
  if (a > b) std::swap(a, b);
  return CertifiedValue(a, b, kDefaultPrecision, refine);
}

int AlphaAffine::compare(const Rational& t, const ConvergentTable& table) const {
  Rational c = constant - t;
  if (coef == 0) return sgn(c);
  int s = table.sign_alpha_minus(-c / coef);
  return coef > 0 ? s : -s;
}

std::string AlphaAffine::to_string() const {
  return birkhoff::to_string(coef) + "*alpha + " + birkhoff::to_string(constant);
}

// ---------------------------------------------------------------- floor sums

Integer floor_sum_alpha(const ConvergentTable& table, const Integer& N, const Rational& beta) {
  if (N <= 0) return 0;
  const Integer& u = beta.get_num();
  const Integer& s = beta.get_den();
  std::size_t k = table.farey_index(N * s);
  const Integer& p = table.p(k);
  const Integer& Q = table.q(k);
  Integer M = Q * s;
  Integer A = p * s;
  Integer B = u * Q + p * s;
  Integer t, Bn;
  mpz_fdiv_qr(t.get_mpz_t(), Bn.get_mpz_t(), B.get_mpz_t(), M.get_mpz_t());
  Integer sum = floor_sum(N, M, A, Bn) + N * t;
  if (k % 2 == 1) {
    // alpha < p/Q: floors drop by one where n p/Q + beta is an integer
    Integer Qr;
    if (mpz_divisible_p(Q.get_mpz_t(), s.get_mpz_t())) {
      Integer Qp = Q / s;
      Integer inv;
      if (Q == 1) {
        inv = 0;
      } else {
        mpz_invert(inv.get_mpz_t(), p.get_mpz_t(), Q.get_mpz_t());
      }
      Integer r = -u * Qp * inv;
      mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), Q.get_mpz_t());
      Integer hi, lo;
      Integer nr = N - r, mr = -r;
      mpz_fdiv_q(hi.get_mpz_t(), nr.get_mpz_t(), Q.get_mpz_t());
      mpz_fdiv_q(lo.get_mpz_t(), mr.get_mpz_t(), Q.get_mpz_t());
      sum -= hi - lo;
    }
  }
  return sum;
}

Integer count_points(const ConvergentTable& table, const Rational& q, const Integer& N, const Rational& a,
                     const Rational& b) {
  if (!(0 <= a && a < b && b <= 1)) fail(ErrorKind::InvalidInput, "count_points needs 0 <= a < b <= 1");
  if (N <= 0) return 0;
  return floor_sum_alpha(table, N, q - a) - floor_sum_alpha(table, N, q - b);
}

AlphaAffine step_sum_fast(const JumpFunctionSpec& f, const ConvergentTable& table, const Rational& q,
                          const Integer& N) {
  AlphaAffine s;
  if (N <= 0) return s;
  Integer F0 = floor_sum_alpha(table, N, q);
  Rational NN(N);
  if (f.sawtooth != 0) {
    s.coef = f.sawtooth * Rational(N * (N + 1)) / 2;
    s.constant = f.sawtooth * (NN * q - Rational(F0) - NN / 2);
  }
  for (const auto& j : f.jumps) {
    if (j.x == 0 || j.A == 0) continue;
    Integer C = F0 - floor_sum_alpha(table, N, q - j.x);
    s.constant += j.A * (Rational(C) - NN * j.x);
  }
  return s;
}

AlphaAffine step_sum_naive(const JumpFunctionSpec& f, const ConvergentTable& table, const Rational& q,
                           const Integer& N) {
  auto st = rot::step_table(f);
  AlphaAffine s;
  Rational half(1, 2);
  for (Integer n = 1; n <= N; ++n) {
    Integer m = cf::certified_floor(table, n, q);
    Rational shift = q - Rational(m);
    std::size_t c = 0;
    while (c < st.cuts.size() && table.sign_affine(n, shift - st.cuts[c]) > 0) ++c;
    s.coef += st.sawtooth * Rational(n);
    s.constant += st.sawtooth * (shift - half) + st.cell_value[c];
  }
  return s;
}

void prepare_table(ConvergentTable& table, const Function& f, const Rational& q, const Integer& N) {
  Integer L = q.get_den();
  auto add_cuts = [&L](const JumpFunctionSpec& s) {
    for (const auto& j : s.jumps) L = lcm_of(L, j.x.get_den());
  };
  if (f.is_step()) {
    add_cuts(f.step());
  } else {
    L = lcm_of(L, f.log().x1.get_den());
    if (f.log().t) add_cuts(*f.log().t);
  }
  Integer bound = N * L * 2 + 2;
  Integer floor2 = Integer(1) << 48;
  table.ensure_q_exceeds(bound > floor2 ? bound : floor2, 3);
}

namespace {

BirkhoffResult finish(const ConvergentTable& table, const Integer& N, BirkhoffResult r) {
  r.N = N;
  if (N >= 1) {
    r.K_of_N = table.k_of(N);
    r.sum_a = table.partial_quotient_sum(r.K_of_N);
  }
  return r;
}

}  // namespace

BirkhoffResult birkhoff_naive(const Function& f, const ConvergentTable& table, const Rational& q, const Integer& N,
                              unsigned bits) {
  BirkhoffResult r;
  if (f.is_step()) {
    r.exact = step_sum_naive(f.step(), table, q, N);
    r.value = r.exact->value(table);
    r.precision_bits = 0;
    return finish(table, N, r);
  }
  if (!N.fits_ulong_p() || N > Integer(100000000)) fail(ErrorKind::BudgetExceeded, "naive sum beyond 1e8 terms");
  std::size_t n = N.get_ui();
  Trajectory tr(f, table, q, n, bits);
  for (std::size_t i = 0; i < n; ++i) tr.step();
  r.value = CertifiedValue::from_interval(tr.enclosure());
  r.precision_bits = bits;
  return finish(table, N, r);
}

BirkhoffResult birkhoff_step_fast(const Function& f, const ConvergentTable& table, const Rational& q,
                                  const Integer& N) {
  BirkhoffResult r;
  r.exact = step_sum_fast(f.step(), table, q, N);
  r.value = r.exact->value(table);
  return finish(table, N, r);
}

BirkhoffResult birkhoff_sum(const Function& f, const ConvergentTable& table, const Rational& q, const Integer& N,
                            unsigned bits) {
  if (f.is_step()) return birkhoff_step_fast(f, table, q, N);
  return birkhoff_naive(f, table, q, N, bits);
}

// ---------------------------------------------------------------- Trajectory

Trajectory::Trajectory(Function f, ConvergentTable table, Rational q, std::size_t max_N, unsigned bits)
    : f_(std::move(f)), table_(std::move(table)), q_(std::move(q)), max_N_(max_N), bits_(bits), S_(bits),
      const_shift_(bits) {
  prepare_table(table_, f_, q_, Integer(static_cast<unsigned long>(std::max<std::size_t>(max_N_, 1))));
  q_d_ = q_.get_d();
  sum_a_ = table_.partial_quotient_sum(1);
  if (f_.is_step()) {
    st_ = rot::step_table(f_.step());
    sigma_ = st_.sawtooth;
    L_ = lcm_of(Integer(2), lcm_of(sigma_.get_den(), q_.get_den()));
    Rational base = sigma_ * (q_ - Rational(1, 2));
    L_ = lcm_of(L_, base.get_den());
    for (const auto& v : st_.cell_value) L_ = lcm_of(L_, v.get_den());
    for (const auto& v : st_.cell_value) {
      Rational w = (v + base) * Rational(L_);
      W_.push_back(w.get_num());
    }
    sigmaL_ = Rational(sigma_ * Rational(L_)).get_num();
  } else {
    ls_ = f_.log();
    has_t_ = ls_.t.has_value();
    if (has_t_) tt_ = rot::step_table(*ls_.t);
    shift_x1_ = q_ - ls_.x1;
    // constant - mean; zero for the normalized built-ins
    const_shift_ = (ls_.constant - rot::mean(f_)).enclose(bits_);
  }
}

Interval Trajectory::alpha_at(unsigned bits) {
  for (std::size_t i = 0; i < alpha_bits_.size(); ++i)
    if (alpha_bits_[i] == bits) return alpha_cache_[i];
  table_.ensure_bits(bits + 64);
  alpha_cache_.push_back(table_.alpha_interval(bits));
  alpha_bits_.push_back(bits);
  return alpha_cache_.back();
}

std::size_t Trajectory::locate(const rot::StepTable& t, std::size_t n, const Integer& m, const Rational& shift,
                               double frac_d, double margin) const {
  // number of cuts <= frac, deciding near-ties exactly
  std::size_t c = static_cast<std::size_t>(std::upper_bound(t.cuts_d.begin(), t.cuts_d.end(), frac_d) -
                                           t.cuts_d.begin());
  Integer nn(static_cast<unsigned long>(n));
  (void)m;
  while (c > 0 && std::fabs(frac_d - t.cuts_d[c - 1]) < margin &&
         table_.sign_affine(nn, shift - t.cuts[c - 1]) < 0)
    --c;
  while (c < t.cuts.size() && std::fabs(frac_d - t.cuts_d[c]) < margin &&
         table_.sign_affine(nn, shift - t.cuts[c]) > 0)
    ++c;
  return c;
}

void Trajectory::step() {
  if (N_ >= max_N_) fail(ErrorKind::BudgetExceeded, "trajectory beyond its prepared length");
  ++N_;
  Integer Nz(static_cast<unsigned long>(N_));
  while (table_.q(K_) <= Nz) ++K_;
  sum_a_ = table_.partial_quotient_sum(K_);
  if (f_.is_step()) step_jump();
  else step_log();
}

void Trajectory::step_jump() {
  std::size_t n = N_;
  double margin = 1e-11 + static_cast<double>(n) * 1e-15;
  double y = static_cast<double>(n) * table_.alpha_double() + q_d_;
  double md = std::floor(y);
  double fr = y - md;
  Integer m;
  Integer nn(static_cast<unsigned long>(n));
  if (fr < margin || fr > 1 - margin) {
    m = cf::certified_floor(table_, nn, q_);
    fr = y - m.get_d();
  } else {
    m = Integer(md);
  }
  Rational shift = q_ - Rational(m);
  std::size_t c = locate(st_, n, m, shift, fr, margin);
  V_ += W_[c];
  V_ -= sigmaL_ * m;
  double sd = sigma_.get_d();
  double v = sd * (fr - 0.5) + st_.cell_value[c].get_d();
  Sd_ += v;
  Sd_err_ += std::fabs(sd) * margin + 4.5e-16 * (std::fabs(v) + std::fabs(Sd_) + 1.0);
}

void Trajectory::step_log() {
  std::size_t n = N_;
  unsigned bits = bits_;
  Interval u(bits), d(bits);
  while (true) {
    Interval a = alpha_at(bits);
    a.mul_si(static_cast<long>(n));
    a.add_rational(shift_x1_);
    if (!a.contains_integer_boundary()) {
      BigFloat fl(bits);
      mpfr_floor(fl.get(), a.lo.get());
      Interval uu(bits);
      mpfr_sub(uu.lo.get(), a.lo.get(), fl.get(), MPFR_RNDD);
      mpfr_sub(uu.hi.get(), a.hi.get(), fl.get(), MPFR_RNDU);
      if (mpfr_sgn(uu.lo.get()) > 0) {
        u = uu;
        break;
      }
    }
    bits *= 2;
    if (bits > precision_cap()) fail(ErrorKind::PrecisionExhausted, "orbit point too close to the singularity");
  }
  // distance ||.|| = min(u, 1 - u)
  Interval v(u.precision());
  mpfr_ui_sub(v.lo.get(), 1, u.hi.get(), MPFR_RNDD);
  mpfr_ui_sub(v.hi.get(), 1, u.lo.get(), MPFR_RNDU);
  d = u;
  if (mpfr_cmp(v.lo.get(), d.lo.get()) < 0) mpfr_set(d.lo.get(), v.lo.get(), MPFR_RNDD);
  if (mpfr_cmp(v.hi.get(), d.hi.get()) < 0) mpfr_set(d.hi.get(), v.hi.get(), MPFR_RNDU);

  Interval val(bits_);
  mpfr_set(val.lo.get(), const_shift_.lo.get(), MPFR_RNDD);
  mpfr_set(val.hi.get(), const_shift_.hi.get(), MPFR_RNDU);
  if (ls_.c1 != 0) val += log_of(d).mul_rational(ls_.c1);
  if (ls_.c2 != 0) val += log_of(u).mul_rational(ls_.c2);
  if (has_t_) {
    Integer nn(static_cast<unsigned long>(n));
    double margin = 1e-11 + static_cast<double>(n) * 1e-15;
    double y = static_cast<double>(n) * table_.alpha_double() + q_d_;
    double md = std::floor(y);
    double fr = y - md;
    Integer m = (fr < margin || fr > 1 - margin) ? cf::certified_floor(table_, nn, q_) : Integer(md);
    fr = y - m.get_d();
    Rational shift = q_ - Rational(m);
    std::size_t c = locate(tt_, n, m, shift, fr, margin);
    val.add_rational(tt_.cell_value[c]);
    if (tt_.sawtooth != 0) {
      Interval fa = alpha_at(bits_);
      fa.mul_si(static_cast<long>(n));
      fa.add_rational(shift - Rational(1, 2));
      val += fa.mul_rational(tt_.sawtooth);
    }
  }
  S_ += val;
  double dlo = d.lo.to_double(MPFR_RNDD), dhi = d.hi.to_double(MPFR_RNDU);
  if (dhi < gmin_hi_ || gmin_n_ == 0) gmin_n_ = (dlo + dhi < gmin_lo_ + gmin_hi_ || gmin_n_ == 0) ? n : gmin_n_;
  gmin_lo_ = std::min(gmin_lo_, dlo);
  gmin_hi_ = std::min(gmin_hi_, dhi);
}

std::pair<double, double> Trajectory::enclosure_d() const {
  if (f_.is_step()) return {Sd_ - Sd_err_, Sd_ + Sd_err_};
  return {S_.lo.to_double(MPFR_RNDD), S_.hi.to_double(MPFR_RNDU)};
}

std::optional<AlphaAffine> Trajectory::exact() const {
  if (!f_.is_step()) return std::nullopt;
  AlphaAffine a;
  Integer Nz(static_cast<unsigned long>(N_));
  a.coef = sigma_ * Rational(Nz * (Nz + 1)) / 2;
  a.constant = Rational(V_, L_);
  a.constant.canonicalize();
  return a;
}

Interval Trajectory::enclosure(unsigned bits) const {
  if (bits == 0) bits = bits_;
  if (f_.is_step()) return exact()->enclose(table_, bits);
  return S_;
}

void Trajectory::write_csv_row(std::ostream& os) const {
  auto [lo, hi] = f_.is_step() ? std::pair<double, double>{} : enclosure_d();
  if (f_.is_step()) {
    Interval iv = enclosure(128);
    lo = iv.lo.to_double(MPFR_RNDD);
    hi = iv.hi.to_double(MPFR_RNDU);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu,", N_, lo, hi, K_);
  os << buf << sum_a_.get_str() << "\n";
}

// ---------------------------------------------------------------- blocks

BirkhoffResult block_sum(const Function& f, const ConvergentTable& table, const Rational& q, std::size_t K,
                         const Integer& b) {
  if (K < 1) fail(ErrorKind::InvalidBlock, "K must be >= 1");
  const Integer& aK = table.a(K);
  if (b < 1 || b > aK) fail(ErrorKind::InvalidBlock, "block index b must satisfy 1 <= b <= a_K");
  return birkhoff_sum(f, table, q, b * table.q(K - 1));
}

Rational sawtooth_block_main_term(std::size_t K, const Integer& b, const Integer& aK) {
  Rational v = Rational(b) / 2 * (1 - Rational(b) / Rational(aK));
  return K % 2 == 0 ? v : Rational(-v);
}

ClosedForm indicator_block_closed_form(const Rational& x1, const Rational& x2, const ConvergentTable& table,
                                       std::size_t k, const Integer& b) {
  if (!(0 <= x1 && x1 < x2 && x2 <= 1)) fail(ErrorKind::InvalidInput, "need 0 <= x1 < x2 <= 1");
  if (k < 1) fail(ErrorKind::InvalidBlock, "k must be >= 1");
  const Integer& q = table.q(k - 1);
  // grid points sit just right of s_i | q cuts only when k is odd
  Rational e = (k - 1) % 2 == 0 ? Rational(1) : Rational(0);
  auto divides = [&q](const Integer& s) { return mpz_divisible_p(q.get_mpz_t(), s.get_mpz_t()) != 0; };
  Rational v = frac_of(x1 * Rational(q)) + (divides(x1.get_den()) ? e : Rational(0)) - frac_of(x2 * Rational(q)) -
               (divides(x2.get_den()) ? e : Rational(0));
  ClosedForm c;
  c.value = Rational(b) * v;
  c.valid = 2 * x1.get_den() * x2.get_den() * b <= table.a(k);
  return c;
}

Rational dk_bound(const Rational& variation, const ConvergentTable& table, const Integer& N) {
  return variation * Rational(table.partial_quotient_sum(table.k_of(N)));
}

// ---------------------------------------------------------------- singular windows

SingularWindow min_orbit_distance(const ConvergentTable& table, const Rational& q, const Rational& x1,
                                  const Integer& N) {
  if (N < 1) fail(ErrorKind::InvalidInput, "N must be >= 1");
  if (!N.fits_ulong_p() || N > Integer(100000000)) fail(ErrorKind::BudgetExceeded, "scan beyond 1e8 points");
  SingularWindow w;
  w.center = frac_of(x1 - q);
  w.s = w.center.get_den();
  const Rational& th = w.center;
  Rational half(1, 2);
  // z_n = n alpha - theta - m_n with m_n the nearest integer; returns (sign, m_n)
  auto signed_offset = [&](const Integer& n) {
    Integer m = cf::certified_floor(table, n, half - th);
    int s = table.sign_affine(n, -th - Rational(m));
    return std::make_pair(s, m);
  };
  auto dist_affine = [&](const Integer& n, int s, const Integer& m) {
    AlphaAffine a;
    a.coef = Rational(s) * Rational(n);
    a.constant = Rational(-s) * (th + Rational(m));
    return a;
  };
  std::size_t n_max = N.get_ui();
  double ad = table.alpha_double(), thd = th.get_d();
  auto dist_d = [&](std::size_t n) {
    double z = static_cast<double>(n) * ad - thd;
    z -= std::floor(z + 0.5);
    return std::fabs(z);
  };
  std::size_t best = 1;
  double best_d = dist_d(1);
  for (std::size_t n = 2; n <= n_max; ++n) {
    double dn = dist_d(n);
    double margin = 1e-11 + static_cast<double>(n) * 1e-15;
    if (dn < best_d - margin) {
      best = n;
      best_d = dn;
    } else if (dn <= best_d + margin) {
      Integer bn(static_cast<unsigned long>(best)), nn(static_cast<unsigned long>(n));
      auto [s1, m1] = signed_offset(bn);
      auto [s2, m2] = signed_offset(nn);
      AlphaAffine diff;
      auto a1 = dist_affine(bn, s1, m1), a2 = dist_affine(nn, s2, m2);
      diff.coef = a2.coef - a1.coef;
      diff.constant = a2.constant - a1.constant;
      if (diff.compare(0, table) < 0) {
        best = n;
        best_d = dn;
      }
    }
  }
  w.n_star = Integer(static_cast<unsigned long>(best));
  auto [s, m] = signed_offset(w.n_star);
  w.g = dist_affine(w.n_star, s, m).value(table);
  // smallest K with N s < q_K
  Integer Ns = N * w.s;
  for (std::size_t K = 1; K + 3 <= table.depth(); ++K) {
    if (table.q(K) > Ns) {
      w.K_used = K;
      CertifiedValue dk = table.delta(K + 1);
      w.lower_bound = CertifiedValue(dk.lo() / Rational(w.s), dk.hi() / Rational(w.s), dk.precision());
      break;
    }
  }
  return w;
}

namespace {

// c1 log min(u,1-u) + c2 log u + constant, as an interval at u
Interval singular_at(const LogFunctionSpec& f, const Interval& u, unsigned bits) {
  Interval v(bits);
  mpfr_ui_sub(v.lo.get(), 1, u.hi.get(), MPFR_RNDD);
  mpfr_ui_sub(v.hi.get(), 1, u.lo.get(), MPFR_RNDU);
  Interval d = u;
  if (mpfr_cmp(v.lo.get(), d.lo.get()) < 0) mpfr_set(d.lo.get(), v.lo.get(), MPFR_RNDD);
  if (mpfr_cmp(v.hi.get(), d.hi.get()) < 0) mpfr_set(d.hi.get(), v.hi.get(), MPFR_RNDU);
  Interval r = f.constant.enclose(bits);
  if (f.c1 != 0) r += log_of(d).mul_rational(f.c1);
  if (f.c2 != 0) r += log_of(u).mul_rational(f.c2);
  return r;
}

double abs_hi(const Interval& x) {
  double a = std::fabs(x.lo.to_double(MPFR_RNDD)), b = std::fabs(x.hi.to_double(MPFR_RNDU));
  return std::max(a, b);
}

Interval point(double x, unsigned bits) {
  Interval iv(bits);
  mpfr_set_d(iv.lo.get(), x, MPFR_RNDD);
  mpfr_set_d(iv.hi.get(), x, MPFR_RNDU);
  return iv;
}

Interval hull(const Interval& a, const Interval& b) {
  Interval h = a;
  if (mpfr_cmp(b.lo.get(), h.lo.get()) < 0) mpfr_set(h.lo.get(), b.lo.get(), MPFR_RNDD);
  if (mpfr_cmp(b.hi.get(), h.hi.get()) > 0) mpfr_set(h.hi.get(), b.hi.get(), MPFR_RNDU);
  return h;
}

double step_sup(const JumpFunctionSpec& t) {
  auto st = rot::step_table(t);
  double m = 0;
  for (const auto& v : st.cell_value) m = std::max(m, std::fabs(v.get_d()));
  return m + std::fabs(t.sawtooth.get_d()) / 2 + std::fabs(t.offset.get_d());
}

// integral of the jump function over [0, x], x in [0, 1]
double step_antiderivative(const JumpFunctionSpec& t, double x) {
  double s = t.sawtooth.get_d();
  double v = s * (x * x / 2 - x / 2) + t.offset.get_d() * x;
  for (const auto& j : t.jumps) {
    double xi = j.x.get_d();
    v += j.A.get_d() * (std::min(x, xi) - xi * x);
  }
  return v;
}

double step_window(const JumpFunctionSpec& t, double a, double b) {
  double total = t.offset.get_d();
  auto T = [&](double x) {
    double fl = std::floor(x);
    return fl * total + step_antiderivative(t, x - fl);
  };
  return T(b) - T(a);
}

}  // namespace

Interval sup_abs_outside(const LogFunctionSpec& f, const Interval& g) {
  unsigned bits = g.precision();
  double gl = std::max(g.lo.to_double(MPFR_RNDD), 1e-300);
  if (gl >= 0.5) gl = 0.5;
  std::vector<double> cands = {gl, 1 - gl, 0.5};
  Rational cs = f.c1 + f.c2;
  if (cs != 0) {
    double ustar = Rational(f.c2 / cs).get_d();
    if (ustar > 0.5 && ustar < 1 - gl) cands.push_back(ustar);
  }
  double best = 0;
  for (double u : cands) {
    Interval uu = point(u, bits);
    best = std::max(best, abs_hi(singular_at(f, uu, bits)));
  }
  if (f.t) best += step_sup(*f.t);
  Interval r = point(best, bits);
  mpfr_nextabove(r.hi.get());
  return r;
}

Interval window_integral(const LogFunctionSpec& f, const Interval& g) {
  unsigned bits = g.precision();
  auto at = [&](const BigFloat& gv) {
    Interval G(bits);
    mpfr_set(G.lo.get(), gv.get(), MPFR_RNDD);
    mpfr_set(G.hi.get(), gv.get(), MPFR_RNDU);
    // g log g - g
    Interval glg = log_of(G);
    mpfr_mul(glg.lo.get(), glg.lo.get(), gv.get(), MPFR_RNDD);
    mpfr_mul(glg.hi.get(), glg.hi.get(), gv.get(), MPFR_RNDU);
    glg -= G;
    Interval r(bits);
    if (f.c1 != 0) {
      Interval t = glg;
      t.mul_si(2).mul_rational(f.c1);
      r += t;
    }
    if (f.c2 != 0) {
      // (g log g - g) - (1-g) log(1-g) - g
      Interval one_m(bits);
      mpfr_ui_sub(one_m.lo.get(), 1, gv.get(), MPFR_RNDD);
      mpfr_ui_sub(one_m.hi.get(), 1, gv.get(), MPFR_RNDU);
      Interval l = log_of(one_m);
      Interval prod(bits);
      // (1-g) log(1-g) is negative and small; enclose by endpoint products
      BigFloat p1(bits), p2(bits), p3(bits), p4(bits);
      mpfr_mul(p1.get(), one_m.lo.get(), l.lo.get(), MPFR_RNDD);
      mpfr_mul(p2.get(), one_m.hi.get(), l.lo.get(), MPFR_RNDD);
      mpfr_mul(p3.get(), one_m.lo.get(), l.hi.get(), MPFR_RNDU);
      mpfr_mul(p4.get(), one_m.hi.get(), l.hi.get(), MPFR_RNDU);
      mpfr_min(prod.lo.get(), p1.get(), p2.get(), MPFR_RNDD);
      mpfr_max(prod.hi.get(), p3.get(), p4.get(), MPFR_RNDU);
      Interval t = glg;
      t -= prod;
      t -= G;
      t.mul_rational(f.c2);
      r += t;
    }
    Interval c = f.constant.enclose(bits);
    mpfr_mul(c.lo.get(), c.lo.get(), gv.get(), MPFR_RNDD);
    mpfr_mul(c.hi.get(), c.hi.get(), gv.get(), MPFR_RNDU);
    c.mul_si(2);
    r += c;
    if (f.t) {
      double x1 = f.x1.get_d(), gd = gv.to_double();
      double tw = step_window(*f.t, x1 - gd, x1 + gd);
      Interval tt = point(tw, bits);
      mpfr_nextbelow(tt.lo.get());
      mpfr_nextabove(tt.hi.get());
      r += tt;
    }
    return r;
  };
  return hull(at(g.lo), at(g.hi));
}

SingularBound dk_singular_bound_from(const Function& f, const ConvergentTable& table, const Integer& N,
                                     const Interval& g) {
  const auto& s = f.log();
  SingularBound b;
  auto e = cf::ostrowski_expand(N, table);
  b.digit_sum = e.digit_sum();
  b.sup_abs_f = sup_abs_outside(s, g);
  b.sup_term = b.sup_abs_f;
  b.sup_term.mul_z(b.digit_sum);
  Interval wi = window_integral(s, g);
  // |wi|
  Interval aw(wi.precision());
  if (mpfr_sgn(wi.lo.get()) >= 0) {
    aw = wi;
  } else if (mpfr_sgn(wi.hi.get()) <= 0) {
    mpfr_neg(aw.lo.get(), wi.hi.get(), MPFR_RNDD);
    mpfr_neg(aw.hi.get(), wi.lo.get(), MPFR_RNDU);
  } else {
    mpfr_set_zero(aw.lo.get(), 1);
    BigFloat nl(wi.precision());
    mpfr_neg(nl.get(), wi.lo.get(), MPFR_RNDU);
    mpfr_max(aw.hi.get(), nl.get(), wi.hi.get(), MPFR_RNDU);
  }
  b.window_term = aw;
  b.window_term.mul_z(N);
  b.total = b.sup_term + b.window_term;
  b.g = g.mid();
  return b;
}

SingularBound dk_singular_bound(const Function& f, const ConvergentTable& table, const Rational& q,
                                const Integer& N) {
  auto w = min_orbit_distance(table, q, f.log().x1, N);
  Interval g = Interval::from_rationals(w.g.lo(), w.g.hi(), 256);
  return dk_singular_bound_from(f, table, N, g);
}

BlockResidual log_block_residual(const std::vector<Rational>& eps, unsigned bits) {
  if (eps.empty()) fail(ErrorKind::InvalidInput, "empty block");
  for (const auto& e : eps)
    if (e < 0 || e >= 1) fail(ErrorKind::InvalidInput, "offsets must lie in [0, 1)");
  if (eps[0] <= 0) fail(ErrorKind::InvalidInput, "eps_0 must be positive");
  std::size_t q = eps.size();
  BlockResidual r{Interval(bits), Interval(bits)};
  Interval logq = log_of(Interval::from_rational(Rational(static_cast<unsigned long>(q)), bits));
  for (std::size_t j = 0; j < q; ++j) {
    Rational x = Rational(static_cast<unsigned long>(j)) + eps[j];
    r.lhs += log_of(Interval::from_rational(x, bits));
    r.lhs -= logq;
    if (j >= 1) r.main_term.add_rational((eps[j] - Rational(1, 2)) / Rational(static_cast<unsigned long>(j)));
  }
  r.lhs.add_rational(Rational(static_cast<unsigned long>(q)));
  r.main_term += log_of(Interval::from_rational(eps[0], bits));
  return r;
}

json to_json(const BirkhoffResult& r) {
  json j;
  j["N"] = r.N.get_str();
  j["value"] = {{"lo", to_string(r.value.lo())}, {"hi", to_string(r.value.hi())}, {"approx", r.value.mid()}};
  if (r.exact) j["exact"] = {{"alpha_coef", to_string(r.exact->coef)}, {"constant", to_string(r.exact->constant)}};
  j["K_of_N"] = r.K_of_N;
  j["sum_a"] = r.sum_a.get_str();
  j["precision_bits"] = r.precision_bits;
  return j;
}

}  // namespace birkhoff::engine
