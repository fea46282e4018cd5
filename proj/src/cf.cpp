#include "birkhoff/cf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace birkhoff::cf {

using nlohmann::json;

// ---------------------------------------------------------------- ContinuedFraction

ContinuedFraction::ContinuedFraction() = default;

ContinuedFraction ContinuedFraction::with_ones_tail(std::vector<Integer> prefix) {
  for (const auto& x : prefix)
    if (x < 1) fail(ErrorKind::InvalidInput, "partial quotients must be >= 1");
  ContinuedFraction cf;
  cf.tail_ = TailKind::Ones;
  cf.prefix_ = std::move(prefix);
  cf.a_ = cf.prefix_;
  return cf;
}

ContinuedFraction ContinuedFraction::periodic(std::vector<Integer> prefix, std::vector<Integer> block) {
  if (block.empty()) fail(ErrorKind::InvalidInput, "empty periodic block");
  for (const auto& x : prefix)
    if (x < 1) fail(ErrorKind::InvalidInput, "partial quotients must be >= 1");
  for (const auto& x : block)
    if (x < 1) fail(ErrorKind::InvalidInput, "partial quotients must be >= 1");
  ContinuedFraction cf;
  cf.tail_ = TailKind::Periodic;
  cf.prefix_ = std::move(prefix);
  cf.block_ = std::move(block);
  cf.a_ = cf.prefix_;
  return cf;
}

ContinuedFraction ContinuedFraction::sampled(std::uint64_t seed, std::size_t depth) {
  ContinuedFraction cf;
  cf.tail_ = TailKind::Sampled;
  cf.seed_ = seed;
  cf.gen_.seed(seed);
  cf.extend(depth);
  return cf;
}

const Integer& ContinuedFraction::a(std::size_t k) const {
  if (k == 0 || k > a_.size())
    fail(ErrorKind::TableTooShort, "quotient a_" + std::to_string(k) + " not materialized (depth " +
                                       std::to_string(a_.size()) + ")");
  return a_[k - 1];
}

void ContinuedFraction::extend(std::size_t depth) {
  if (depth <= a_.size()) return;
  switch (tail_) {
    case TailKind::Ones:
      while (a_.size() < depth) a_.emplace_back(1);
      return;
    case TailKind::Periodic:
      while (a_.size() < depth) a_.push_back(block_[(a_.size() - prefix_.size()) % block_.size()]);
      return;
    case TailKind::Sampled: break;
  }
  std::size_t target = std::max<std::size_t>(nbits_ * 2, ((4 * depth + 128 + 63) / 64) * 64);
  while (true) {
    while (nbits_ < target) {
      if (nbits_ + 64 > kPrecisionCap)
        fail(ErrorKind::PrecisionExhausted, "sampled alpha needs more than the bit cap");
      bits_ <<= 64;
      bits_ += Integer(static_cast<unsigned long>(gen_()));
      nbits_ += 64;
    }
    Integer den = Integer(1) << nbits_;
    auto digits = common_prefix(bits_, bits_ + 1, den, depth);
    if (digits.size() >= depth) {
      digits.resize(depth);
      a_ = std::move(digits);
      return;
    }
    target *= 2;
  }
}

std::string ContinuedFraction::describe() const {
  auto join = [](const std::vector<Integer>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += v[i].get_str();
    }
    return s;
  };
  switch (tail_) {
    case TailKind::Ones: return "[" + join(prefix_) + "]";
    case TailKind::Periodic:
      if (prefix_.empty()) return "[" + join(block_) + "r]";
      return "[" + join(prefix_) + ";" + join(block_) + "r]";
    case TailKind::Sampled: return "seed:" + std::to_string(*seed_);
  }
  return "?";
}

std::vector<Integer> common_prefix(const Integer& lo_num, const Integer& hi_num, const Integer& den,
                                   std::size_t max_digits) {
  std::vector<Integer> out;
  Integer n1 = lo_num, d1 = den, n2 = hi_num, d2 = den;
  if (n1 <= 0 || n2 <= 0 || n1 > d1 || n2 > d2) return out;
  Integer q1, r1, q2, r2;
  while (out.size() < max_digits) {
    if (n1 == 0 || n2 == 0) break;
    mpz_fdiv_qr(q1.get_mpz_t(), r1.get_mpz_t(), d1.get_mpz_t(), n1.get_mpz_t());
    mpz_fdiv_qr(q2.get_mpz_t(), r2.get_mpz_t(), d2.get_mpz_t(), n2.get_mpz_t());
    if (q1 != q2 || r1 == 0 || r2 == 0) break;
    out.push_back(q1);
    d1.swap(n1);
    n1.swap(r1);
    d2.swap(n2);
    n2.swap(r2);
  }
  return out;
}

std::vector<Integer> rational_cf(const Rational& x) {
  if (x <= 0 || x > 1) fail(ErrorKind::InvalidInput, "rational_cf expects x in (0, 1]");
  std::vector<Integer> out;
  Integer n = x.get_num(), d = x.get_den(), q, r;
  while (n != 0) {
    mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    out.push_back(q);
    d = n;
    n = r;
  }
  return out;
}

// ---------------------------------------------------------------- sources

QuadraticSource::QuadraticSource(Integer p, Integer r, Integer d, Integer s)
    : p_(std::move(p)), r_(std::move(r)), d_(std::move(d)), s_(std::move(s)) {
  if (d_ <= 0 || s_ == 0) fail(ErrorKind::InvalidInput, "quadratic source needs d > 0, s != 0");
  if (mpz_perfect_square_p(d_.get_mpz_t()))
    fail(ErrorKind::RationalInput, "d is a perfect square, the value is rational");
}

std::pair<Rational, Rational> QuadraticSource::enclose(unsigned bits) const {
  Integer scaled = d_ << (2 * bits);
  Integer root;
  mpz_sqrt(root.get_mpz_t(), scaled.get_mpz_t());
  Integer scale = Integer(1) << bits;
  Rational lo(p_ * scale + r_ * root, s_ * scale);
  Rational hi(p_ * scale + r_ * (root + 1), s_ * scale);
  lo.canonicalize();
  hi.canonicalize();
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

std::string QuadraticSource::describe() const {
  return "(" + p_.get_str() + " + " + r_.get_str() + "*sqrt(" + d_.get_str() + "))/" + s_.get_str();
}

std::pair<Rational, Rational> ContinuedFractionSource::enclose(unsigned bits) const {
  Integer pm1 = 1, qm1 = 0, p0 = 0, q0 = 1;
  Integer target = Integer(1) << (bits + 2);
  std::size_t k = 0;
  while (true) {
    ++k;
    cf_.extend(k + 1);
    const Integer& a = cf_.a(k);
    Integer p1 = a * p0 + pm1, q1 = a * q0 + qm1;
    pm1 = p0;
    qm1 = q0;
    p0 = p1;
    q0 = q1;
    if (qm1 * q0 > target) break;
  }
  Rational x(pm1, qm1), y(p0, q0);
  x.canonicalize();
  y.canonicalize();
  if (x > y) std::swap(x, y);
  return {x, y};
}

ContinuedFraction expand_cf(const RealSource& x, std::size_t K, unsigned cap) {
  for (unsigned bits = kDefaultPrecision;; bits *= 2) {
    if (bits > std::min(cap, precision_cap())) fail(ErrorKind::PrecisionExhausted, "expand_cf: " + x.describe());
    auto [lo, hi] = x.enclose(bits);
    if (hi <= 0 || lo >= 1) fail(ErrorKind::InvalidInput, "expand_cf expects x in (0, 1)");
    if (lo == hi) {
      auto digits = rational_cf(lo);
      if (digits.size() <= K)
        fail(ErrorKind::RationalInput, x.describe() + " is rational with " +
                                           std::to_string(digits.size()) + " quotients");
      digits.resize(K);
      return ContinuedFraction::with_ones_tail(std::move(digits));
    }
    if (lo <= 0 || hi >= 1) continue;
    Integer den = lcm_of(lo.get_den(), hi.get_den());
    Integer ln = lo.get_num() * (den / lo.get_den());
    Integer hn = hi.get_num() * (den / hi.get_den());
    auto digits = common_prefix(ln, hn, den, K);
    if (digits.size() >= K) return ContinuedFraction::with_ones_tail(std::move(digits));
  }
}

ContinuedFraction sample_alpha(std::uint64_t seed, std::size_t K) { return ContinuedFraction::sampled(seed, K); }

// ---------------------------------------------------------------- ConvergentTable

ConvergentTable::ConvergentTable(ContinuedFraction cf) : cf_(std::move(cf)) {
  p_ = {Integer(0)};
  q_ = {Integer(1)};
  a_sum_ = {Integer(0)};
  extend(cf_.size());
}

const Integer& ConvergentTable::p(std::size_t k) const {
  if (k >= p_.size())
    fail(ErrorKind::TableTooShort, "p_" + std::to_string(k) + " beyond depth " + std::to_string(depth()));
  return p_[k];
}

const Integer& ConvergentTable::q(std::size_t k) const {
  if (k >= q_.size())
    fail(ErrorKind::TableTooShort, "q_" + std::to_string(k) + " beyond depth " + std::to_string(depth()));
  return q_[k];
}

Integer ConvergentTable::p_signed(long k) const { return k < 0 ? Integer(1) : p(static_cast<std::size_t>(k)); }
Integer ConvergentTable::q_signed(long k) const { return k < 0 ? Integer(0) : q(static_cast<std::size_t>(k)); }

void ConvergentTable::extend(std::size_t depth) {
  if (depth <= this->depth()) return;
  cf_.extend(depth);
  for (std::size_t k = q_.size(); k <= depth; ++k) {
    const Integer& a = cf_.a(k);
    Integer pk = a * p_[k - 1] + (k >= 2 ? p_[k - 2] : Integer(1));
    Integer qk = a * q_[k - 1] + (k >= 2 ? q_[k - 2] : Integer(0));
    p_.push_back(std::move(pk));
    q_.push_back(std::move(qk));
    a_sum_.push_back(a_sum_.back() + a);
  }
  rebuild_double();
}

void ConvergentTable::ensure_q_exceeds(const Integer& bound, std::size_t extra) {
  while (q_.back() <= bound) extend(std::max<std::size_t>(depth() * 2, depth() + 16));
  auto it = std::upper_bound(q_.begin(), q_.end(), bound);
  std::size_t k = static_cast<std::size_t>(it - q_.begin());
  extend(k + extra);
}

void ConvergentTable::ensure_bits(unsigned bits) {
  Integer bound = Integer(1) << (bits / 2 + 3);
  ensure_q_exceeds(bound, 2);
}

void ConvergentTable::rebuild_double() {
  alpha_d_valid_ = false;
  for (std::size_t j = 1; j < q_.size(); ++j) {
    if (mpz_sizeinbase(q_[j].get_mpz_t(), 2) > 32) {
      alpha_d_ = Rational(p_[j], q_[j]).get_d();
      alpha_d_valid_ = true;
      return;
    }
  }
}

std::size_t ConvergentTable::k_of(const Integer& N) const {
  if (N < 1) fail(ErrorKind::InvalidInput, "K(N) needs N >= 1");
  auto it = std::upper_bound(q_.begin() + 1, q_.end(), N);
  if (it == q_.end())
    fail(ErrorKind::TableTooShort, "K(N) beyond table depth " + std::to_string(depth()));
  return static_cast<std::size_t>(it - q_.begin());
}

Integer ConvergentTable::partial_quotient_sum(std::size_t k) const {
  if (k >= a_sum_.size()) fail(ErrorKind::TableTooShort, "partial quotient sum beyond depth");
  return a_sum_[k];
}

std::size_t ConvergentTable::farey_index(const Integer& bound) const {
  std::size_t lo = 0, hi = depth();  // candidates k in [0, depth-1]
  if (depth() == 0 || q_[depth() - 1] + q_[depth()] <= bound)
    fail(ErrorKind::TableTooShort, "convergents do not reach denominator " + bound.get_str());
  hi = depth() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (q_[mid] + q_[mid + 1] > bound) hi = mid;
    else lo = mid + 1;
  }
  return lo;
}

int ConvergentTable::sign_alpha_minus(const Rational& t) const {
  if (alpha_d_valid_) {
    double td = t.get_d();
    double diff = alpha_d_ - td;
    double margin = 1e-12 + std::fabs(td) * 1e-15;
    if (diff > margin) return 1;
    if (diff < -margin) return -1;
  }
  if (t <= 0) return 1;
  if (t >= 1) return -1;
  std::size_t k = farey_index(t.get_den());
  Rational ck(p_[k], q_[k]), ck1(p_[k + 1], q_[k + 1]);
  ck.canonicalize();
  ck1.canonicalize();
  if (t == ck) return k % 2 == 0 ? 1 : -1;
  if (t == ck1) return (k + 1) % 2 == 0 ? 1 : -1;
  const Rational& lo = ck < ck1 ? ck : ck1;
  const Rational& hi = ck < ck1 ? ck1 : ck;
  if (t < lo) return 1;
  if (t > hi) return -1;
  fail(ErrorKind::InvalidInput, "rational strictly inside a Farey bracket");
}

int ConvergentTable::sign_affine(const Integer& n, const Rational& c) const {
  if (n == 0) return sgn(c);
  Rational t = -c / Rational(n);
  int s = sign_alpha_minus(t);
  return n > 0 ? s : -s;
}

std::pair<Rational, Rational> ConvergentTable::bracket(std::size_t k) const {
  Rational x(p(k), q(k)), y(p(k + 1), q(k + 1));
  x.canonicalize();
  y.canonicalize();
  if (x > y) std::swap(x, y);
  return {x, y};
}

std::size_t ConvergentTable::bracket_index_for_bits(unsigned bits) const {
  for (std::size_t j = 0; j + 1 <= depth(); ++j) {
    std::size_t s = mpz_sizeinbase(q_[j].get_mpz_t(), 2) + mpz_sizeinbase(q_[j + 1].get_mpz_t(), 2);
    if (s >= bits + 4) return j;
  }
  fail(ErrorKind::TableTooShort, "alpha enclosure at " + std::to_string(bits) + " bits needs a deeper table");
}

Interval ConvergentTable::alpha_interval(unsigned bits) const {
  auto [lo, hi] = bracket(bracket_index_for_bits(bits));
  return Interval::from_rationals(lo, hi, bits);
}

namespace {

struct SharedTable {
  std::mutex m;
  ConvergentTable t;
  explicit SharedTable(const ConvergentTable& src) : t(src) {}
};

}  // namespace

CertifiedValue ConvergentTable::alpha() const {
  auto shared = std::make_shared<SharedTable>(*this);
  auto refine = [shared](unsigned bits) {
    std::lock_guard<std::mutex> lock(shared->m);
    shared->t.ensure_bits(bits);
    auto j = shared->t.bracket_index_for_bits(bits);
    return shared->t.bracket(j);
  };
  auto [lo, hi] = depth() >= 1 ? bracket(depth() - 1) : std::pair<Rational, Rational>{0, 1};
  return CertifiedValue(lo, hi, kDefaultPrecision, refine);
}

CertifiedValue ConvergentTable::delta(std::size_t k) const {
  Integer qk = q(k), pk = p(k);
  auto shared = std::make_shared<SharedTable>(*this);
  auto from_bracket = [qk, pk, k](std::pair<Rational, Rational> br) {
    Rational a = Rational(qk) * br.first - Rational(pk);
    Rational b = Rational(qk) * br.second - Rational(pk);
    if (k % 2 == 0) return std::make_pair(a, b);
    return std::make_pair(Rational(-b), Rational(-a));
  };
  auto refine = [shared, from_bracket, k](unsigned bits) {
    std::lock_guard<std::mutex> lock(shared->m);
    shared->t.ensure_bits(bits);
    shared->t.extend(k + 3);
    auto j = std::max(shared->t.bracket_index_for_bits(bits), k + 1);
    shared->t.extend(j + 1);
    return from_bracket(shared->t.bracket(j));
  };
  std::size_t j = std::max<std::size_t>(k + 1, depth() >= 1 ? depth() - 1 : 0);
  if (j + 1 > depth()) {
    auto [lo, hi] = refine(kDefaultPrecision);
    return CertifiedValue(lo, hi, kDefaultPrecision, refine);
  }
  auto [lo, hi] = from_bracket(bracket(j));
  return CertifiedValue(lo, hi, kDefaultPrecision, refine);
}

// ---------------------------------------------------------------- Ostrowski

Integer OstrowskiExpansion::digit_sum() const {
  Integer s = 0;
  for (const auto& b : digits) s += b;
  return s;
}

OstrowskiExpansion ostrowski_expand(const Integer& N, const ConvergentTable& table) {
  OstrowskiExpansion e;
  e.N = N;
  if (N < 0) fail(ErrorKind::InvalidInput, "Ostrowski expansion needs N >= 0");
  if (N == 0) return e;
  e.K = table.k_of(N);
  e.digits.assign(e.K, Integer(0));
  Integer R = N;
  for (std::size_t l = e.K; l-- > 0;) {
    Integer b;
    mpz_fdiv_q(b.get_mpz_t(), R.get_mpz_t(), table.q(l).get_mpz_t());
    R -= b * table.q(l);
    e.digits[l] = b;
  }
  return e;
}

Integer ostrowski_value(const std::vector<Integer>& digits, const ConvergentTable& table) {
  if (digits.empty()) return 0;
  std::size_t K = digits.size();
  if (K > table.depth()) fail(ErrorKind::TableTooShort, "digit list longer than table");
  if (digits[K - 1] == 0) fail(ErrorKind::InvalidDigits, "leading digit b_{K-1} is zero");
  for (std::size_t l = 0; l < K; ++l) {
    const Integer& b = digits[l];
    if (b < 0) fail(ErrorKind::InvalidDigits, "negative digit b_" + std::to_string(l));
    const Integer& cap = table.a(l + 1);
    if (l == 0 && b >= cap) fail(ErrorKind::InvalidDigits, "b_0 must be < a_1");
    if (b > cap) fail(ErrorKind::InvalidDigits, "b_" + std::to_string(l) + " exceeds a_" + std::to_string(l + 1));
    if (l >= 1 && b == cap && digits[l - 1] != 0)
      fail(ErrorKind::InvalidDigits, "b_" + std::to_string(l) + " = a_" + std::to_string(l + 1) +
                                         " requires b_" + std::to_string(l - 1) + " = 0");
  }
  Integer N = 0;
  for (std::size_t l = 0; l < K; ++l) N += digits[l] * table.q(l);
  return N;
}

// ---------------------------------------------------------------- certified fractional parts

Integer certified_floor(const ConvergentTable& table, const Integer& n, const Rational& q) {
  if (n == 0) return floor_of(q);
  Integer m;
  if (mpz_sizeinbase(n.get_mpz_t(), 2) < 40 && table.alpha_double() != 0.0) {
    double guess = std::floor(n.get_d() * table.alpha_double() + q.get_d());
    m = Integer(guess);
  } else {
    std::size_t j = table.depth();
    m = floor_of(Rational(n * table.p(j), table.q(j)) + q);
  }
  while (table.sign_affine(n, q - Rational(m)) < 0) m -= 1;
  while (table.sign_affine(n, q - Rational(m + 1)) >= 0) m += 1;
  return m;
}

CertifiedValue certified_frac(const ConvergentTable& table, const Integer& n, const Rational& q) {
  Integer m = certified_floor(table, n, q);
  Rational shift = q - Rational(m);
  if (n == 0) return CertifiedValue(shift);
  auto shared = std::make_shared<SharedTable>(table);
  auto map = [n, shift](std::pair<Rational, Rational> br) {
    Rational a = Rational(n) * br.first + shift;
    Rational b = Rational(n) * br.second + shift;
    if (a > b) std::swap(a, b);
    if (a < 0) a = 0;
    if (b > 1) b = 1;
    return std::make_pair(a, b);
  };
  std::size_t extra = mpz_sizeinbase(n.get_mpz_t(), 2);
  auto refine = [shared, map, extra](unsigned bits) {
    std::lock_guard<std::mutex> lock(shared->m);
    shared->t.ensure_bits(bits + static_cast<unsigned>(extra));
    return map(shared->t.bracket(shared->t.bracket_index_for_bits(bits + static_cast<unsigned>(extra))));
  };
  auto [lo, hi] = refine(kDefaultPrecision);
  return CertifiedValue(lo, hi, kDefaultPrecision, refine);
}

// ---------------------------------------------------------------- construct_alpha

ConstructedAlpha construct_alpha(const std::vector<Integer>& prefix, const CongruenceTarget& target,
                                 const Integer& big_quotient) {
  const Integer& d = target.modulus;
  if (d < 1) fail(ErrorKind::InvalidTarget, "modulus must be >= 1");
  if (target.residue < 0 || target.residue >= d) fail(ErrorKind::InvalidTarget, "residue outside [0, d)");
  if (big_quotient < 1) fail(ErrorKind::InvalidTarget, "big quotient must be >= 1");
  unsigned km = 1, kr = 0;
  if (target.k_congruence) {
    km = target.k_congruence->second;
    kr = target.k_congruence->first;
    if (km == 0 || kr >= km) fail(ErrorKind::InvalidTarget, "bad congruence for K");
  }
  if (!d.fits_slong_p() || d > 100000) fail(ErrorKind::InvalidTarget, "modulus too large for BFS");
  long dm = d.get_si();
  std::vector<long> alphabet;
  if (target.alphabet.empty()) {
    for (long a = 1; a <= 2 * dm + 1; ++a) alphabet.push_back(a);
  } else {
    for (const auto& a : target.alphabet) {
      if (a < 1) fail(ErrorKind::InvalidTarget, "alphabet entries must be >= 1");
      alphabet.push_back(Integer(a % d).get_si());
    }
  }
  std::vector<Integer> labels = target.alphabet;
  if (labels.empty())
    for (long a : alphabet) labels.emplace_back(a);

  // state: (q_{i-1} mod d, q_i mod d, i mod km) at index i
  long u = 0, v = 1 % dm;  // q_{-1}, q_0
  for (const auto& a : prefix) {
    if (a < 1) fail(ErrorKind::InvalidInput, "prefix quotients must be >= 1");
    long am = Integer(a % d).get_si();
    long w = (am * v + u) % dm;
    u = v;
    v = w;
  }
  std::size_t i0 = prefix.size();
  long c = target.residue.get_si();
  auto goal = [&](long vv, std::size_t i) { return vv == c && (i + 1) % km == kr; };

  struct Node {
    long u, v;
    std::size_t i;
    long parent;
    std::size_t label;
  };
  std::vector<Node> nodes;
  std::map<std::tuple<long, long, unsigned>, bool> seen;
  std::deque<std::size_t> queue;
  nodes.push_back({u, v, i0, -1, 0});
  seen[{u, v, static_cast<unsigned>(i0 % km)}] = true;
  queue.push_back(0);
  long found = -1;
  while (!queue.empty()) {
    std::size_t idx = queue.front();
    queue.pop_front();
    Node cur = nodes[idx];
    if (goal(cur.v, cur.i)) {
      found = static_cast<long>(idx);
      break;
    }
    if (cur.i - i0 >= target.max_extension) continue;
    for (std::size_t li = 0; li < alphabet.size(); ++li) {
      long w = (alphabet[li] % dm * cur.v + cur.u) % dm;
      auto key = std::make_tuple(cur.v, w, static_cast<unsigned>((cur.i + 1) % km));
      if (seen.count(key)) continue;
      seen[key] = true;
      nodes.push_back({cur.v, w, cur.i + 1, static_cast<long>(idx), li});
      queue.push_back(nodes.size() - 1);
    }
  }
  if (found < 0) fail(ErrorKind::Unreachable, "no extension reaches the requested congruence");
  std::vector<Integer> ext;
  for (long idx = found; nodes[idx].parent >= 0; idx = nodes[idx].parent) ext.push_back(labels[nodes[idx].label]);
  std::reverse(ext.begin(), ext.end());
  std::vector<Integer> quotients = prefix;
  quotients.insert(quotients.end(), ext.begin(), ext.end());
  quotients.push_back(big_quotient);
  ConstructedAlpha out;
  out.K = quotients.size();
  out.cf = ContinuedFraction::with_ones_tail(quotients);
  ConvergentTable t(out.cf);
  out.q_Km1 = t.q(out.K - 1);
  return out;
}

// ---------------------------------------------------------------- parsing and JSON

namespace {

std::vector<Integer> parse_list(const std::string& s) {
  std::vector<Integer> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      Integer x = parse_integer(cur);
      if (x < 1) fail(ErrorKind::InvalidInput, "partial quotients must be >= 1");
      out.push_back(x);
      cur.clear();
    }
  };
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') flush();
    else cur += ch;
  }
  flush();
  return out;
}

}  // namespace

ContinuedFraction parse_alpha(const std::string& text, std::size_t depth) {
  std::string t;
  for (char ch : text)
    if (ch != '\n' && ch != '\r') t += ch;
  while (!t.empty() && t.front() == ' ') t.erase(t.begin());
  while (!t.empty() && t.back() == ' ') t.pop_back();
  ContinuedFraction cf;
  if (t.rfind("seed:", 0) == 0) {
    Integer s = parse_integer(t.substr(5));
    if (s < 0 || !s.fits_ulong_p()) fail(ErrorKind::InvalidInput, "seed must be a non-negative 64-bit integer");
    return ContinuedFraction::sampled(s.get_ui(), depth);
  } else if (t == "sqrt2") {
    cf = ContinuedFraction::periodic({}, {Integer(2)});
  } else if (t == "golden") {
    cf = ContinuedFraction::periodic({}, {Integer(1)});
  } else if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
    std::string inner = t.substr(1, t.size() - 2);
    while (!inner.empty() && inner.back() == ' ') inner.pop_back();
    bool periodic = !inner.empty() && inner.back() == 'r';
    if (periodic) inner.pop_back();
    auto semi = inner.find(';');
    if (periodic) {
      std::vector<Integer> prefix, block;
      if (semi == std::string::npos) block = parse_list(inner);
      else {
        prefix = parse_list(inner.substr(0, semi));
        block = parse_list(inner.substr(semi + 1));
      }
      cf = ContinuedFraction::periodic(prefix, block);
    } else {
      if (semi != std::string::npos) fail(ErrorKind::InvalidInput, "';' only allowed in periodic syntax");
      cf = ContinuedFraction::with_ones_tail(parse_list(inner));
    }
  } else {
    fail(ErrorKind::InvalidInput, "cannot parse alpha '" + text + "'");
  }
  cf.extend(depth);
  return cf;
}

json to_json(const ContinuedFraction& cf) {
  json j;
  auto strs = [](const std::vector<Integer>& v) {
    json arr = json::array();
    for (const auto& x : v) arr.push_back(x.get_str());
    return arr;
  };
  switch (cf.tail()) {
    case TailKind::Ones:
      j["a"] = strs(cf.prefix());
      j["tail"] = "ones";
      j["seed"] = nullptr;
      break;
    case TailKind::Periodic:
      j["a"] = strs(cf.prefix());
      j["tail"] = "periodic";
      j["block"] = strs(cf.block());
      j["seed"] = nullptr;
      break;
    case TailKind::Sampled:
      j["a"] = strs(cf.quotients());
      j["tail"] = "sampled";
      j["seed"] = *cf.seed();
      break;
  }
  return j;
}

ContinuedFraction cf_from_json(const json& j) {
  auto ints = [](const json& arr) {
    std::vector<Integer> out;
    for (const auto& x : arr) {
      if (x.is_string()) out.push_back(parse_integer(x.get<std::string>()));
      else if (x.is_number_integer()) out.emplace_back(std::to_string(x.get<long long>()));
      else fail(ErrorKind::InvalidInput, "quotients must be integers");
    }
    return out;
  };
  if (!j.is_object() || !j.contains("tail")) fail(ErrorKind::InvalidInput, "continued fraction JSON needs 'tail'");
  std::string tail = j.at("tail").get<std::string>();
  std::vector<Integer> a = j.contains("a") ? ints(j.at("a")) : std::vector<Integer>{};
  if (tail == "ones") return ContinuedFraction::with_ones_tail(a);
  if (tail == "periodic") {
    if (!j.contains("block")) fail(ErrorKind::InvalidInput, "periodic tail needs 'block'");
    return ContinuedFraction::periodic(a, ints(j.at("block")));
  }
  if (tail == "sampled") {
    if (!j.contains("seed") || !j.at("seed").is_number_integer())
      fail(ErrorKind::InvalidInput, "sampled tail needs an integer seed");
    auto cf = ContinuedFraction::sampled(j.at("seed").get<std::uint64_t>(), a.size());
    if (cf.quotients() != a) fail(ErrorKind::InvalidInput, "sampled quotients do not match the seed");
    return cf;
  }
  fail(ErrorKind::InvalidInput, "unknown tail rule '" + tail + "'");
}

json to_json(const OstrowskiExpansion& e) {
  json j;
  j["N"] = e.N.get_str();
  j["K"] = e.K;
  json d = json::array();
  for (const auto& b : e.digits) d.push_back(b.get_str());
  j["digits"] = d;
  return j;
}

}  // namespace birkhoff::cf
