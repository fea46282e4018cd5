#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "birkhoff/numeric.hpp"

namespace birkhoff::rot {

// r + l2 * log 2, used for exact means of log functions.
struct ExactReal {
  Rational r = 0;
  Rational l2 = 0;

  ExactReal operator+(const ExactReal& o) const { return {r + o.r, l2 + o.l2}; }
  ExactReal operator-(const ExactReal& o) const { return {r - o.r, l2 - o.l2}; }
  ExactReal operator-() const { return {-r, -l2}; }
  bool operator==(const ExactReal& o) const { return r == o.r && l2 == o.l2; }
  Interval enclose(unsigned bits) const;
  double approx() const;
  std::string to_string() const;
};

struct Jump {
  Rational x;  // in [0, 1)
  Rational A;  // f(x-) - f(x+)
};

// f(x) = sawtooth * ({x} - 1/2) + sum_i A_i (1_[0,x_i)({x}) - x_i) + offset
// The step jumps sit at x_i in (0, 1); the jump at 0 is implied and equals sawtooth - sum_i A_i.
// Values at the jump points follow the half-open convention; orbits of irrational rotations never
// land there.
struct JumpFunctionSpec {
  std::vector<Jump> jumps;
  Rational sawtooth = 0;
  Rational offset = 0;
};

// Full discontinuity data of a jump function, sorted, including the point 0 when the jump there
// is nonzero.
struct StepDecomposition {
  std::vector<Rational> points;          // x_1 < ... < x_nu
  std::vector<Rational> A;               // total jump at each point
  std::vector<Rational> partial_sums;    // c_i = sum_{j<=i} A_j
  std::vector<Rational> interval_weights;  // w_j = sum_{i>=j} A_i, weight of [x_{j-1}, x_j)
  Rational sum_A = 0;
  Rational drift = 0;                    // sum_j w_j (x_j - x_{j-1}) = sum_i A_i x_i
  Integer denominator_lcm = 1;           // lcm of the denominators of the points
};

enum class Clause { SumA, Drift, Degenerate };
const char* to_string(Clause c);

// f(x) = c1 log||x - x1|| + c2 log{x - x1} + t(x) + constant
struct LogFunctionSpec {
  Rational x1 = 0;
  Rational c1 = 0;  // symmetric part
  Rational c2 = 0;  // asymmetric part
  std::optional<JumpFunctionSpec> t;
  ExactReal constant;
};

using FunctionBody = std::variant<JumpFunctionSpec, LogFunctionSpec>;

struct Function {
  FunctionBody body;
  std::string name;

  bool is_step() const { return std::holds_alternative<JumpFunctionSpec>(body); }
  const JumpFunctionSpec& step() const;
  const LogFunctionSpec& log() const;
};

Function builtin(const std::string& name, const std::vector<Rational>& params = {});
// "sawtooth", "indicator(1/4,1/2)", "log_asym(1/3,0,1)", ...
Function parse_function(const std::string& text);

StepDecomposition decompose(const JumpFunctionSpec& f);
StepDecomposition decompose(const Function& f);
Clause nondegenerate(const StepDecomposition& d);
// total variation over one period
Rational total_variation(const JumpFunctionSpec& f);
Rational total_variation(const Function& f);
ExactReal mean(const Function& f);
Rational mean(const JumpFunctionSpec& f);

Rational evaluate(const JumpFunctionSpec& f, const Rational& x);
CertifiedValue evaluate(const Function& f, const Rational& x);
// g(x) from the decomposition, for checking the identity against f
Rational evaluate(const StepDecomposition& d, const Rational& x);

// f(. + y)
JumpFunctionSpec shifted(const JumpFunctionSpec& f, const Rational& y);
JumpFunctionSpec from_jumps(const std::vector<Jump>& all_jumps, const Rational& sawtooth, const Rational& offset);

// The step part of f sorted by x, with the weight table used by evaluators:
// value on the cell {x_{c-1} <= frac < x_c} equals cell_value[c] (c = 0..n).
struct StepTable {
  std::vector<Rational> cuts;        // sorted x_i in (0, 1)
  std::vector<double> cuts_d;
  std::vector<Rational> cell_value;  // sum_{i >= c} A_i - sum_i A_i x_i
  Rational sawtooth = 0;
  Rational offset = 0;
};
StepTable step_table(const JumpFunctionSpec& f);

nlohmann::json to_json(const Function& f);
nlohmann::json to_json(const StepDecomposition& d);
Function function_from_json(const nlohmann::json& j);

}  // namespace birkhoff::rot
