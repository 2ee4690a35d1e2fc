// Copyright (c) subreg-kit contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "subreg/problems.hpp"

namespace subreg {

/// Syntax error in a problem file; line and column are 1-based.
class ParseError : public InputError {
 public:
  ParseError(int line, int column, const std::string& msg)
      : InputError("line " + std::to_string(line) + ", column " +
                   std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

namespace detail {

// Variable families accepted inside one block. Offsets place each family in
// the field's argument vector.
struct VarScope {
  int x_count = 0;
  int u_count = 0;
  int q_count = 0;
  int dim() const { return x_count + u_count + q_count; }
};

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, int line, int col0, VarScope scope)
      : s_(text), line_(line), col0_(col0), scope_(scope) {}

  Polynomial parse() {
    Polynomial poly(scope_.dim());
    skip_ws();
    if (at_end()) fail("empty expression");
    bool first = true;
    while (!at_end()) {
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = (peek() == '-') ? -1.0 : 1.0;
        ++pos_;
        skip_ws();
      } else if (!first) {
        fail("expected '+' or '-' between terms");
      }
      parse_term(poly, sign);
      first = false;
      skip_ws();
    }
    return poly;
  }

 private:
  void parse_term(Polynomial& poly, double sign) {
    double coef = sign;
    std::vector<int> exps(scope_.dim(), 0);
    while (true) {
      skip_ws();
      if (at_end()) fail("expected a number or variable");
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        coef *= parse_number();
      } else if (c == 'x' || c == 'u' || c == 'q') {
        int var = parse_variable();
        int power = 1;
        skip_ws();
        if (!at_end() && peek() == '^') {
          ++pos_;
          skip_ws();
          power = parse_exponent();
        }
        exps[var] += power;
      } else {
        fail(std::string("unexpected character '") + c + "'");
      }
      skip_ws();
      if (!at_end() && peek() == '*') {
        ++pos_;
        continue;
      }
      break;
    }
    poly.add_term(coef, std::move(exps));
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) ||
                         peek() == '.')) {
      ++pos_;
    }
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (!at_end() && (peek() == '+' || peek() == '-')) ++pos_;
      if (at_end() || !std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = save;
      } else {
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
          ++pos_;
        }
      }
    }
    const std::string tok(s_.substr(start, pos_ - start));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      pos_ = start;
      fail("malformed number '" + tok + "'");
    }
    return v;
  }

  int parse_variable() {
    const std::size_t start = pos_;
    const char family = peek();
    ++pos_;
    int idx = 0;
    bool any = false;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      idx = idx * 10 + (peek() - '0');
      ++pos_;
      any = true;
    }
    if (!any || idx < 1) {
      pos_ = start;
      fail(std::string("malformed variable after '") + family + "'");
    }
    int count = 0;
    int offset = 0;
    if (family == 'x') {
      count = scope_.x_count;
    } else if (family == 'u') {
      count = scope_.u_count;
      offset = scope_.x_count;
    } else {
      count = scope_.q_count;
      offset = scope_.x_count + scope_.u_count;
    }
    if (idx > count) {
      pos_ = start;
      fail(std::string("variable ") + family + std::to_string(idx) +
           " is not available in this block");
    }
    return offset + idx - 1;
  }

  int parse_exponent() {
    const std::size_t start = pos_;
    int v = 0;
    bool any = false;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (peek() - '0');
      ++pos_;
      any = true;
      if (v > 64) {
        pos_ = start;
        fail("exponent too large");
      }
    }
    const bool trailing_junk =
        !at_end() && (std::isalpha(static_cast<unsigned char>(peek())) ||
                      peek() == '.' || peek() == '^');
    if (!any || trailing_junk) {
      pos_ = start;
      fail("malformed exponent: expected a non-negative integer");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_, col0_ + static_cast<int>(pos_), msg);
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) {
      ++pos_;
    }
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
  int col0_;
  VarScope scope_;
};

inline std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  std::size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (lead) *lead = b;
  return s.substr(b, e - b);
}

inline std::vector<double> parse_number_list(std::string_view text, int line,
                                             int col0) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::size_t lead = 0;
    std::string_view tok = trim(text.substr(pos, comma - pos), &lead);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(line, col0 + static_cast<int>(pos + lead) + 1,
                       "expected a decimal number");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Probes U = {v : G(v) <= 0} for a feasible point by damped Gauss-Newton on
/// the violation from a few deterministic starts. Returns the point found.
inline std::optional<Vec> find_admissible_control(const OcpProblem& ocp,
                                                  int attempts = 16,
                                                  std::uint64_t seed = 1) {
  if (ocp.k() == 0) return Vec::Zero(ocp.m);
  Rng rng(seed);
  for (int a = 0; a < attempts; ++a) {
    Vec v = a == 0 ? Vec::Zero(ocp.m) : Vec(rng.normal_vec(ocp.m) * a);
    for (int it = 0; it < 100; ++it) {
      auto [g, J] = eval_stack(ocp.control_constraints, v);
      Vec viol = g.cwiseMax(0.0);
      if (viol.maxCoeff() <= 0.0) return v;
      // Push violated constraints slightly past the boundary.
      Vec target = Vec::Zero(g.size());
      Mat Jv = J;
      for (Index i = 0; i < g.size(); ++i) {
        if (g(i) > 0) {
          target(i) = -(g(i) + 1e-9);
        } else {
          Jv.row(i).setZero();
        }
      }
      Vec step = Jv.completeOrthogonalDecomposition().solve(target);
      if (!step.allFinite() || step.norm() == 0.0) break;
      v += step;
    }
  }
  return std::nullopt;
}

/// Parses the text problem format.
///
///     class: nlp | mayer | ocp
///     dims: n[,m[,k]]
///     horizon: t0, t1            # mayer only, default 0, 1
///     objective: <expr>          # nlp: over x; mayer: phi0 over q
///     ineq: / eq:                # nlp over x; mayer over q
///     dynamics:                  # one line per state, over x and u
///     endpoint:                  # ocp cost over q = (x(0), x(1))
///     control_ineq:              # ocp, over u
///     solution:                  # optional: `name = v1, v2, ...`
///
/// Expressions are sums of terms `coef * var^pow * ...`; `#` starts a
/// comment.
inline ProblemDefinition parse_problem_file(std::string_view text) {
  using detail::trim;
  std::string cls_tag;
  std::vector<int> dims;
  int cls_line = 0;
  double t0 = 0.0, t1 = 1.0;

  struct Entry {
    std::string block;
    std::string text;
    int line;
    int col;
  };
  std::vector<Entry> entries;
  std::string block;
  ProblemDefinition def;
  std::vector<std::pair<std::string, std::pair<std::vector<double>, int>>>
      solution_entries;

  static const char* kBlocks[] = {"objective", "ineq",         "eq",
                                  "dynamics",  "endpoint",     "control_ineq",
                                  "solution"};

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (std::size_t hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    std::size_t lead = 0;
    std::string_view line = trim(raw, &lead);
    if (line.empty()) continue;

    // Header "key: rest"?
    std::size_t colon = line.find(':');
    std::string key;
    if (colon != std::string_view::npos) {
      key = std::string(trim(line.substr(0, colon)));
      bool ident = !key.empty();
      for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
          ident = false;
        }
      }
      if (!ident) key.clear();
    }
    std::size_t rest_lead = 0;
    std::string_view rest =
        key.empty() ? line : trim(line.substr(colon + 1), &rest_lead);
    const int rest_col = static_cast<int>(
        lead + (key.empty() ? 0 : colon + 1 + rest_lead));

    if (key == "class") {
      cls_tag = std::string(rest);
      cls_line = line_no;
      continue;
    }
    if (key == "dims") {
      for (double d : detail::parse_number_list(rest, line_no, rest_col)) {
        if (d != static_cast<int>(d) || d < 0) {
          throw ParseError(line_no, rest_col + 1, "dims must be integers");
        }
        dims.push_back(static_cast<int>(d));
      }
      continue;
    }
    if (key == "horizon") {
      auto h = detail::parse_number_list(rest, line_no, rest_col);
      if (h.size() != 2) {
        throw ParseError(line_no, rest_col + 1, "horizon needs t0, t1");
      }
      t0 = h[0];
      t1 = h[1];
      continue;
    }
    if (!key.empty()) {
      bool known = false;
      for (const char* b : kBlocks) known = known || key == b;
      if (!known) {
        throw ParseError(line_no, static_cast<int>(lead) + 1,
                         "unknown block '" + key + "'");
      }
      block = key;
      if (rest.empty()) continue;
    }
    if (block.empty()) {
      throw ParseError(line_no, static_cast<int>(lead) + 1,
                       "expression outside of any block");
    }
    if (block == "solution") {
      std::size_t eq = rest.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(line_no, rest_col + 1,
                         "solution entries have the form name = values");
      }
      std::string name(trim(rest.substr(0, eq)));
      solution_entries.push_back(
          {name,
           {detail::parse_number_list(rest.substr(eq + 1), line_no,
                                      rest_col + static_cast<int>(eq) + 1),
            line_no}});
      continue;
    }
    entries.push_back({block, std::string(rest), line_no, rest_col});
  }

  if (cls_tag.empty()) throw ParseError(1, 1, "missing 'class:' header");
  if (cls_tag == "nlp") {
    def.cls = ProblemClass::Nlp;
  } else if (cls_tag == "mayer") {
    def.cls = ProblemClass::Mayer;
  } else if (cls_tag == "ocp") {
    def.cls = ProblemClass::Ocp;
  } else {
    throw ParseError(cls_line, 1, "unknown class tag '" + cls_tag + "'");
  }
  const std::size_t want_dims =
      def.cls == ProblemClass::Nlp ? 1 : (def.cls == ProblemClass::Mayer ? 2 : 3);
  if (dims.size() != want_dims) {
    throw InputError(std::string("class ") + cls_tag + " expects " +
                     std::to_string(want_dims) + " dims entries");
  }
  for (int d : dims) {
    if (d <= 0) throw InputError("dims entries must be positive");
  }

  const int n = dims[0];
  const int m = dims.size() > 1 ? dims[1] : 0;
  auto scope_for = [&](const std::string& b) -> detail::VarScope {
    if (def.cls == ProblemClass::Nlp) return {n, 0, 0};
    if (b == "dynamics") return {n, m, 0};
    if (b == "control_ineq") return {0, m, 0};
    return {0, 0, 2 * n};
  };
  auto allowed = [&](const std::string& b) {
    switch (def.cls) {
      case ProblemClass::Nlp:
        return b == "objective" || b == "ineq" || b == "eq";
      case ProblemClass::Mayer:
        return b == "objective" || b == "ineq" || b == "eq" || b == "dynamics";
      case ProblemClass::Ocp:
        return b == "dynamics" || b == "endpoint" || b == "control_ineq";
    }
    return false;
  };

  std::vector<ScalarField> objective, ineq, eq, dynamics, endpoint, control;
  for (const auto& e : entries) {
    if (!allowed(e.block)) {
      throw ParseError(e.line, 1,
                       "block '" + e.block + "' not valid for class " + cls_tag);
    }
    detail::ExpressionParser parser(e.text, e.line, e.col + 1,
                                     scope_for(e.block));
    ScalarField field(parser.parse());
    if (e.block == "objective") objective.push_back(field);
    if (e.block == "ineq") ineq.push_back(field);
    if (e.block == "eq") eq.push_back(field);
    if (e.block == "dynamics") dynamics.push_back(field);
    if (e.block == "endpoint") endpoint.push_back(field);
    if (e.block == "control_ineq") control.push_back(field);
  }

  auto take_one = [](std::vector<ScalarField>& v, const char* what) {
    if (v.size() != 1) {
      throw InputError(std::string("expected exactly one ") + what +
                       " expression, found " + std::to_string(v.size()));
    }
    return v.front();
  };

  switch (def.cls) {
    case ProblemClass::Nlp: {
      NlpProblem p;
      p.n = n;
      p.objective = take_one(objective, "objective");
      p.inequalities = ineq;
      p.equalities = eq;
      p.validate();
      def.nlp = p;
      break;
    }
    case ProblemClass::Mayer: {
      MayerProblem p;
      p.n = n;
      p.m = m;
      p.dynamics = dynamics;
      p.endpoint_cost = take_one(objective, "objective");
      p.endpoint_equalities = eq;
      p.endpoint_inequalities = ineq;
      p.t0 = t0;
      p.t1 = t1;
      p.validate();
      def.mayer = p;
      break;
    }
    case ProblemClass::Ocp: {
      OcpProblem p;
      p.n = n;
      p.m = m;
      p.dynamics = dynamics;
      p.endpoint_cost = take_one(endpoint, "endpoint");
      p.control_constraints = control;
      require_dim(static_cast<Index>(control.size()), dims[2],
                  "control_ineq count vs dims");
      p.validate();
      if (!find_admissible_control(p)) {
        throw InputError("control set U = {G(v) <= 0} appears to be empty");
      }
      def.ocp = p;
      break;
    }
  }

  for (const auto& [name, payload] : solution_entries) {
    const auto& vals = payload.first;
    Vec v = Eigen::Map<const Vec>(vals.data(), static_cast<Index>(vals.size()));
    if (name == "x") {
      def.solution.x = v;
    } else if (name == "lambda") {
      def.solution.lambda = v.transpose();
    } else if (name == "ystar") {
      def.solution.ystar = v.transpose();
    } else if (name == "x0") {
      def.solution.x0 = v;
    } else if (name == "u") {
      def.solution.u = v;
    } else if (name == "alpha") {
      def.solution.alpha = v.transpose();
    } else if (name == "beta") {
      def.solution.beta = v.transpose();
    } else {
      throw ParseError(payload.second, 1, "unknown solution entry '" + name + "'");
    }
  }
  return def;
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string serialize_polynomial(const Polynomial& p, VarScope scope) {
  std::string out;
  bool first = true;
  for (const auto& t : p.terms()) {
    if (t.coef == 0.0) continue;
    std::string term = format_number(std::abs(t.coef));
    for (int k = 0; k < p.dim(); ++k) {
      const int e = t.exponents[k];
      if (e == 0) continue;
      std::string var;
      if (k < scope.x_count) {
        var = "x" + std::to_string(k + 1);
      } else if (k < scope.x_count + scope.u_count) {
        var = "u" + std::to_string(k - scope.x_count + 1);
      } else {
        var = "q" + std::to_string(k - scope.x_count - scope.u_count + 1);
      }
      term += " * " + var;
      if (e != 1) term += "^" + std::to_string(e);
    }
    const bool neg = std::signbit(t.coef);
    if (first) {
      out += (neg ? "-" : "") + term;
    } else {
      out += (neg ? " - " : " + ") + term;
    }
    first = false;
  }
  return first ? "0" : out;
}

inline const Polynomial& require_poly(const ScalarField& f) {
  if (!f.polynomial()) {
    throw InputError("only polynomial fields can be serialized");
  }
  return *f.polynomial();
}

inline std::string join_numbers(const Eigen::Ref<const Mat>& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_number(v.data()[i]);
  }
  return s;
}

}  // namespace detail

/// Inverse of parse_problem_file for polynomial-backed problems.
inline std::string serialize_problem(const ProblemDefinition& def) {
  using detail::require_poly;
  using detail::serialize_polynomial;
  std::ostringstream os;
  os << "class: " << to_string(def.cls) << "\n";
  auto emit_block = [&](const char* name, const std::vector<ScalarField>& fs,
                        detail::VarScope scope) {
    if (fs.empty()) return;
    os << name << ":\n";
    for (const auto& f : fs) {
      os << "  " << serialize_polynomial(require_poly(f), scope) << "\n";
    }
  };
  if (def.nlp) {
    const auto& p = *def.nlp;
    os << "dims: " << p.n << "\n";
    emit_block("objective", {p.objective}, {p.n, 0, 0});
    emit_block("ineq", p.inequalities, {p.n, 0, 0});
    emit_block("eq", p.equalities, {p.n, 0, 0});
  } else if (def.mayer) {
    const auto& p = *def.mayer;
    os << "dims: " << p.n << ", " << p.m << "\n";
    os << "horizon: " << detail::format_number(p.t0) << ", "
       << detail::format_number(p.t1) << "\n";
    emit_block("dynamics", p.dynamics, {p.n, p.m, 0});
    emit_block("objective", {p.endpoint_cost}, {0, 0, 2 * p.n});
    emit_block("eq", p.endpoint_equalities, {0, 0, 2 * p.n});
    emit_block("ineq", p.endpoint_inequalities, {0, 0, 2 * p.n});
  } else if (def.ocp) {
    const auto& p = *def.ocp;
    os << "dims: " << p.n << ", " << p.m << ", " << p.k() << "\n";
    emit_block("dynamics", p.dynamics, {p.n, p.m, 0});
    emit_block("endpoint", {p.endpoint_cost}, {0, 0, 2 * p.n});
    emit_block("control_ineq", p.control_constraints, {0, p.m, 0});
  } else {
    throw InputError("empty problem definition");
  }
  const auto& s = def.solution;
  if (s.x || s.lambda || s.ystar || s.x0 || s.u || s.alpha || s.beta) {
    os << "solution:\n";
    if (s.x) os << "  x = " << detail::join_numbers(*s.x) << "\n";
    if (s.lambda) os << "  lambda = " << detail::join_numbers(*s.lambda) << "\n";
    if (s.ystar) os << "  ystar = " << detail::join_numbers(*s.ystar) << "\n";
    if (s.x0) os << "  x0 = " << detail::join_numbers(*s.x0) << "\n";
    if (s.u) os << "  u = " << detail::join_numbers(*s.u) << "\n";
    if (s.alpha) os << "  alpha = " << detail::join_numbers(*s.alpha) << "\n";
    if (s.beta) os << "  beta = " << detail::join_numbers(*s.beta) << "\n";
  }
  return os.str();
}

}  // namespace subreg
