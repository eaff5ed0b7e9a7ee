#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ftrv/environment.hpp"
#include "ftrv/error.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

// Objective language
//
//   objective := summand ('+' summand)*
//   summand   := [NUMBER '*'] 'max' '{' expr (',' expr)* '}'
//              | [NUMBER '*'] 'max' '{' expr 'for' IDENT 'in' nodeset '}'
//   nodeset   := 'V' | '{' NAME (',' NAME)* '}'
//   expr      := term (('+' | '-') term)*
//   term      := unary (('*' | '/') unary)*
//   unary     := '-' unary | power
//   power     := primary ['^' ['-'] NUMBER]
//   primary   := NUMBER | ET '(' NAME ',' INT ')' | VT '(' NAME ',' INT ')'
//              | sqrt '(' expr ')' | pow '(' expr ',' ['-'] NUMBER ')' | '(' expr ')'

enum class AtomKind { ET, VT };

/// Atom as written: the vertex may still be a bound variable.
struct AtomRef {
  AtomKind kind = AtomKind::ET;
  std::string vertex;
  int faults = 0;

  friend bool operator==(const AtomRef&, const AtomRef&) = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Op { number, atom, add, sub, mul, div, neg, sqrt, pow };

  Op op = Op::number;
  double value = 0.0;  // literal, or exponent for pow
  AtomRef atom;
  int atom_id = -1;  // index into CompiledObjective::atoms once compiled
  ExprPtr lhs;
  ExprPtr rhs;

  static ExprPtr number(double v) { return std::make_shared<const Expr>(Expr{Op::number, v, {}, -1, {}, {}}); }
  static ExprPtr make_atom(AtomKind kind, std::string vertex, int faults) {
    return std::make_shared<const Expr>(Expr{Op::atom, 0.0, {kind, std::move(vertex), faults}, -1, {}, {}});
  }
  static ExprPtr binary(Op op, ExprPtr a, ExprPtr b) {
    return std::make_shared<const Expr>(Expr{op, 0.0, {}, -1, std::move(a), std::move(b)});
  }
  static ExprPtr unary(Op op, ExprPtr a, double value = 0.0) {
    return std::make_shared<const Expr>(Expr{op, value, {}, -1, std::move(a), {}});
  }
};

inline bool equal(const Expr& a, const Expr& b) {
  if (a.op != b.op || a.value != b.value || a.atom != b.atom) return false;
  auto same = [](const ExprPtr& x, const ExprPtr& y) { return (!x && !y) || (x && y && equal(*x, *y)); };
  return same(a.lhs, b.lhs) && same(a.rhs, b.rhs);
}

struct NodeSet {
  bool all = true;  // 'V'
  std::vector<std::string> names;

  friend bool operator==(const NodeSet&, const NodeSet&) = default;
};

struct Binder {
  std::string variable;
  NodeSet nodes;

  friend bool operator==(const Binder&, const Binder&) = default;
};

/// weight * max{terms}. With a binder, `terms` holds a single template that is
/// instantiated once per node of the set.
struct Summand {
  double weight = 1.0;
  std::vector<ExprPtr> terms;
  std::optional<Binder> binder;

  friend bool operator==(const Summand& a, const Summand& b) {
    if (a.weight != b.weight || a.binder != b.binder || a.terms.size() != b.terms.size()) return false;
    for (std::size_t i = 0; i < a.terms.size(); ++i)
      if (!equal(*a.terms[i], *b.terms[i])) return false;
    return true;
  }
};

struct ObjectiveAst {
  std::vector<Summand> summands;

  friend bool operator==(const ObjectiveAst&, const ObjectiveAst&) = default;
};

// --- printing ----------------------------------------------------------------

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view atom_kind_name(AtomKind k) { return k == AtomKind::ET ? "ET" : "VT"; }

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.op) {
    case Expr::Op::add:
    case Expr::Op::sub: return 1;
    case Expr::Op::mul:
    case Expr::Op::div: return 2;
    case Expr::Op::neg: return 3;
    case Expr::Op::pow: return 4;
    default: return 5;
  }
}

inline void print_expr(const Expr& e, std::string& out);

inline void print_child(const Expr& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print_expr(child, out);
    out += ')';
  } else {
    print_expr(child, out);
  }
}

inline void print_expr(const Expr& e, std::string& out) {
  using Op = Expr::Op;
  switch (e.op) {
    case Op::number: out += format_number(e.value); break;
    case Op::atom:
      out += atom_kind_name(e.atom.kind);
      out += "(" + e.atom.vertex + "," + std::to_string(e.atom.faults) + ")";
      break;
    case Op::add:
    case Op::sub:
      print_child(*e.lhs, 1, out);
      out += e.op == Op::add ? " + " : " - ";
      print_child(*e.rhs, 2, out);
      break;
    case Op::mul:
    case Op::div:
      print_child(*e.lhs, 2, out);
      out += e.op == Op::mul ? "*" : "/";
      print_child(*e.rhs, 3, out);
      break;
    case Op::neg:
      out += '-';
      print_child(*e.lhs, 3, out);
      break;
    case Op::sqrt:
      out += "sqrt(";
      print_expr(*e.lhs, out);
      out += ')';
      break;
    case Op::pow:
      print_child(*e.lhs, 5, out);
      out += "^" + format_number(e.value);
      break;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_expr(e, out);
  return out;
}

inline std::string to_string(const ObjectiveAst& ast) {
  std::string out;
  for (std::size_t i = 0; i < ast.summands.size(); ++i) {
    const auto& s = ast.summands[i];
    if (i) out += " + ";
    if (s.weight != 1.0) out += format_number(s.weight) + "*";
    out += "max{";
    for (std::size_t t = 0; t < s.terms.size(); ++t) {
      if (t) out += ", ";
      out += to_string(*s.terms[t]);
    }
    if (s.binder) {
      out += " for " + s.binder->variable + " in ";
      if (s.binder->nodes.all) {
        out += "V";
      } else {
        out += "{";
        for (std::size_t k = 0; k < s.binder->nodes.names.size(); ++k) {
          if (k) out += ",";
          out += s.binder->nodes.names[k];
        }
        out += "}";
      }
    }
    out += "}";
  }
  return out;
}

// --- parsing -----------------------------------------------------------------

namespace detail {

struct Token {
  enum class Kind { number, ident, punct, end };
  Kind kind;
  std::string text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_ident_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t col = i + 1;
    if ((c >= '0' && c <= '9') || (c == '.' && i + 1 < src.size() && src[i + 1] >= '0' && src[i + 1] <= '9')) {
      std::size_t j = i;
      while (j < src.size() && ((src[j] >= '0' && src[j] <= '9') || src[j] == '.')) ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && src[k] >= '0' && src[k] <= '9') {
          j = k;
          while (j < src.size() && src[j] >= '0' && src[j] <= '9') ++j;
        }
      }
      // Names like "3a" are not numbers; keep them as identifiers.
      if (j < src.size() && is_ident_char(src[j])) {
        while (j < src.size() && is_ident_char(src[j])) ++j;
        out.push_back({Token::Kind::ident, std::string(src.substr(i, j - i)), col});
      } else {
        out.push_back({Token::Kind::number, std::string(src.substr(i, j - i)), col});
      }
      i = j;
    } else if (is_ident_char(c)) {
      std::size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      out.push_back({Token::Kind::ident, std::string(src.substr(i, j - i)), col});
      i = j;
    } else if (std::string_view("{}(),+-*/^").find(c) != std::string_view::npos) {
      out.push_back({Token::Kind::punct, std::string(1, c), col});
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", 1, col);
    }
  }
  out.push_back({Token::Kind::end, "", src.size() + 1});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  ObjectiveAst objective() {
    ObjectiveAst ast;
    ast.summands.push_back(summand());
    while (accept("+")) ast.summands.push_back(summand());
    if (peek().kind != Token::Kind::end) fail("unexpected '" + peek().text + "'");
    return ast;
  }

  ExprPtr standalone_expr() {
    auto e = expr();
    if (peek().kind != Token::Kind::end) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, 1, peek().column); }

  bool accept(std::string_view punct_or_kw) {
    const auto& t = peek();
    if ((t.kind == Token::Kind::punct || t.kind == Token::Kind::ident) && t.text == punct_or_kw) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(std::string_view what) {
    if (!accept(what)) {
      const auto& t = peek();
      fail("expected '" + std::string(what) + "' but found " +
           (t.kind == Token::Kind::end ? std::string("end of input") : "'" + t.text + "'"));
    }
  }

  double number_literal() {
    const auto& t = peek();
    if (t.kind != Token::Kind::number) fail("expected a number");
    double v = 0.0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) fail("malformed number '" + t.text + "'");
    ++pos_;
    return v;
  }

  double signed_number() {
    const bool neg = accept("-");
    const double v = number_literal();
    return neg ? -v : v;
  }

  Summand summand() {
    Summand s;
    if (peek().kind == Token::Kind::number) {
      const auto col = peek().column;
      s.weight = number_literal();
      if (!(s.weight > 0.0) || !std::isfinite(s.weight))
        throw ParseError("summand weight must be positive", 1, col);
      expect("*");
    }
    expect("max");
    expect("{");
    s.terms.push_back(expr());
    if (accept("for")) {
      Binder b;
      if (peek().kind != Token::Kind::ident) fail("expected a variable name after 'for'");
      b.variable = next().text;
      expect("in");
      if (accept("V")) {
        b.nodes.all = true;
      } else {
        expect("{");
        b.nodes.all = false;
        b.nodes.names.push_back(node_name());
        while (accept(",")) b.nodes.names.push_back(node_name());
        expect("}");
      }
      s.binder = std::move(b);
    } else {
      while (accept(",")) s.terms.push_back(expr());
    }
    expect("}");
    return s;
  }

  std::string node_name() {
    const auto& t = peek();
    if (t.kind != Token::Kind::ident && t.kind != Token::Kind::number) fail("expected a node name");
    ++pos_;
    return t.text;
  }

  ExprPtr expr() {
    auto lhs = term();
    while (true) {
      if (accept("+"))
        lhs = Expr::binary(Expr::Op::add, lhs, term());
      else if (accept("-"))
        lhs = Expr::binary(Expr::Op::sub, lhs, term());
      else
        break;
    }
    return lhs;
  }

  ExprPtr term() {
    auto lhs = unary();
    while (true) {
      if (accept("*"))
        lhs = Expr::binary(Expr::Op::mul, lhs, unary());
      else if (accept("/"))
        lhs = Expr::binary(Expr::Op::div, lhs, unary());
      else
        break;
    }
    return lhs;
  }

  ExprPtr unary() {
    if (accept("-")) return Expr::unary(Expr::Op::neg, unary());
    auto base = primary();
    if (accept("^")) return Expr::unary(Expr::Op::pow, base, signed_number());
    return base;
  }

  ExprPtr primary() {
    const auto& t = peek();
    if (t.kind == Token::Kind::number) return Expr::number(number_literal());
    if (accept("(")) {
      auto e = expr();
      expect(")");
      return e;
    }
    if (t.kind != Token::Kind::ident) fail(t.kind == Token::Kind::end ? "unexpected end of input" : "unexpected '" + t.text + "'");
    const std::string name = t.text;
    const auto col = t.column;
    ++pos_;
    if (name == "ET" || name == "VT") {
      expect("(");
      auto vertex = node_name();
      expect(",");
      const auto& ft = peek();
      if (ft.kind != Token::Kind::number || ft.text.find_first_not_of("0123456789") != std::string::npos)
        fail("fault count must be a non-negative integer");
      int faults = 0;
      std::from_chars(ft.text.data(), ft.text.data() + ft.text.size(), faults);
      ++pos_;
      expect(")");
      return Expr::make_atom(name == "ET" ? AtomKind::ET : AtomKind::VT, std::move(vertex), faults);
    }
    if (name == "sqrt") {
      expect("(");
      auto e = expr();
      expect(")");
      return Expr::unary(Expr::Op::sqrt, e);
    }
    if (name == "pow") {
      expect("(");
      auto e = expr();
      expect(",");
      const double p = signed_number();
      expect(")");
      return Expr::unary(Expr::Op::pow, e, p);
    }
    if (peek().text == "(") throw ParseError("unknown function '" + name + "'", 1, col);
    throw ParseError("unexpected identifier '" + name + "'", 1, col);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ObjectiveAst parse_objective(std::string_view text) { return detail::Parser(text).objective(); }

inline ExprPtr parse_expr(std::string_view text) { return detail::Parser(text).standalone_expr(); }

// --- validation and compilation ----------------------------------------------

/// Atom with its vertex resolved against an environment.
struct Atom {
  AtomKind kind = AtomKind::ET;
  VertexId vertex = 0;
  int faults = 0;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

inline std::string atom_label(const Atom& a, const Environment& env) {
  return std::string(atom_kind_name(a.kind)) + "(" + env.name(a.vertex) + "," + std::to_string(a.faults) + ")";
}

struct CompiledTerm {
  ExprPtr expr;                  // atoms carry atom_id
  std::vector<int> fault_levels;  // distinct fault counts used, ascending
  std::string label;
};

struct CompiledSummand {
  double weight = 1.0;
  std::vector<CompiledTerm> terms;
};

/// Objective with node sets expanded and atoms deduplicated into `atoms`.
struct CompiledObjective {
  std::vector<Atom> atoms;
  std::vector<CompiledSummand> summands;
  int agents = 1;
};

namespace detail {

inline ExprPtr resolve(const ExprPtr& e, const std::string* var, const std::string& value, const Environment& env,
                       const SolutionSpec& spec, std::vector<Atom>& atoms, std::map<Atom, int>& index) {
  using Op = Expr::Op;
  switch (e->op) {
    case Op::number: return e;
    case Op::atom: {
      const std::string& name = (var && e->atom.vertex == *var) ? value : e->atom.vertex;
      auto v = env.find(name);
      if (!v) throw ValidationError("unknown vertex '" + name + "' in objective");
      if (e->atom.faults >= spec.agents)
        throw ValidationError("fault count " + std::to_string(e->atom.faults) + " must be below the agent count " +
                              std::to_string(spec.agents));
      Atom a{e->atom.kind, *v, e->atom.faults};
      auto [it, fresh] = index.emplace(a, static_cast<int>(atoms.size()));
      if (fresh) atoms.push_back(a);
      Expr copy = *e;
      copy.atom.vertex = name;
      copy.atom_id = it->second;
      return std::make_shared<const Expr>(std::move(copy));
    }
    default: {
      Expr copy = *e;
      if (copy.lhs) copy.lhs = resolve(copy.lhs, var, value, env, spec, atoms, index);
      if (copy.rhs) copy.rhs = resolve(copy.rhs, var, value, env, spec, atoms, index);
      return std::make_shared<const Expr>(std::move(copy));
    }
  }
}

inline void collect_faults(const Expr& e, std::set<int>& out) {
  if (e.op == Expr::Op::atom) out.insert(e.atom.faults);
  if (e.lhs) collect_faults(*e.lhs, out);
  if (e.rhs) collect_faults(*e.rhs, out);
}

}  // namespace detail

/// Expands node sets, resolves vertices and checks fault counts.
inline CompiledObjective compile(const ObjectiveAst& ast, const Environment& env, const SolutionSpec& spec) {
  CompiledObjective out;
  out.agents = spec.agents;
  if (ast.summands.empty()) throw ValidationError("objective has no summands");
  std::map<Atom, int> index;
  for (const auto& s : ast.summands) {
    if (!(s.weight > 0.0)) throw ValidationError("summand weight must be positive");
    if (s.terms.empty()) throw ValidationError("summand has an empty term set");
    CompiledSummand cs{s.weight, {}};
    auto add_term = [&](const ExprPtr& tmpl, const std::string* var, const std::string& value) {
      CompiledTerm t;
      t.expr = detail::resolve(tmpl, var, value, env, spec, out.atoms, index);
      std::set<int> levels;
      detail::collect_faults(*t.expr, levels);
      t.fault_levels.assign(levels.begin(), levels.end());
      t.label = to_string(*t.expr);
      cs.terms.push_back(std::move(t));
    };
    if (s.binder) {
      const auto& nodes = s.binder->nodes;
      std::vector<std::string> names = nodes.all ? env.names() : nodes.names;
      if (names.empty()) throw ValidationError("empty node set");
      for (const auto& name : names) {
        if (!env.find(name)) throw ValidationError("unknown vertex '" + name + "' in node set");
        for (const auto& tmpl : s.terms) add_term(tmpl, &s.binder->variable, name);
      }
    } else {
      for (const auto& tmpl : s.terms) add_term(tmpl, nullptr, {});
    }
    out.summands.push_back(std::move(cs));
  }
  return out;
}

/// Deduplicated atoms of the objective, in order of first occurrence.
inline std::vector<Atom> validate(const ObjectiveAst& ast, const Environment& env, const SolutionSpec& spec) {
  return compile(ast, env, spec).atoms;
}

// --- term evaluation ---------------------------------------------------------

inline constexpr double kSqrtFloor = 1e-12;

/// Value of a compiled term given the atom values (indexed by atom_id).
inline double evaluate(const Expr& e, std::span<const double> atoms) {
  using Op = Expr::Op;
  switch (e.op) {
    case Op::number: return e.value;
    case Op::atom: return atoms[e.atom_id];
    case Op::add: return evaluate(*e.lhs, atoms) + evaluate(*e.rhs, atoms);
    case Op::sub: return evaluate(*e.lhs, atoms) - evaluate(*e.rhs, atoms);
    case Op::mul: return evaluate(*e.lhs, atoms) * evaluate(*e.rhs, atoms);
    case Op::div: {
      const double den = evaluate(*e.rhs, atoms);
      if (den == 0.0) throw NumericalError("division by zero in term " + to_string(e));
      return evaluate(*e.lhs, atoms) / den;
    }
    case Op::neg: return -evaluate(*e.lhs, atoms);
    case Op::sqrt: return std::sqrt(std::max(evaluate(*e.lhs, atoms), 0.0));
    case Op::pow: return std::pow(evaluate(*e.lhs, atoms), e.value);
  }
  return 0.0;
}

/// Accumulates seed * d(term)/d(atom) into `grads`.
inline void backprop(const Expr& e, std::span<const double> atoms, double seed, std::span<double> grads) {
  using Op = Expr::Op;
  switch (e.op) {
    case Op::number: return;
    case Op::atom: grads[e.atom_id] += seed; return;
    case Op::add:
      backprop(*e.lhs, atoms, seed, grads);
      backprop(*e.rhs, atoms, seed, grads);
      return;
    case Op::sub:
      backprop(*e.lhs, atoms, seed, grads);
      backprop(*e.rhs, atoms, -seed, grads);
      return;
    case Op::mul: {
      const double a = evaluate(*e.lhs, atoms);
      const double b = evaluate(*e.rhs, atoms);
      backprop(*e.lhs, atoms, seed * b, grads);
      backprop(*e.rhs, atoms, seed * a, grads);
      return;
    }
    case Op::div: {
      const double a = evaluate(*e.lhs, atoms);
      const double b = evaluate(*e.rhs, atoms);
      backprop(*e.lhs, atoms, seed / b, grads);
      backprop(*e.rhs, atoms, -seed * a / (b * b), grads);
      return;
    }
    case Op::neg: backprop(*e.lhs, atoms, -seed, grads); return;
    case Op::sqrt: {
      const double x = evaluate(*e.lhs, atoms);
      backprop(*e.lhs, atoms, seed * 0.5 / std::sqrt(std::max(x, kSqrtFloor)), grads);
      return;
    }
    case Op::pow: {
      const double x = evaluate(*e.lhs, atoms);
      backprop(*e.lhs, atoms, seed * e.value * std::pow(x, e.value - 1.0), grads);
      return;
    }
  }
}

// --- standard encodings ------------------------------------------------------

namespace detail {
inline Summand binder_summand(double weight, ExprPtr tmpl) {
  return {weight, {std::move(tmpl)}, Binder{"v", NodeSet{true, {}}}};
}
}  // namespace detail

/// max{ET(v,0)} + alpha * max{VT(v,0)}: idleness with a determinism penalty.
inline ObjectiveAst encode_idleness(double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("idleness weight must be positive");
  ObjectiveAst ast;
  ast.summands.push_back(detail::binder_summand(1.0, Expr::make_atom(AtomKind::ET, "v", 0)));
  ast.summands.push_back(detail::binder_summand(alpha, Expr::make_atom(AtomKind::VT, "v", 0)));
  return ast;
}

/// max{w_v * (ET(v,0) + 1)}: worst weighted discovery time of an attack.
inline ObjectiveAst encode_patrolling(const std::vector<std::pair<std::string, double>>& weights) {
  if (weights.empty()) throw ValidationError("patrolling needs at least one weighted vertex");
  Summand s;
  for (const auto& [vertex, w] : weights) {
    if (!(w > 0.0)) throw ValidationError("vulnerability weight of '" + vertex + "' must be positive");
    auto inner = Expr::binary(Expr::Op::add, Expr::make_atom(AtomKind::ET, vertex, 0), Expr::number(1.0));
    s.terms.push_back(Expr::binary(Expr::Op::mul, Expr::number(w), inner));
  }
  return {{std::move(s)}};
}

/// Text of the benchmark objective family
///   max{ET(v,0) + kappa*sqrt(VT(v,0))} + alpha * max{ET(v,1) + kappa*sqrt(VT(v,1))}
/// over `targets` (all vertices when empty). Zero kappa / alpha parts are omitted.
inline std::string standard_objective(double kappa, double alpha, const std::vector<std::string>& targets = {}) {
  std::string set = "V";
  if (!targets.empty()) {
    set = "{";
    for (std::size_t i = 0; i < targets.size(); ++i) set += (i ? "," : "") + targets[i];
    set += "}";
  }
  auto part = [&](int f) {
    std::string t = "ET(v," + std::to_string(f) + ")";
    if (kappa > 0.0) t += " + " + format_number(kappa) + "*sqrt(VT(v," + std::to_string(f) + "))";
    return "max{" + t + " for v in " + set + "}";
  };
  std::string out = part(0);
  if (alpha > 0.0) out += " + " + format_number(alpha) + "*" + part(1);
  return out;
}

}  // namespace ftrv
