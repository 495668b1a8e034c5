#pragma once

// Reference property table: formulas in n, evaluated exactly.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncframe/core_model.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe {

class FormulaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact rational used by the formula evaluator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t n, std::int64_t d) {
    if (d == 0) throw FormulaError("division by zero");
    if (d < 0) n = -n, d = -d;
    auto g = std::gcd(n < 0 ? -n : n, d);
    if (g == 0) g = 1;
    return {n / g, d / g};
  }
  Rational operator+(Rational o) const { return make(num * o.den + o.num * den, den * o.den); }
  Rational operator-(Rational o) const { return make(num * o.den - o.num * den, den * o.den); }
  Rational operator*(Rational o) const { return make(num * o.num, den * o.den); }
  Rational operator/(Rational o) const { return make(num * o.den, den * o.num); }
  std::int64_t floor() const { return num >= 0 ? num / den : -((-num + den - 1) / den); }
  std::int64_t ceil() const { return -Rational{-num, den}.floor(); }
  bool operator==(const Rational&) const = default;
};

/// Recursive-descent evaluator for integers, decimals, `n`, + - * /,
/// parentheses, floor() and ceil().
class Formula {
 public:
  static Rational eval(const std::string& text, int n) {
    Formula f(text, n);
    Rational r = f.expr();
    f.skip();
    if (f.pos_ != f.text_.size()) throw FormulaError("trailing input in formula: " + text);
    return r;
  }

 private:
  Formula(const std::string& text, int n) : text_(text), n_(n) {}

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool eat_word(const std::string& w) {
    skip();
    if (text_.compare(pos_, w.size(), w) == 0) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  Rational expr() {
    Rational v = term();
    for (;;) {
      if (eat('+')) v = v + term();
      else if (eat('-')) v = v - term();
      else return v;
    }
  }
  Rational term() {
    Rational v = factor();
    for (;;) {
      if (eat('*')) v = v * factor();
      else if (eat('/')) v = v / factor();
      else return v;
    }
  }
  Rational factor() {
    if (eat('-')) return Rational{0, 1} - factor();
    if (eat('(')) {
      Rational v = expr();
      if (!eat(')')) throw FormulaError("missing ')' in formula: " + text_);
      return v;
    }
    if (eat_word("floor")) return Rational{call().floor(), 1};
    if (eat_word("ceil")) return Rational{call().ceil(), 1};
    if (eat('n')) return Rational{n_, 1};
    skip();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) throw FormulaError("unexpected input in formula: " + text_);
    Rational v{std::stoll(text_.substr(start, pos_ - start)), 1};
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      std::int64_t scale = 1, frac = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        frac = frac * 10 + (text_[pos_++] - '0');
        scale *= 10;
      }
      v = v + Rational::make(frac, scale);
    }
    return v;
  }
  Rational call() {
    if (!eat('(')) throw FormulaError("expected '(' in formula: " + text_);
    Rational v = expr();
    if (!eat(')')) throw FormulaError("missing ')' in formula: " + text_);
    return v;
  }

  const std::string& text_;
  int n_;
  std::size_t pos_ = 0;
};

inline std::int64_t eval_int(const std::string& formula, int n) {
  Rational r = Formula::eval(formula, n);
  if (r.den != 1) throw FormulaError("formula is not an integer at n=" + std::to_string(n) + ": " + formula);
  return r.num;
}

inline RoundTrips eval_rtts(const std::string& formula, int n) {
  Rational r = Formula::eval(formula, n) * Rational{2, 1};
  if (r.den != 1) throw FormulaError("latency is not a multiple of 0.5: " + formula);
  return RoundTrips::from_halves(static_cast<int>(r.num));
}

/// "[lo,hi]" or a single formula.
inline LoadingRange eval_loading(const std::string& formula, int n) {
  if (!formula.empty() && formula.front() == '[' && formula.back() == ']') {
    auto comma = formula.find(',');
    if (comma == std::string::npos) throw FormulaError("range needs two bounds: " + formula);
    return {static_cast<int>(eval_int(formula.substr(1, comma - 1), n)),
            static_cast<int>(eval_int(formula.substr(comma + 1, formula.size() - comma - 2), n))};
  }
  int v = static_cast<int>(eval_int(formula, n));
  return {v, v};
}

struct GoldenRow {
  Consistency consistency = Consistency::Linearizable;
  /// Symbol the reference table prints in the consistency column.
  std::string consistency_symbol;
  std::string writing_freedom;
  std::map<std::string, std::string> latency;
  std::map<std::string, std::string> loading;
  std::string fault_tolerance;
};

class GoldenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reference rows keyed by mechanism, read from a `syncframe.golden/1`
/// document.
class GoldenTable {
 public:
  static GoldenTable parse(const std::string& text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw GoldenError(std::string("golden table is not valid JSON: ") + e.what());
    }
    if (doc.value("schema", "") != "syncframe.golden/1") throw GoldenError("golden table has unknown schema");
    GoldenTable t;
    try {
      for (const auto& [name, row] : doc.at("mechanisms").items()) {
        auto kind = mechanism_from_string(name);
        if (!kind) throw GoldenError("golden table names unknown mechanism " + name);
        GoldenRow r;
        auto c = consistency_from_string(row.at("consistency").get<std::string>());
        if (!c) throw GoldenError("bad consistency for " + name);
        r.consistency = *c;
        r.consistency_symbol = row.value("consistency_symbol", "");
        r.writing_freedom = row.at("writing_freedom").get<std::string>();
        r.latency = row.at("latency").get<std::map<std::string, std::string>>();
        r.loading = row.at("loading").get<std::map<std::string, std::string>>();
        r.fault_tolerance = row.at("fault_tolerance").get<std::string>();
        t.rows_[*kind] = std::move(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw GoldenError(std::string("malformed golden table: ") + e.what());
    }
    return t;
  }

  static GoldenTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GoldenError("cannot read golden table " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(MechanismKind kind) const { return rows_.contains(kind); }

  const GoldenRow& row(MechanismKind kind) const {
    auto it = rows_.find(kind);
    if (it == rows_.end()) throw GoldenError("no reference row for " + to_string(kind));
    return it->second;
  }

  MechanismProfile profile(MechanismKind kind, int n) const {
    const GoldenRow& r = row(kind);
    MechanismProfile p;
    p.consistency = r.consistency;
    p.writing_freedom = static_cast<int>(eval_int(r.writing_freedom, n));
    for (const auto& [c, f] : r.latency) p.latency_rtt[c] = eval_rtts(f, n);
    for (const auto& [c, f] : r.loading) p.loading[c] = eval_loading(f, n);
    p.fault_tolerance = static_cast<int>(eval_int(r.fault_tolerance, n));
    return p;
  }

 private:
  std::map<MechanismKind, GoldenRow> rows_;
};

}  // namespace syncframe
