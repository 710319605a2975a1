#pragma once

// One line of experiment output and its CSV form. Missing values are
// written as NA and infinite delays as INF; cells are never empty.

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aloha/errors.hpp"
#include "aloha/harness/experiment.hpp"
#include "aloha/policy.hpp"

namespace aloha::harness {

// A numeric cell: absent (NA), infinite (INF) or a finite value.
class Cell {
public:
  static Cell na() { return Cell(Kind::Missing, 0.0); }
  static Cell inf() { return Cell(Kind::Infinite, 0.0); }
  static Cell of(double v) {
    if (std::isinf(v)) return inf();
    if (std::isnan(v)) return na();
    return Cell(Kind::Finite, v);
  }
  static Cell of(const std::optional<double> &v) { return v ? of(*v) : na(); }

  bool is_na() const noexcept { return kind_ == Kind::Missing; }
  bool is_inf() const noexcept { return kind_ == Kind::Infinite; }
  bool is_finite() const noexcept { return kind_ == Kind::Finite; }
  double value() const {
    if (!is_finite()) throw DomainError("cell holds no finite value");
    return value_;
  }

  // Shortest text that reads back to the same double.
  std::string str() const {
    if (is_na()) return "NA";
    if (is_inf()) return "INF";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value_);
    return std::string(buf, ptr);
  }

  static Cell parse(std::string_view text) {
    if (text == "NA") return na();
    if (text == "INF") return inf();
    return of(detail::parse_number<double>(text, "CSV cell"));
  }

  bool operator==(const Cell &o) const noexcept {
    return kind_ == o.kind_ && (kind_ != Kind::Finite || value_ == o.value_);
  }

private:
  enum class Kind { Missing, Infinite, Finite };
  Cell(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

struct ResultRow {
  double lambda_hat = 0.0;
  int n = 0;
  CutoffPhase k = CutoffPhase::finite(1);
  BackoffModel model = BackoffModel::Probability;
  double q = 0.0;
  Cell ex_analytic = Cell::na();
  Cell et_analytic = Cell::na();
  Cell ex_sim = Cell::na();
  Cell et_sim = Cell::na();
  Cell et_sim_stderr = Cell::na();
  Cell p_large = Cell::na();
  Cell p_empirical = Cell::na();
  std::string verdict;

  bool operator==(const ResultRow &) const = default;
};

inline constexpr std::string_view kCsvHeader =
    "lambda_hat,n,K,model,q,EX_analytic,ET_analytic,EX_sim,ET_sim,ET_sim_stderr,p_L,p_empirical,verdict";

inline std::string to_csv(const ResultRow &r) {
  std::string s;
  s += Cell::of(r.lambda_hat).str() + ',';
  s += std::to_string(r.n) + ',';
  s += r.k.str() + ',';
  s += to_string(r.model) + ',';
  s += Cell::of(r.q).str() + ',';
  for (const Cell *c : {&r.ex_analytic, &r.et_analytic, &r.ex_sim, &r.et_sim, &r.et_sim_stderr,
                        &r.p_large, &r.p_empirical})
    s += c->str() + ',';
  s += r.verdict.empty() ? "NA" : r.verdict;
  return s;
}

inline ResultRow parse_csv_row(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (f.size() != 13) throw ConfigError("CSV row needs 13 fields, got " + std::to_string(f.size()));
  ResultRow r;
  r.lambda_hat = Cell::parse(f[0]).value();
  r.n = detail::parse_number<int>(f[1], "n");
  r.k = parse_cutoff(f[2]);
  r.model = parse_model(f[3]);
  r.q = Cell::parse(f[4]).value();
  r.ex_analytic = Cell::parse(f[5]);
  r.et_analytic = Cell::parse(f[6]);
  r.ex_sim = Cell::parse(f[7]);
  r.et_sim = Cell::parse(f[8]);
  r.et_sim_stderr = Cell::parse(f[9]);
  r.p_large = Cell::parse(f[10]);
  r.p_empirical = Cell::parse(f[11]);
  r.verdict = f[12] == "NA" ? std::string{} : std::string(f[12]);
  return r;
}

inline void write_csv(std::ostream &out, const std::vector<ResultRow> &rows) {
  out << kCsvHeader << '\n';
  for (const auto &r : rows) out << to_csv(r) << '\n';
}

} // namespace aloha::harness
