#pragma once

// Experiment specifications and their text format.
//
// One `key = value` pair per line; `#` starts a comment; list values are
// comma separated. Keys:
//   n             node counts                     100 or 50, 100
//   lambda_hat    aggregate input rates           0.05, 0.1, 0.15
//   K             cutoff phases, `inf` allowed    10, 12, inf
//   model         prob | window                   prob, window
//   q             fixed retransmission factor     0.5
//   q_rule        1/n | 1-1/e | optimal_geo       (instead of q)
//   slots, warmup, replications, phase_cap        integers
//   seeds         one seed per replication        1, 2, 3
//   out           CSV output path

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aloha/errors.hpp"
#include "aloha/lambert_w.hpp"
#include "aloha/policy.hpp"
#include "aloha/stability.hpp"

namespace aloha::harness {

enum class QRuleKind { Fixed, InverseN, Robust, OptimalGeo };

struct QRule {
  QRuleKind kind = QRuleKind::Robust;
  double value = 0.0; // used by Fixed

  static QRule fixed(double q) { return {QRuleKind::Fixed, q}; }

  static QRule parse(std::string_view text);

  double resolve(int n, double lambda_hat) const {
    switch (kind) {
    case QRuleKind::Fixed:
      return value;
    case QRuleKind::InverseN:
      return 1.0 / n;
    case QRuleKind::Robust:
      return 1.0 - kInvE;
    case QRuleKind::OptimalGeo:
      return optimal_q_geo(n, lambda_hat);
    }
    return value;
  }

  std::string str() const {
    switch (kind) {
    case QRuleKind::Fixed:
      return std::to_string(value);
    case QRuleKind::InverseN:
      return "1/n";
    case QRuleKind::Robust:
      return "1-1/e";
    case QRuleKind::OptimalGeo:
      return "optimal_geo";
    }
    return "?";
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (item.empty()) throw ConfigError("empty item in list '" + std::string(s) + "'");
    out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T v{};
  const auto *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(what));
  return v;
}

} // namespace detail

inline QRule QRule::parse(std::string_view text) {
  const auto t = detail::trim(text);
  if (t == "1/n") return {QRuleKind::InverseN, 0.0};
  if (t == "1-1/e" || t == "robust") return {QRuleKind::Robust, 0.0};
  if (t == "optimal_geo" || t == "optimal") return {QRuleKind::OptimalGeo, 0.0};
  const double q = detail::parse_number<double>(t, "q");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q must lie in (0, 1], got " + t);
  return fixed(q);
}

inline CutoffPhase parse_cutoff(std::string_view text) {
  const auto t = detail::trim(text);
  if (t == "inf" || t == "INF" || t == "unbounded") return CutoffPhase::unbounded();
  const int k = detail::parse_number<int>(t, "K");
  if (k < 1) throw ConfigError("K must be >= 1 or inf, got " + t);
  return CutoffPhase::finite(k);
}

inline BackoffModel parse_model(std::string_view text) {
  const auto t = detail::trim(text);
  if (t == "prob" || t == "probability") return BackoffModel::Probability;
  if (t == "window") return BackoffModel::Window;
  throw ConfigError("model must be prob or window, got '" + t + "'");
}

struct ExperimentSpec {
  std::vector<int> ns{100};
  std::vector<double> lambda_hats;
  std::vector<CutoffPhase> ks;
  std::vector<BackoffModel> models{BackoffModel::Probability};
  QRule q_rule{};
  std::int64_t slots = 2'000'000;
  std::int64_t warmup = 100'000;
  int replications = 5;
  std::vector<std::uint64_t> seeds; // empty: 1..replications
  int phase_cap = 64;
  std::string out;

  std::vector<std::uint64_t> seed_list() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> s;
    for (int r = 1; r <= replications; ++r) s.push_back(static_cast<std::uint64_t>(r));
    return s;
  }

  void validate() const {
    if (ns.empty()) throw ConfigError("no node count given");
    for (int n : ns)
      if (n < 1) throw ConfigError("n must be >= 1");
    if (lambda_hats.empty()) throw ConfigError("no lambda_hat given");
    for (double l : lambda_hats)
      if (!(l > 0.0 && l < 1.0)) throw ConfigError("lambda_hat must lie in (0, 1)");
    if (ks.empty()) throw ConfigError("no K given");
    if (models.empty()) throw ConfigError("no model given");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!seeds.empty() && static_cast<int>(seeds.size()) != replications)
      throw ConfigError("seeds must list one seed per replication");
    if (slots <= 0 || warmup < 0 || warmup >= slots)
      throw ConfigError("need 0 <= warmup < slots");
    if (phase_cap < 1) throw ConfigError("phase_cap must be >= 1");
  }
};

inline void apply_setting(ExperimentSpec &spec, const std::string &key, const std::string &value) {
  using detail::parse_number;
  const auto items = detail::split_list(value);
  const auto single = [&]() -> const std::string & {
    if (items.size() != 1) throw ConfigError(key + " takes a single value");
    return items.front();
  };
  if (key == "n") {
    spec.ns.clear();
    for (const auto &i : items) spec.ns.push_back(parse_number<int>(i, key));
  } else if (key == "lambda_hat") {
    spec.lambda_hats.clear();
    for (const auto &i : items) spec.lambda_hats.push_back(parse_number<double>(i, key));
  } else if (key == "K") {
    spec.ks.clear();
    for (const auto &i : items) spec.ks.push_back(parse_cutoff(i));
  } else if (key == "model") {
    spec.models.clear();
    for (const auto &i : items) spec.models.push_back(parse_model(i));
  } else if (key == "q") {
    const double q = parse_number<double>(single(), key);
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q must lie in (0, 1]");
    spec.q_rule = QRule::fixed(q);
  } else if (key == "q_rule") {
    spec.q_rule = QRule::parse(single());
  } else if (key == "slots") {
    spec.slots = parse_number<std::int64_t>(single(), key);
  } else if (key == "warmup") {
    spec.warmup = parse_number<std::int64_t>(single(), key);
  } else if (key == "replications") {
    spec.replications = parse_number<int>(single(), key);
  } else if (key == "seeds") {
    spec.seeds.clear();
    for (const auto &i : items) spec.seeds.push_back(parse_number<std::uint64_t>(i, key));
  } else if (key == "phase_cap") {
    spec.phase_cap = parse_number<int>(single(), key);
  } else if (key == "out") {
    spec.out = single();
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

inline ExperimentSpec parse_spec(std::istream &in) {
  ExperimentSpec spec;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(std::string_view(t).substr(0, eq));
    const auto value = detail::trim(std::string_view(t).substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      apply_setting(spec, key, value);
    } catch (const ConfigError &e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (seen.count("q") && seen.count("q_rule")) throw ConfigError("give either q or q_rule, not both");
  if (seen.count("seeds") && !seen.count("replications"))
    spec.replications = static_cast<int>(spec.seeds.size());
  return spec;
}

inline ExperimentSpec parse_spec_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file " + path);
  return parse_spec(in);
}

} // namespace aloha::harness
