#pragma once

// Flat key = value experiment files. Lines starting with '#' are comments,
// `include = path` splices another file in place (paths relative to the
// including file), and later assignments override earlier ones.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ifsm/dynamics.hpp"
#include "ifsm/error.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/model.hpp"
#include "ifsm/operators.hpp"
#include "ifsm/selection.hpp"

namespace ifsm {

inline constexpr const char* kCodeVersion = "0.1.0";

namespace detail {

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class Config {
 public:
  struct Entry {
    std::string value;
    std::filesystem::path origin;  // directory of the defining file
    std::string where;             // file:line for messages
  };

  static Config parse_file(const std::filesystem::path& path) {
    Config c;
    std::vector<std::filesystem::path> stack;
    c.load(path, stack);
    return c;
  }

  static Config parse_string(const std::string& text, const std::filesystem::path& base = ".") {
    Config c;
    std::vector<std::filesystem::path> stack;
    std::istringstream in(text);
    c.load_stream(in, base, "<string>", stack);
    return c;
  }

  void set(const std::string& key, const std::string& value, const std::string& where = "<override>") {
    entries_[key] = Entry{value, std::filesystem::current_path(), where};
  }

  void erase(const std::string& key) { entries_.erase(key); }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::optional<std::string> string(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second.value;
  }

  std::string string(const std::string& key, const std::string& fallback) { return string(key).value_or(fallback); }

  std::optional<double> real(const std::string& key) {
    const auto s = string(key);
    if (!s) return std::nullopt;
    return to_double(*s, key);
  }

  double real(const std::string& key, double fallback) { return real(key).value_or(fallback); }

  std::optional<std::int64_t> integer(const std::string& key) {
    const auto s = string(key);
    if (!s) return std::nullopt;
    return to_int(*s, key);
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) { return integer(key).value_or(fallback); }

  bool boolean(const std::string& key, bool fallback) {
    const auto s = string(key);
    if (!s) return fallback;
    if (*s == "true" || *s == "yes" || *s == "1") return true;
    if (*s == "false" || *s == "no" || *s == "0") return false;
    bad(key, "expected a boolean, got '" + *s + "'");
  }

  std::optional<std::vector<double>> reals(const std::string& key) {
    const auto s = string(key);
    if (!s) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : detail::split_list(*s)) out.push_back(to_double(item, key));
    return out;
  }

  std::optional<std::vector<std::int64_t>> integers(const std::string& key) {
    const auto s = string(key);
    if (!s) return std::nullopt;
    std::vector<std::int64_t> out;
    for (const auto& item : detail::split_list(*s)) out.push_back(to_int(item, key));
    return out;
  }

  /// Resolved against the directory of the file that set the key.
  std::optional<std::filesystem::path> path(const std::string& key) {
    const auto s = string(key);
    if (!s) return std::nullopt;
    const std::filesystem::path p(*s);
    return p.is_absolute() ? p : entries_.at(key).origin / p;
  }

  /// Keys present but never read; reported as config errors to catch typos.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  /// FNV-1a over the sorted key = value lines, skipping keys in `exclude`.
  std::uint64_t hash(const std::set<std::string>& exclude = {}) const {
    std::uint64_t h = detail::fnv1a("");
    for (const auto& [k, e] : entries_) {
      if (exclude.count(k)) continue;
      h = detail::fnv1a(k + "=" + e.value + "\n", h);
    }
    return h;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    fail(ErrorKind::config, (it != entries_.end() ? it->second.where + ": " : std::string()) + key + ": " + what);
  }

 private:
  void load(const std::filesystem::path& path, std::vector<std::filesystem::path>& stack) {
    std::error_code ec;
    const auto canon = std::filesystem::weakly_canonical(path, ec);
    if (std::find(stack.begin(), stack.end(), canon) != stack.end())
      fail(ErrorKind::config, "include cycle at " + path.string());
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open config " + path.string());
    stack.push_back(canon);
    load_stream(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(), path.string(), stack);
    stack.pop_back();
  }

  void load_stream(std::istream& in, const std::filesystem::path& dir, const std::string& name,
                   std::vector<std::filesystem::path>& stack) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      const std::string body = detail::trim(std::string_view(line).substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      const std::string where = name + ":" + std::to_string(lineno);
      if (eq == std::string::npos) fail(ErrorKind::config, where + ": expected key = value");
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) fail(ErrorKind::config, where + ": empty key");
      if (key == "include") {
        const std::filesystem::path p(value);
        load(p.is_absolute() ? p : dir / p, stack);
        continue;
      }
      entries_[key] = Entry{value, dir, where};
    }
  }

  double to_double(const std::string& s, const std::string& key) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(key, "expected a number, got '" + s + "'");
    return v;
  }

  std::int64_t to_int(const std::string& s, const std::string& key) const {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, "expected an integer, got '" + s + "'");
    return v;
  }

  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

// ------------------------------------------------------------- experiment

enum class Parity { any, even, odd };

struct PerturbationSpec {
  std::vector<int> modes{1, 2};
  double amplitude = 0.01;
  Parity parity = Parity::any;
};

struct ExperimentConfig {
  // selection
  std::string selection = "quadratic";
  std::optional<double> selection_param;
  std::optional<std::filesystem::path> selection_table;
  // raw m(x) = amplitude * base(x - center)
  double selection_amplitude = 1.0;
  double selection_center = 0.0;

  // raw model, for nondim
  std::optional<RawModel> raw;

  std::vector<double> eps{0.2, 0.1, 0.05};
  int K = kDefaultTruncation;
  int quadrature = kDefaultQuadratureNodes;
  double grid_half_width = kDefaultHalfWidth;
  std::size_t grid_points = kDefaultGridPoints;
  ConvolutionMethod grid_method = ConvolutionMethod::direct;

  double steady_tol = 1e-12;
  int steady_max_iterations = 200;
  std::optional<double> C;
  bool oracle = true;
  double oracle_tol = 1e-10;
  double oracle_theta = 0.5;
  int oracle_max_iterations = 5000;
  std::vector<double> eta{0.5, 1.0};

  double T = 10.0;
  double h_max = 0.1;
  std::size_t snapshot_stride = 0;
  bool evolve_grid = false;
  FitWindow fit;
  PerturbationSpec perturbation;

  int validate_samples = 1000;
  int validate_max_degree = 16;
  std::optional<std::pair<int, int>> break_product;

  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  bool override_admissibility = false;
  std::uint64_t hash = 0;

  SelectionFunction selection_function() const {
    if (selection == "table") {
      if (!selection_table) fail(ErrorKind::config, "selection = table needs selection.table");
      std::ifstream in(*selection_table);
      if (!in) fail(ErrorKind::config, "cannot open selection table " + selection_table->string());
      std::vector<double> x, y;
      std::string line;
      while (std::getline(in, line)) {
        const std::string body = detail::trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        std::istringstream ls(body);
        double a = 0.0, b = 0.0;
        char sep = 0;
        if (!(ls >> a)) continue;  // header line
        if (ls.peek() == ',') ls >> sep;
        if (!(ls >> b)) fail(ErrorKind::config, "bad selection table row '" + body + "'");
        x.push_back(a);
        y.push_back(b);
      }
      return transformed(selection::tabulated(std::move(x), std::move(y)));
    }
    return transformed(selection::by_name(selection, selection_param));
  }

  SelectionFunction transformed(SelectionFunction base) const {
    if (selection_amplitude == 1.0 && selection_center == 0.0) return base;
    const double a = selection_amplitude, c = selection_center;
    SelectionFunction m = base;
    m.value = [base, a, c](double x) { return a * base(x - c); };
    m.d1 = [base, a, c](double x) { return a * base.derivative(1, x - c); };
    m.d2 = [base, a, c](double x) { return a * base.derivative(2, x - c); };
    m.d3 = [base, a, c](double x) { return a * base.derivative(3, x - c); };
    m.extremum = base.extremum + c;
    m.search = Interval{base.search.lower + c, base.search.upper + c};
    m.global_min.reset();
    if (base.global_min && a > 0.0) m.global_min = GlobalMinimum{a * base.global_min->value, base.global_min->location + c};
    m.even = base.even && c == 0.0;
    if (base.growth_constant) m.growth_constant = std::abs(a) * *base.growth_constant;
    return m;
  }

  QuadratureRule rule() const { return gauss_hermite_rule(quadrature); }
};

/// Keys excluded from the hash: where output goes does not change results.
inline const std::set<std::string> kUnhashedKeys{"out"};

inline ExperimentConfig load_experiment(Config& c) {
  ExperimentConfig e;
  e.selection = c.string("selection", e.selection);
  e.selection_param = c.real("selection.param");
  e.selection_table = c.path("selection.table");
  e.selection_amplitude = c.real("selection.amplitude", 1.0);
  if (e.selection_amplitude == 0.0) c.bad("selection.amplitude", "must be nonzero");
  e.selection_center = c.real("selection.center", 0.0);

  if (c.has("model.r") || c.has("model.kappa") || c.has("model.alpha") || c.has("model.x0")) {
    RawModel raw;
    raw.r = c.real("model.r", raw.r);
    raw.kappa = c.real("model.kappa", raw.kappa);
    raw.alpha = c.real("model.alpha", raw.alpha);
    raw.x0 = c.real("model.x0", raw.x0);
    e.raw = raw;
  }

  if (auto v = c.reals("eps")) e.eps = *v;
  if (e.eps.empty()) c.bad("eps", "empty list");
  for (double x : e.eps)
    if (!(x > 0.0)) c.bad("eps", "values must be positive");
  for (std::size_t i = 1; i < e.eps.size(); ++i)
    if (!(e.eps[i] < e.eps[i - 1])) c.bad("eps", "list must be strictly decreasing");

  auto positive_int = [&](const std::string& key, std::int64_t fallback, std::int64_t lo = 1) {
    const std::int64_t v = c.integer(key, fallback);
    if (v < lo) c.bad(key, "must be >= " + std::to_string(lo));
    return v;
  };
  auto positive = [&](const std::string& key, double fallback) {
    const double v = c.real(key, fallback);
    if (!(v > 0.0)) c.bad(key, "must be positive");
    return v;
  };

  e.K = static_cast<int>(positive_int("K", e.K, 4));
  e.quadrature = static_cast<int>(positive_int("quadrature", e.quadrature, 2));
  if (e.quadrature < e.K + 1) c.bad("quadrature", "needs at least K + 1 nodes");
  e.grid_half_width = positive("grid.half_width", e.grid_half_width);
  e.grid_points = static_cast<std::size_t>(positive_int("grid.points", static_cast<std::int64_t>(e.grid_points), 3));
  if (e.grid_points % 2 == 0) c.bad("grid.points", "must be odd so that the grid contains 0");
  const std::string method = c.string("grid.method", "direct");
  if (method == "direct") e.grid_method = ConvolutionMethod::direct;
  else if (method == "fft") e.grid_method = ConvolutionMethod::fft;
  else c.bad("grid.method", "expected direct or fft");

  e.steady_tol = positive("steady.tol", e.steady_tol);
  e.steady_max_iterations = static_cast<int>(positive_int("steady.max_iterations", e.steady_max_iterations));
  if (c.has("steady.C")) e.C = positive("steady.C", 1.0);
  e.oracle = c.boolean("steady.oracle", e.oracle);
  e.oracle_tol = positive("oracle.tol", e.oracle_tol);
  e.oracle_theta = positive("oracle.theta", e.oracle_theta);
  if (e.oracle_theta > 1.0) c.bad("oracle.theta", "damping must lie in (0, 1]");
  e.oracle_max_iterations = static_cast<int>(positive_int("oracle.max_iterations", e.oracle_max_iterations));
  if (auto v = c.reals("omega.eta")) {
    e.eta = *v;
    for (double x : e.eta)
      if (!(x > 0.0)) c.bad("omega.eta", "values must be positive");
  }

  e.T = positive("evolve.T", e.T);
  e.h_max = positive("evolve.h_max", e.h_max);
  e.snapshot_stride = static_cast<std::size_t>(positive_int("evolve.snapshot_stride", 0, 0));
  e.evolve_grid = c.boolean("evolve.grid", e.evolve_grid);
  e.fit.from = c.real("fit.from", e.fit.from);
  e.fit.to = c.real("fit.to", e.fit.to);
  if (!(e.fit.from >= 0.0 && e.fit.from < e.fit.to && e.fit.to <= 1.0)) c.bad("fit.from", "need 0 <= from < to <= 1");

  if (auto v = c.integers("perturb.modes")) {
    e.perturbation.modes.clear();
    for (auto k : *v) {
      if (k < 1 || k > e.K) c.bad("perturb.modes", "modes must lie in 1..K");
      e.perturbation.modes.push_back(static_cast<int>(k));
    }
  }
  e.perturbation.amplitude = c.real("perturb.amplitude", e.perturbation.amplitude);
  const std::string parity = c.string("perturb.parity", "any");
  if (parity == "any") e.perturbation.parity = Parity::any;
  else if (parity == "even") e.perturbation.parity = Parity::even;
  else if (parity == "odd") e.perturbation.parity = Parity::odd;
  else c.bad("perturb.parity", "expected any, even or odd");
  for (int k : e.perturbation.modes) {
    if (e.perturbation.parity == Parity::even && k % 2 != 0) c.bad("perturb.modes", "odd mode in an even perturbation");
    if (e.perturbation.parity == Parity::odd && k % 2 == 0) c.bad("perturb.modes", "even mode in an odd perturbation");
  }

  e.validate_samples = static_cast<int>(positive_int("validate.samples", e.validate_samples));
  e.validate_max_degree = static_cast<int>(positive_int("validate.max_degree", e.validate_max_degree));
  if (auto v = c.integers("validate.break_product")) {
    if (v->size() != 2 || (*v)[1] < 0 || (*v)[1] > (*v)[0]) c.bad("validate.break_product", "expected k, l with 0 <= l <= k");
    e.break_product = std::pair<int, int>{static_cast<int>((*v)[0]), static_cast<int>((*v)[1])};
  }

  e.out = c.string("out", e.out.string());
  e.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<std::int64_t>(e.seed)));
  e.override_admissibility = c.boolean("override_admissibility", false);

  const auto extra = c.unused();
  if (!extra.empty()) c.bad(extra.front(), "unknown key");
  e.hash = c.hash(kUnhashedKeys);

  // surface unknown selection names now rather than mid-run
  (void)e.selection_function();
  return e;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  Config c = Config::parse_file(path);
  return load_experiment(c);
}

}  // namespace ifsm
