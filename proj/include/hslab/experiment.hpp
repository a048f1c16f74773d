// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hslab/applications.hpp"
#include "hslab/montecarlo.hpp"
#include "hslab/sensitivity.hpp"

namespace hslab {

using Json = nlohmann::json;

inline constexpr const char* kCurveHeader = "T,value,std_error,method,target_limit,target_rate";

/// One problem found while validating a configuration document.
struct ConfigIssue {
  std::string path;
  std::string code;
  std::string message;
};

inline Json issues_to_json(const std::vector<ConfigIssue>& issues) {
  Json list = Json::array();
  for (const auto& i : issues) list.push_back({{"path", i.path}, {"code", i.code}, {"message", i.message}});
  return {{"errors", list}};
}

struct ExperimentConfig {
  std::string experiment;
  std::string model_type;
  std::optional<ModelParams> model;
  std::vector<double> T_grid;
  Method method = Method::closed;
  Payoff payoff = Payoff::unit;
  std::string param;
  MethodSettings settings;
  std::string estimator = "direct";
  std::pair<double, double> window{2.0, 12.0};
  double rate_tolerance = 0.05;
  double slope_tolerance = 0.02;
  std::string app_kind;
  std::optional<AppResult> app;
  std::string input_csv;
  std::optional<double> limit;
  std::string output = "hslab";
};

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// CSV form: 17 significant digits, enough to parse back to the same double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

/// Summary form: the shortest decimal that parses back to the same double.
inline std::string format_text(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v == 0.0 ? 0.0 : v);
  return std::string(buf, r.ptr);
}

inline std::string describe(const ModelParams& m) {
  std::ostringstream os;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CirParams>) os << "cir";
        if constexpr (std::is_same_v<P, ThreeHalvesParams>) os << "three_halves";
        if constexpr (std::is_same_v<P, CevParams>) os << (p.variant == CevVariant::I ? "cev1" : "cev2");
      },
      m);
  for (const auto& n : parameter_names(m)) os << ' ' << n << '=' << format_text(get_param(m, n));
  return os.str();
}

namespace detail {

class ConfigReader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const std::string& path, const std::string& code, const std::string& msg) {
    issues.push_back({path, code, msg});
  }

  bool object(const Json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "type", "expected a JSON object");
    return false;
  }

  void allowed(const Json& obj, const std::string& path, const std::set<std::string>& keys) {
    for (const auto& [k, v] : obj.items())
      if (!keys.count(k)) fail(join(path, k), "unknown-key", "unknown key '" + k + "'");
  }

  std::optional<double> number(const Json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail(join(path, key), "type", "expected a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<long long> integer(const Json& obj, const std::string& path, const std::string& key, long long lo,
                                   long long hi) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      fail(join(path, key), "type", "expected an integer");
      return std::nullopt;
    }
    const bool huge = v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi);
    const long long x = huge ? hi : v.get<long long>();
    if (huge || x < lo || x > hi) {
      fail(join(path, key), "range", "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> string(const Json& obj, const std::string& path, const std::string& key,
                                    const std::set<std::string>& choices = {}) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_string()) {
      fail(join(path, key), "type", "expected a string");
      return std::nullopt;
    }
    std::string s = v.get<std::string>();
    if (!choices.empty() && !choices.count(s)) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      fail(join(path, key), "invalid-choice", "'" + s + "' is not one of: " + list);
      return std::nullopt;
    }
    return s;
  }

  std::optional<bool> boolean(const Json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      fail(join(path, key), "type", "expected true or false");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  // Runs a library constructor and records its error code on failure.
  template <class F>
  bool guarded(const std::string& path, F&& f) {
    try {
      f();
      return true;
    } catch (const Error& e) {
      fail(path, e.code(), e.what());
      return false;
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

inline void read_model(ConfigReader& r, const Json& doc, ExperimentConfig& c) {
  const Json& m = doc.at("model");
  if (!r.object(m, "model")) return;
  r.allowed(m, "model", {"type", "params"});
  const auto type = r.string(m, "model", "type", {"cir", "three_halves", "cev1", "cev2"});
  if (!m.contains("type")) r.fail("model.type", "missing", "model type is required");
  if (!type) return;
  c.model_type = *type;
  ModelParams p;
  if (*type == "cir") p = CirParams{};
  if (*type == "three_halves") p = ThreeHalvesParams{};
  if (*type == "cev1") p = CevParams{};
  if (*type == "cev2") {
    CevParams cv;
    cv.variant = CevVariant::II;
    p = cv;
  }
  if (m.contains("params") && r.object(m.at("params"), "model.params")) {
    const Json& ps = m.at("params");
    const auto names = parameter_names(p);
    r.allowed(ps, "model.params", std::set<std::string>(names.begin(), names.end()));
    for (const auto& n : names)
      if (auto v = r.number(ps, "model.params", n)) param_ref(p, n) = *v;
  }
  if (r.guarded("model.params", [&] { validate(p); })) c.model = p;
}

inline void read_grid(ConfigReader& r, const Json& doc, ExperimentConfig& c) {
  const Json& g = doc.at("T_grid");
  if (g.is_array()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::string path = "T_grid[" + std::to_string(i) + "]";
      if (!g[i].is_number() || !(g[i].get<double>() > 0.0) || !std::isfinite(g[i].get<double>())) {
        r.fail(path, "range", "maturities must be positive finite numbers");
        continue;
      }
      c.T_grid.push_back(g[i].get<double>());
    }
  } else if (g.is_object()) {
    r.allowed(g, "T_grid", {"start", "stop", "step"});
    const auto a = r.number(g, "T_grid", "start"), b = r.number(g, "T_grid", "stop"),
               h = r.number(g, "T_grid", "step");
    if (!a || !b || !h) {
      r.fail("T_grid", "missing", "range form needs start, stop and step");
      return;
    }
    if (!(*a > 0.0 && *b >= *a && *h > 0.0)) {
      r.fail("T_grid", "range", "need 0 < start <= stop and step > 0");
      return;
    }
    const long n = std::lround(std::floor((*b - *a) / *h + 1e-9));
    if (n > 100000) {
      r.fail("T_grid", "range", "grid has more than 1e5 points");
      return;
    }
    for (long i = 0; i <= n; ++i) c.T_grid.push_back(*a + static_cast<double>(i) * *h);
  } else {
    r.fail("T_grid", "type", "expected an array of maturities or {start, stop, step}");
    return;
  }
  if (c.T_grid.empty()) r.fail("T_grid", "range", "maturity grid is empty");
  for (std::size_t i = 1; i < c.T_grid.size(); ++i)
    if (!(c.T_grid[i] > c.T_grid[i - 1])) {
      r.fail("T_grid", "order", "maturities must be strictly increasing");
      break;
    }
}

inline void read_mc(ConfigReader& r, const Json& doc, ExperimentConfig& c) {
  const Json& m = doc.at("mc");
  if (!r.object(m, "mc")) return;
  r.allowed(m, "mc",
            {"seed", "n_paths", "n_steps", "steps_per_unit", "scheme", "richardson", "estimator", "rel_bump",
             "gamma_rel_bump"});
  auto& s = c.settings;
  if (m.contains("seed")) {
    const Json& v = m.at("seed");
    if (v.is_number_unsigned())
      s.seed = v.get<std::uint64_t>();
    else if (v.is_number_integer() && v.get<long long>() >= 0)
      s.seed = static_cast<std::uint64_t>(v.get<long long>());
    else
      r.fail("mc.seed", "type", "seed must be a nonnegative integer");
  }
  if (auto v = r.integer(m, "mc", "n_paths", 2, 1000000000LL)) s.n_paths = static_cast<long>(*v);
  if (auto v = r.integer(m, "mc", "n_steps", 1, 100000000LL)) s.fixed_steps = static_cast<int>(*v);
  if (auto v = r.number(m, "mc", "steps_per_unit")) {
    if (*v > 0.0)
      s.steps_per_unit = *v;
    else
      r.fail("mc.steps_per_unit", "range", "must be positive");
  }
  if (auto v = r.string(m, "mc", "scheme", {"euler_full_truncation", "euler_log", "cir_exact"})) {
    if (*v == "euler_full_truncation") s.scheme = Scheme::euler_full_truncation;
    if (*v == "euler_log") s.scheme = Scheme::euler_log;
    if (*v == "cir_exact") s.scheme = Scheme::cir_exact;
  }
  // exact transitions carry no discretization error to extrapolate away
  s.richardson = s.scheme != Scheme::cir_exact;
  if (auto v = r.boolean(m, "mc", "richardson")) {
    if (*v && s.scheme == Scheme::cir_exact)
      r.fail("mc.richardson", "incompatible", "Richardson extrapolation applies to the Euler schemes only");
    else
      s.richardson = *v;
  }
  if (auto v = r.string(m, "mc", "estimator", {"direct", "hs"})) c.estimator = *v;
  for (const char* k : {"rel_bump", "gamma_rel_bump"})
    if (auto v = r.number(m, "mc", k)) {
      if (!(*v > 0.0 && *v < 0.5)) {
        r.fail(std::string("mc.") + k, "range", "relative bump must lie in (0, 0.5)");
        continue;
      }
      (std::string(k) == "rel_bump" ? s.mc_rel_bump : s.mc_gamma_rel_bump) = *v;
    }
}

inline void read_app(ConfigReader& r, const Json& doc, ExperimentConfig& c) {
  const Json& a = doc.at("app");
  if (!r.object(a, "app")) return;
  r.allowed(a, "app", {"kind", "params"});
  const auto kind = r.string(a, "app", "kind",
                             {"heston-utility", "three-halves-utility", "cev-utility", "entropic-affine-cp",
                              "entropic-cp1", "entropic-cp2", "bond"});
  if (!a.contains("kind")) r.fail("app.kind", "missing", "application kind is required");
  if (!kind) return;
  c.app_kind = *kind;
  const Json empty = Json::object();
  const Json& ps = a.contains("params") ? a.at("params") : empty;
  if (!r.object(ps, "app.params")) return;
  auto num = [&](const char* k, double& dst) {
    if (auto v = r.number(ps, "app.params", k)) dst = *v;
  };
  auto vec = [&](const char* k, std::vector<double>& dst) {
    if (!ps.contains(k)) return;
    const Json& v = ps.at(k);
    bool good = v.is_array() && !v.empty();
    for (const auto& e : v) good = good && e.is_number();
    if (!good) {
      r.fail(std::string("app.params.") + k, "type", "expected a nonempty array of numbers");
      return;
    }
    dst = v.get<std::vector<double>>();
  };
  const std::string path = "app.params";
  if (*kind == "heston-utility" || *kind == "three-halves-utility") {
    r.allowed(ps, path, {"k", "m", "v", "rho", "mu", "nu", "r", "xi"});
    StochVolUtilitySpec s;
    if (*kind == "three-halves-utility") {
      s.k = 1.0;
      s.m = 1.0;
      s.xi = 1.0;
    }
    num("k", s.k), num("m", s.m), num("v", s.v), num("rho", s.rho), num("mu", s.mu), num("nu", s.nu), num("r", s.r);
    num("xi", s.xi);
    r.guarded(path, [&] { c.app = *kind == "heston-utility" ? heston_utility_map(s) : three_halves_utility_map(s); });
  } else if (*kind == "cev-utility") {
    r.allowed(ps, path, {"k", "r", "sigma", "beta", "nu", "xi"});
    double k = 0.08, rr = 0.02, sg = 0.2, be = 0.5, nu = -1.0, xi = 1.0;
    num("k", k), num("r", rr), num("sigma", sg), num("beta", be), num("nu", nu), num("xi", xi);
    r.guarded(path, [&] { c.app = utility_cev_map(k, rr, sg, be, nu, xi); });
  } else if (*kind == "entropic-affine-cp") {
    r.allowed(ps, path, {"k", "m", "v", "varsigma", "gamma", "mu", "eta", "nu", "xi"});
    AffineCpSpec s;
    num("k", s.k), num("m", s.m), num("nu", s.nu), num("xi", s.xi);
    vec("v", s.v), vec("gamma", s.gamma), vec("mu", s.mu), vec("eta", s.eta);
    if (ps.contains("varsigma")) {
      try {
        s.varsigma = ps.at("varsigma").get<std::vector<std::vector<double>>>();
      } catch (const Json::exception&) {
        r.fail(path + ".varsigma", "type", "expected a square array of arrays of numbers");
      }
    }
    r.guarded(path, [&] { c.app = entropic_affine_cp_map(s); });
  } else if (*kind == "entropic-cp1" || *kind == "entropic-cp2") {
    r.allowed(ps, path, {"k", "m", "v", "nu", "eta", "s0"});
    ThreeHalvesCpSpec s;
    if (*kind == "entropic-cp2") s.eta = -0.5;
    num("k", s.k), num("m", s.m), num("v", s.v), num("nu", s.nu), num("eta", s.eta), num("s0", s.s0);
    r.guarded(path, [&] { c.app = *kind == "entropic-cp1" ? entropic_cp1_map(s) : entropic_cp2_map(s); });
  } else {
    r.allowed(ps, path, {});
    if (!c.model) {
      if (!doc.contains("model")) r.fail("model", "missing", "bond pricing takes its short-rate model from 'model'");
      return;
    }
    r.guarded("model", [&] { c.app = bond_map(*c.model); });
  }
}

}  // namespace detail

/// Checks a configuration document and collects every problem found.
inline ValidationResult validate_config(const Json& doc) {
  detail::ConfigReader r;
  ExperimentConfig c;
  ValidationResult out;
  if (!r.object(doc, "")) {
    out.issues = r.issues;
    return out;
  }
  r.allowed(doc, "",
            {"experiment", "model", "T_grid", "method", "payoff", "param", "mc", "pde", "fit", "app", "input_csv",
             "limit", "output"});
  const auto exp = r.string(doc, "", "experiment", {"price", "delta", "gamma", "param", "ratefit", "app", "validate"});
  if (!doc.contains("experiment")) r.fail("experiment", "missing", "experiment is required");
  if (exp) c.experiment = *exp;
  if (auto o = r.string(doc, "", "output")) {
    if (o->empty())
      r.fail("output", "range", "output prefix must be nonempty");
    else
      c.output = *o;
  }

  const bool needs_model = exp && *exp != "ratefit" && *exp != "app";
  if (doc.contains("model"))
    detail::read_model(r, doc, c);
  else if (needs_model)
    r.fail("model", "missing", "this experiment needs a model block");

  const bool needs_grid = exp && (*exp == "price" || *exp == "delta" || *exp == "gamma" || *exp == "param" ||
                                  *exp == "app");
  if (doc.contains("T_grid"))
    detail::read_grid(r, doc, c);
  else if (needs_grid)
    r.fail("T_grid", "missing", "this experiment needs a maturity grid");

  if (auto m = r.string(doc, "", "method", {"closed", "mc", "pde"})) {
    c.method = *m == "closed" ? Method::closed : *m == "mc" ? Method::mc : Method::pde;
    if (exp && (*exp == "param" || *exp == "app") && c.method != Method::closed)
      r.fail("method", "unsupported", "this experiment is evaluated in closed form only");
  }
  if (auto p = r.string(doc, "", "payoff", {"unit", "linear"})) {
    c.payoff = *p == "unit" ? Payoff::unit : Payoff::linear;
    if (c.payoff == Payoff::linear && c.model_type != "cir")
      r.fail("payoff", "unsupported", "the linear payoff has closed forms for the cir model only");
  }
  if (exp && *exp == "param") {
    if (auto p = r.string(doc, "", "param")) {
      c.param = *p;
      if (c.model) {
        const auto lim = sensitivity_limits(*c.model);
        if (!lim.param_limits.count(*p)) r.fail("param", "invalid-choice", "no long-run limit for parameter '" + *p + "'");
      }
    } else if (!doc.contains("param")) {
      r.fail("param", "missing", "param experiment needs 'param'");
    }
  }
  if (doc.contains("mc")) detail::read_mc(r, doc, c);
  if (c.estimator == "hs" && !(exp && *exp == "price"))
    r.fail("mc.estimator", "unsupported", "the hs estimator applies to price experiments");
  if (doc.contains("pde") && r.object(doc.at("pde"), "pde")) {
    const Json& p = doc.at("pde");
    r.allowed(p, "pde", {"n_x", "n_t"});
    if (auto v = r.integer(p, "pde", "n_x", 50, 100000)) c.settings.pde_n_x = static_cast<int>(*v);
    if (auto v = r.integer(p, "pde", "n_t", 50, 100000)) c.settings.pde_n_t = static_cast<int>(*v);
  }
  if (doc.contains("fit") && r.object(doc.at("fit"), "fit")) {
    const Json& f = doc.at("fit");
    r.allowed(f, "fit", {"window", "rate_tolerance", "slope_tolerance"});
    if (f.contains("window")) {
      const Json& w = f.at("window");
      if (w.is_array() && w.size() == 2 && w[0].is_number() && w[1].is_number() &&
          w[0].get<double>() < w[1].get<double>())
        c.window = {w[0].get<double>(), w[1].get<double>()};
      else
        r.fail("fit.window", "type", "expected [lo, hi] with lo < hi");
    }
    if (auto v = r.number(f, "fit", "rate_tolerance")) c.rate_tolerance = *v;
    if (auto v = r.number(f, "fit", "slope_tolerance")) c.slope_tolerance = *v;
  }
  if (doc.contains("app"))
    detail::read_app(r, doc, c);
  else if (exp && *exp == "app")
    r.fail("app", "missing", "app experiment needs an app block");
  if (auto s = r.string(doc, "", "input_csv")) c.input_csv = *s;
  if (exp && *exp == "ratefit" && c.input_csv.empty()) r.fail("input_csv", "missing", "ratefit needs input_csv");
  if (auto v = r.number(doc, "", "limit")) c.limit = *v;

  out.issues = std::move(r.issues);
  if (out.issues.empty()) out.config = std::move(c);
  return out;
}

struct CurveRow {
  double T = 0.0;
  double value = 0.0;
  std::optional<double> std_error;
  std::string method;
  std::optional<double> target_limit;
  std::optional<double> target_rate;
};

struct Report {
  std::vector<std::pair<std::string, std::vector<CurveRow>>> curves;  // file suffix -> rows
  std::vector<std::pair<std::string, std::string>> summary;

  void add(const std::string& k, const std::string& v) { summary.emplace_back(k, v); }
  void add(const std::string& k, double v) { summary.emplace_back(k, format_text(v)); }
};

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::string s = std::string(kCurveHeader) + "\n";
  for (const auto& r : rows)
    s += format_number(r.T) + "," + format_number(r.value) + "," + opt(r.std_error) + "," + r.method + "," +
         opt(r.target_limit) + "," + opt(r.target_rate) + "\n";
  return s;
}

inline std::vector<CurveRow> parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader)
    throw ContractError("csv-schema", std::string("curve CSV must start with the header ") + kCurveHeader);
  auto field = [](const std::string& s, std::size_t row) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ContractError("csv-schema", "bad number '" + s + "' on data row " + std::to_string(row));
    return v;
  };
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::size_t row = rows.size() + 1;
    if (f.size() != 6) throw ContractError("csv-schema", "data row " + std::to_string(row) + " needs 6 fields");
    CurveRow r;
    const auto T = field(f[0], row), v = field(f[1], row);
    if (!T || !v) throw ContractError("csv-schema", "T and value are required on data row " + std::to_string(row));
    r.T = *T;
    r.value = *v;
    r.std_error = field(f[2], row);
    r.method = f[3];
    r.target_limit = field(f[4], row);
    r.target_rate = field(f[5], row);
    rows.push_back(r);
  }
  return rows;
}

/// Writes via a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("io", "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw ContractError("io", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Writes `<prefix>_curve.csv` (plus `<prefix>_<name>_curve.csv` for extra
/// curves) and `<prefix>_summary.txt`; returns the paths written.
inline std::vector<std::string> write_report(const Report& rep, const std::string& prefix) {
  std::vector<std::string> paths;
  for (const auto& [name, rows] : rep.curves) {
    const std::string p = prefix + (name.empty() ? "" : "_" + name) + "_curve.csv";
    write_atomic(p, curve_csv(rows));
    paths.push_back(p);
  }
  std::string s;
  for (const auto& [k, v] : rep.summary) s += k + ": " + v + "\n";
  const std::string sp = prefix + "_summary.txt";
  write_atomic(sp, s);
  paths.push_back(sp);
  return paths;
}

namespace detail {

inline std::vector<CurveRow> to_rows(const std::vector<CurvePoint>& pts, std::optional<double> limit,
                                     std::optional<double> rate) {
  std::vector<CurveRow> rows;
  for (const auto& p : pts) rows.push_back({p.T, p.value, p.std_error, to_string(p.method), limit, rate});
  return rows;
}

// Fits |value - limit| over the window and compares the rate with the target.
inline void fit_section(Report& rep, const std::string& tag, const std::vector<CurveRow>& rows, double limit,
                        std::optional<double> target, const ExperimentConfig& c) {
  std::vector<std::pair<double, double>> errs;
  for (const auto& r : rows)
    if (r.T >= c.window.first && r.T <= c.window.second) errs.emplace_back(r.T, std::abs(r.value - limit));
  rep.add(tag + "fit_window", "[" + format_text(c.window.first) + ", " + format_text(c.window.second) + "]");
  bool any_zero = false;
  for (const auto& e : errs) any_zero = any_zero || !(e.second > 0.0);
  if (errs.size() < 4 || any_zero) {
    rep.add(tag + "fit", any_zero ? "skipped (error vanishes on the window)" : "skipped (fewer than 4 points in window)");
    return;
  }
  const RateFit f = rate_fit(errs, c.window);
  rep.add(tag + "fitted_rate", f.rate);
  rep.add(tag + "fit_intercept", f.intercept);
  rep.add(tag + "r_squared", f.r_squared);
  rep.add(tag + "fit_points", static_cast<double>(f.points));
  if (f.low_confidence) rep.add(tag + "fit_note", "low confidence (r^2 below 0.99)");
  if (target && *target > 0.0) {
    const double rel = std::abs(f.rate / *target - 1.0);
    rep.add(tag + "rate_relative_error", rel);
    rep.add(tag + "rate_check", std::string(rel <= c.rate_tolerance ? "PASS" : "FAIL") + " (tolerance " +
                                    format_text(c.rate_tolerance) + ")");
  }
}

inline void header(Report& rep, const ExperimentConfig& c) {
  rep.add("experiment", c.experiment);
  if (c.model) rep.add("model", describe(*c.model));
  if (!c.T_grid.empty()) rep.add("method", to_string(c.method));
  if (c.method == Method::mc) {
    rep.add("seed", std::to_string(c.settings.seed));
    rep.add("n_paths", std::to_string(c.settings.n_paths));
    rep.add("scheme", to_string(c.settings.scheme));
    rep.add("richardson", c.settings.richardson ? "true" : "false");
    if (c.settings.fixed_steps > 0)
      rep.add("n_steps", std::to_string(c.settings.fixed_steps));
    else
      rep.add("steps_per_unit", c.settings.steps_per_unit);
  }
  if (c.method == Method::pde)
    rep.add("pde_grid", std::to_string(c.settings.pde_n_x) + "x" + std::to_string(c.settings.pde_n_t));
}

inline Report run_price(const ExperimentConfig& c) {
  Report rep;
  header(rep, c);
  const ModelParams& m = *c.model;
  const double lambda = eigenvalues(m).lambda, xi = initial_state(m);
  std::vector<CurveRow> rows;
  for (double T : c.T_grid) {
    CurveRow r{T, 0.0, std::nullopt, to_string(c.method), 0.0, lambda};
    if (c.method == Method::closed) {
      r.value = closed_price(m, T, c.payoff);
    } else if (c.method == Method::mc) {
      const PathConfig cfg = c.settings.path_config(T);
      const Estimate e = c.estimator == "hs"
                             ? estimate_price_hs(model_chain(m, payoff_field(c.payoff)), xi, cfg)
                             : estimate_price_direct(model_quadruple(m, payoff_field(c.payoff)), xi, cfg);
      r.value = e.mean;
      r.std_error = e.std_error;
    } else {
      const DecompositionChain ch = model_chain(m, payoff_field(c.payoff));
      const auto v = pde_remainder_values(ch, m, T, c.settings);
      r.value = ch.pair0.phi(xi) * std::exp(-lambda * T) * v.f;
    }
    rows.push_back(r);
  }
  if (c.method == Method::mc) rep.add("estimator", c.estimator);
  rep.add("target_limit", 0.0);
  rep.add("target_rate", lambda);
  fit_section(rep, "", rows, 0.0, lambda, c);
  rep.curves.emplace_back("", rows);
  return rep;
}

inline Report run_delta(const ExperimentConfig& c) {
  Report rep;
  header(rep, c);
  const auto lim = sensitivity_limits(*c.model);
  const DecompositionChain ch = model_chain(*c.model, payoff_field(c.payoff));
  const double xi = initial_state(*c.model);
  const double limit = ch.pair0.phi.d1(xi) / ch.pair0.phi(xi);
  const auto rows = to_rows(delta_curve(*c.model, c.T_grid, c.method, c.settings, c.payoff), limit, lim.delta_rate);
  rep.add("target_limit", limit);
  rep.add("target_rate", lim.delta_rate);
  fit_section(rep, "", rows, limit, lim.delta_rate, c);
  rep.curves.emplace_back("", rows);
  return rep;
}

inline Report run_gamma(const ExperimentConfig& c) {
  Report rep;
  header(rep, c);
  const auto lim = sensitivity_limits(*c.model);
  const DecompositionChain ch = model_chain(*c.model, payoff_field(c.payoff));
  const double xi = initial_state(*c.model);
  const double limit = ch.pair0.phi.d2(xi) / ch.pair0.phi(xi);
  const GammaCurves g = gamma_curve(*c.model, c.T_grid, c.method, c.settings, c.payoff);
  for (const auto& w : g.warnings) rep.add("warning", w);
  const auto second = to_rows(g.second, limit, lim.delta_rate);
  const auto combo = to_rows(g.combo, 0.0, lim.gamma_combo_rate);
  rep.add("target_limit", limit);
  rep.add("target_rate", lim.delta_rate);
  fit_section(rep, "", second, limit, lim.delta_rate, c);
  rep.add("combo_target_rate", lim.gamma_combo_rate);
  fit_section(rep, "combo_", combo, 0.0, lim.gamma_combo_rate, c);
  rep.curves.emplace_back("", second);
  rep.curves.emplace_back("combo", combo);
  return rep;
}

inline Report run_param(const ExperimentConfig& c) {
  Report rep;
  header(rep, c);
  rep.add("param", c.param);
  const double limit = sensitivity_limits(*c.model).param_limits.at(c.param);
  const auto rows = to_rows(param_curve(*c.model, c.param, c.T_grid, c.settings), limit, std::nullopt);
  rep.add("target_limit", limit);
  std::vector<std::pair<double, double>> v;
  for (const auto& r : rows) v.emplace_back(r.T, r.value);
  if (v.size() >= 4) {
    const auto b = boundedness_stat(v, limit, c.slope_tolerance);
    rep.add("bound_sup", b.sup);
    rep.add("bound_trend_slope", b.trend_slope);
    rep.add("bound_check", std::string(b.unbounded ? "FAIL" : "PASS") + " (slope tolerance " +
                               format_text(c.slope_tolerance) + ")");
  } else {
    rep.add("bound_check", "skipped (fewer than 4 maturities)");
  }
  rep.curves.emplace_back("", rows);
  return rep;
}

inline Report run_ratefit(const ExperimentConfig& c) {
  Report rep;
  rep.add("experiment", c.experiment);
  rep.add("input_csv", c.input_csv);
  std::ifstream in(c.input_csv, std::ios::binary);
  if (!in) throw ContractError("io", "cannot read " + c.input_csv);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = parse_curve_csv(buf.str());
  if (rows.empty()) throw ContractError("csv-schema", "input curve has no rows");
  std::optional<double> limit = c.limit, rate;
  for (const auto& r : rows) {
    if (!c.limit && r.target_limit) {
      if (limit && *limit != *r.target_limit)
        throw ContractError("csv-schema", "target_limit differs between rows; set 'limit' explicitly");
      limit = r.target_limit;
    }
    if (r.target_rate) rate = r.target_rate;
  }
  if (!limit) throw ContractError("missing-limit", "input has no target_limit column values; set 'limit'");
  rep.add("target_limit", *limit);
  if (rate) rep.add("target_rate", *rate);
  std::vector<CurveRow> errs;
  for (const auto& r : rows) errs.push_back({r.T, std::abs(r.value - *limit), r.std_error, r.method, 0.0, rate});
  fit_section(rep, "", rows, *limit, rate, c);
  rep.curves.emplace_back("", errs);
  return rep;
}

inline Report run_app(const ExperimentConfig& c) {
  Report rep;
  rep.add("experiment", c.experiment);
  rep.add("app_kind", c.app_kind);
  const AppResult& a = *c.app;
  rep.add("objective", to_string(a.wrap.objective));
  if (a.model) rep.add("mapped_model", describe(*a.model));
  if (a.degenerate) rep.add("mapped_model", "none (degenerate problem, u_T = 1)");
  rep.add("wrapper", a.wrap.description);
  rep.add("wrapper_exp_rate", a.wrap.exp_rate);
  if (a.growth_limit) rep.add("growth_limit", *a.growth_limit);
  std::vector<CurveRow> rows;
  for (double T : c.T_grid) {
    const double u = a.u_closed(T);
    rows.push_back({T, std::log(u) / T, std::nullopt, "closed", a.growth_limit, std::nullopt});
    rep.add("u_T[T=" + format_text(T) + "]", u);
    rep.add("objective[T=" + format_text(T) + "]", a.wrap.value(u));
  }
  rep.curves.emplace_back("", rows);
  return rep;
}

inline Report run_validate(const ExperimentConfig& c) {
  Report rep;
  rep.add("experiment", c.experiment);
  rep.add("model", describe(*c.model));
  const ModelParams& m = *c.model;
  const DecompositionChain ch = model_chain(m, payoff_field(c.payoff));
  const auto grid = residual_grid(m);
  const double r0 = eigen_residual(ch.base, ch.pair0, grid), r1 = eigen_residual(ch.hatted, ch.pair1, grid),
               r2 = eigen_residual(ch.tilde, ch.pair2, grid), gap = ch.rederivation_gap(grid);
  rep.add("eigen_residual_base", r0);
  rep.add("eigen_residual_hatted", r1);
  rep.add("eigen_residual_tilde", r2);
  rep.add("rederivation_gap", gap);
  rep.add("eigen_check", std::max({r0, r1, r2, gap}) <= 1e-9 ? "PASS (tolerance 1e-09)" : "FAIL (tolerance 1e-09)");
  const double xi = initial_state(m);
  for (double w : {10.0, 100.0, 1000.0}) {
    const auto mi = martingale_criterion(ch.kappa, ch.base.sigma, ch.base.domain, xi, {xi / w, xi * w});
    rep.add("martingale_log_integrals[x0/" + format_text(w) + ", x0*" + format_text(w) + "]",
            format_text(mi.log_left) + " " + format_text(mi.log_right));
  }
  rep.curves.emplace_back("", std::vector<CurveRow>{});
  return rep;
}

}  // namespace detail

/// Runs a validated experiment and returns its curves and summary lines.
inline Report run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "price") return detail::run_price(c);
  if (c.experiment == "delta") return detail::run_delta(c);
  if (c.experiment == "gamma") return detail::run_gamma(c);
  if (c.experiment == "param") return detail::run_param(c);
  if (c.experiment == "ratefit") return detail::run_ratefit(c);
  if (c.experiment == "app") return detail::run_app(c);
  if (c.experiment == "validate") return detail::run_validate(c);
  throw ContractError("experiment", "unknown experiment '" + c.experiment + "'");
}

}  // namespace hslab
