#include "tensortomo/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

namespace tensortomo {

namespace {

using Member = std::variant<std::string ExperimentConfig::*, double ExperimentConfig::*,
                            int ExperimentConfig::*, std::uint64_t ExperimentConfig::*,
                            bool ExperimentConfig::*, std::vector<double> ExperimentConfig::*>;

struct Key {
  const char* name;
  Member member;
};

using C = ExperimentConfig;

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"experiment", &C::experiment},
      {"metric.kind", &C::metric_kind},
      {"metric.amplitude", &C::conformal_amplitude},
      {"metric.width", &C::conformal_width},
      {"metric.center_x", &C::conformal_cx},
      {"metric.center_y", &C::conformal_cy},
      {"metric.eps", &C::perturbation_eps},
      {"bump.c11", &C::bump_c11},
      {"bump.c12", &C::bump_c12},
      {"bump.c22", &C::bump_c22},
      {"bump.center_x", &C::bump_cx},
      {"bump.center_y", &C::bump_cy},
      {"bump.sigma", &C::bump_sigma},
      {"domain.radius_M", &C::radius_M},
      {"domain.radius_M1", &C::radius_M1},
      {"grid.h", &C::h},
      {"fan.points", &C::fan_points},
      {"fan.dirs", &C::fan_dirs},
      {"quadrature.step", &C::step},
      {"ensemble.size", &C::ensemble_size},
      {"ensemble.seed", &C::seed},
      {"ensemble.band_limit", &C::band_limit},
      {"ensemble.modes", &C::modes},
      {"normal.fan_points", &C::normal_fan_points},
      {"normal.fan_dirs", &C::normal_fan_dirs},
      {"normal.n_theta", &C::normal_n_theta},
      {"normal.map_step", &C::normal_map_step},
      {"forward.field", &C::forward_field},
      {"crosscheck.grid", &C::crosscheck_grid},
      {"crosscheck.extent", &C::crosscheck_extent},
      {"crosscheck.dirs", &C::crosscheck_dirs},
      {"symbol.width", &C::symbol_width},
      {"symbol.angles", &C::symbol_angles},
      {"symbol.directions", &C::symbol_directions},
      {"symbol.order_probe", &C::symbol_order_probe},
      {"recovery.points", &C::recovery_points},
      {"recovery.tilt", &C::recovery_tilt},
      {"stability.ratio_on_fs", &C::stability_ratio_on_fs},
      {"stability.pipeline", &C::stability_pipeline},
      {"perturbation.eps", &C::perturbation_eps_list},
      {"perturbation.test_size", &C::perturbation_test_size},
      {"cgls.max_iter", &C::cgls_max_iter},
      {"cgls.tol", &C::cgls_tol},
      {"cgls.coarse_h", &C::cgls_coarse_h},
      {"phantom.a", &C::phantom_a},
      {"phantom.center_x", &C::phantom_cx},
      {"phantom.center_y", &C::phantom_cy},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(const std::string& v, int line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) parse_fail(line, "bad number '" + v + "'");
  return out;
}

void assign(C& c, const Member& m, const std::string& v, int line) {
  std::visit(
      [&](auto ptr) {
        using T = std::remove_reference_t<decltype(c.*ptr)>;
        if constexpr (std::is_same_v<T, std::string>) {
          c.*ptr = v;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (v == "true") c.*ptr = true;
          else if (v == "false") c.*ptr = false;
          else parse_fail(line, "expected true or false, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::vector<double> list;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) list.push_back(parse_number<double>(trim(item), line));
          c.*ptr = list;
        } else {
          c.*ptr = parse_number<T>(v, line);
        }
      },
      m);
}

std::string format(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string render(const C& c, const Member& m) {
  return std::visit(
      [&](auto ptr) -> std::string {
        const auto& v = c.*ptr;
        using T = std::remove_cvref_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string s;
          for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
          return s;
        } else if constexpr (std::is_same_v<T, double>) {
          return format(v);
        } else {
          return std::to_string(v);
        }
      },
      m);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::RangeError, what);
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"certify",   "forward",           "normal-crosscheck",
                                              "symbol",    "decompose",         "boundary-recovery",
                                              "stability", "perturbation",      "reconstruct"};
  return names;
}

ExperimentConfig parse_config(const std::string& text) {
  C c;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) parse_fail(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) parse_fail(line, "empty key");
    if (value.empty()) parse_fail(line, "empty value for '" + key + "'");
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Key& k) { return key == k.name; });
    if (it == table.end()) {
      throw Error(ErrorCode::UnknownKey, "line " + std::to_string(line) + ": '" + key + "'");
    }
    assign(c, it->member, value, line);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  require(std::find(names.begin(), names.end(), c.experiment) != names.end(),
          "unknown experiment '" + c.experiment + "'");
  require(c.metric_kind == "euclidean" || c.metric_kind == "conformal" ||
              c.metric_kind == "perturbed",
          "metric.kind must be euclidean, conformal or perturbed");
  require(c.forward_field == "metric" || c.forward_field == "random" || c.forward_field == "phantom",
          "forward.field must be metric, random or phantom");
  require(c.radius_M > 0.0 && c.radius_M1 > c.radius_M, "need 0 < domain.radius_M < domain.radius_M1");
  require(c.h > 0.0 && c.h < c.radius_M, "grid.h must be positive and below radius_M");
  require(c.step > 0.0, "quadrature.step must be positive");
  require(c.fan_points > 0 && c.fan_dirs > 0, "fan sizes must be positive");
  require(c.ensemble_size > 0 && c.modes > 0 && c.band_limit > 0.0, "ensemble sizes must be positive");
  require(c.normal_fan_points > 0 && c.normal_fan_dirs > 0 && c.normal_n_theta > 0 &&
              c.normal_map_step > 0.0,
          "normal.* must be positive");
  require(c.conformal_width > 0.0 && c.bump_sigma > 0.0, "widths must be positive");
  require(c.perturbation_eps >= 0.0, "metric.eps must be nonnegative");
  require(c.crosscheck_grid > 0 && c.crosscheck_extent > 0.0 && c.crosscheck_dirs > 0,
          "crosscheck.* must be positive");
  require(c.symbol_width > 0.0 && c.symbol_angles > 0 && c.symbol_directions > 0,
          "symbol.* must be positive");
  require(c.recovery_points > 0 && c.recovery_tilt > 0.0 && c.recovery_tilt < M_PI / 2,
          "recovery.points > 0 and 0 < recovery.tilt < pi/2");
  require(!c.perturbation_eps_list.empty() && c.perturbation_test_size > 0,
          "perturbation needs eps values and a test set");
  for (double e : c.perturbation_eps_list) require(e > 0.0, "perturbation.eps values must be positive");
  require(c.cgls_max_iter > 0 && c.cgls_tol > 0.0 && c.cgls_coarse_h > 0.0,
          "cgls.* must be positive");
  require(c.phantom_a > 0.0, "phantom.a must be positive");
}

std::string serialize(const ExperimentConfig& c) {
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + " = " + render(c, k.member) + "\n";
  return out;
}

TensorBump make_bump(const ExperimentConfig& c) {
  TensorBump b;
  b.coefficients = sym_from(c.bump_c11, c.bump_c12, c.bump_c22);
  b.center = Vec2(c.bump_cx, c.bump_cy);
  b.sigma = c.bump_sigma;
  return b;
}

Metric make_metric(const ExperimentConfig& c) {
  if (c.metric_kind == "euclidean") return Metric::euclidean();
  const ConformalBump conf{c.conformal_amplitude, c.conformal_width,
                           Vec2(c.conformal_cx, c.conformal_cy)};
  if (c.metric_kind == "conformal") return Metric::conformal(conf);
  const Metric base = c.conformal_amplitude == 0.0 ? Metric::euclidean() : Metric::conformal(conf);
  const TensorBump bump = make_bump(c);
  return Metric::perturbed(base, c.perturbation_eps, bump, 1.0 / c3_norm(bump, *make_domain(c)));
}

std::shared_ptr<const Domain> make_domain(const ExperimentConfig& c) {
  return std::make_shared<const Domain>(c.radius_M, c.radius_M1, c.h);
}

}  // namespace tensortomo
