#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace emcf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One JSON file plus --set key=value overrides; overrides win. Keys use
// dotted paths into the JSON tree.
struct RunConfig {
  nlohmann::json j;

  static RunConfig defaults() {
    RunConfig c;
    c.j = {
        {"n", 2},
        {"cone", {{"aperture", 0.35}, {"double_symmetric", true}}},
        {"grid",
         {{"h", 1.0 / 128}, {"R_grid", 2.5}, {"Z_grid", 2.0}, {"R_trunc", 8.0}}},
        {"flow",
         {{"dt", 1e-3},
          {"eta", 0.1},
          {"omega0_frac", 0.1},
          {"eps_list", {1e-2, 1e-3, 1e-4}},
          {"t_end", 1.0},
          {"m", 900},
          {"sample_dt", 0.02}}},
        {"levelset",
         {{"shape", "ball"},
          {"z0", 0.0},
          {"rho", 1.0},
          {"t_end", 0.4},
          {"sample_dt", 0.02},
          {"expect_monotone", true}}},
        {"avoidance",
         {{"z0_a", 0.75}, {"rho_a", 0.4}, {"z0_b", -0.55}, {"rho_b", 0.35}, {"c_grid", 4.0}}},
        {"barrier", {{"z0", 0.55}, {"delta", 0.1}, {"c", 10.0}}},
        {"smooth", {{"z0_a", 0.8}, {"rho_a", 0.4}, {"z0_b", 1.1}, {"rho_b", 0.4}, {"eps_s", 2e-3}}},
        {"morse", {{"lookback", 1.0}, {"t_forward", 2.0}, {"match_tol_cells", 10.0}}},
        {"branch", "unstable"},
        {"eps", 1e-3},
        {"seed", 0},
        {"run_id", ""},
    };
    return c;
  }

  static RunConfig load(const std::string& path) {
    RunConfig c = defaults();
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open config: " + path);
      nlohmann::json user;
      try {
        in >> user;
      } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
      }
      c.j.merge_patch(user);
    }
    return c;
  }

  void set_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(val);
    } catch (...) {
      parsed = val;  // plain string
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw ConfigError("bad --set key: " + key);
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }

  double num(const std::string& a) const { return j.at(a).get<double>(); }
  double num(const std::string& a, const std::string& b) const {
    return j.at(a).at(b).get<double>();
  }

  void validate() const {
    auto positive = [&](double v, const std::string& name) {
      if (!(v > 0.0)) throw ConfigError(name + " must be positive");
    };
    if (j.at("n").get<int>() < 2) throw ConfigError("n must be >= 2");
    positive(num("grid", "h"), "grid.h");
    positive(num("grid", "R_grid"), "grid.R_grid");
    positive(num("grid", "Z_grid"), "grid.Z_grid");
    positive(num("grid", "R_trunc"), "grid.R_trunc");
    positive(num("flow", "dt"), "flow.dt");
    positive(num("flow", "eta"), "flow.eta");
    positive(num("levelset", "t_end"), "levelset.t_end");
    const auto eps = j.at("flow").at("eps_list").get<std::vector<double>>();
    for (std::size_t k = 0; k < eps.size(); ++k) {
      positive(eps[k], "flow.eps_list entries");
      if (k > 0 && !(eps[k] < eps[k - 1]))
        throw ConfigError("flow.eps_list must be strictly decreasing");
    }
  }
};

}  // namespace emcf
