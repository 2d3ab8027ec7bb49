#include "cvar_mlmc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {

namespace {

using nlohmann::json;

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Object view that records which keys were read and rejects the rest.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }
  const json& at(const std::string& key) { return obj_.at(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    out = v.get<double>();
  }
  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    out = v.get<int>();
  }
  void integer64(const std::string& key, std::int64_t& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    out = v.get<std::int64_t>();
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    out = v.get<std::string>();
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(path(key), "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
  }
  void range(const std::string& key, double& lo, double& hi) {
    if (!has(key)) return;
    std::vector<double> v;
    numbers(key, v);
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(path(key), "expected [lo, hi] with lo < hi");
    lo = v[0];
    hi = v[1];
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!seen_.count(item.key())) throw ConfigError(path(item.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

void parse_model_blocks(Reader& root, ExperimentConfig& cfg) {
  ModelConfig& m = cfg.model;
  root.string("model", m.kind);
  require(m.kind == "linear_gaussian" || m.kind == "fhn" || m.kind == "pollutant", "model",
          "must be one of linear_gaussian, fhn, pollutant");

  if (root.has("linear_gaussian")) {
    Reader r(root.at("linear_gaussian"), "linear_gaussian");
    r.number("sigma", m.lg_sigma);
    r.integer("max_level", m.lg_max_level);
    r.finish();
    require(m.lg_sigma > 0.0, "linear_gaussian.sigma", "must be positive");
    require(m.lg_max_level >= 1, "linear_gaussian.max_level", "must be at least 1");
  }
  if (root.has("fhn")) {
    Reader r(root.at("fhn"), "fhn");
    r.number("sigma", m.fhn.sigma);
    r.number("T", m.fhn.horizon);
    r.integer("N_T0", m.fhn.base_steps);
    r.number("v0", m.fhn.v0);
    r.number("w0", m.fhn.w0);
    r.integer("max_level", m.fhn.max_level);
    r.finish();
    require(m.fhn.sigma >= 0.0, "fhn.sigma", "must be non-negative");
    require(m.fhn.horizon > 0.0, "fhn.T", "must be positive");
    require(m.fhn.base_steps >= 1, "fhn.N_T0", "must be at least 1");
    require(m.fhn.max_level >= 1 && m.fhn.max_level <= 20, "fhn.max_level", "must be in [1, 20]");
  }
  if (root.has("pollutant")) {
    Reader r(root.at("pollutant"), "pollutant");
    r.number("eps_visc", m.pollutant.eps_visc);
    r.number("kappa_s", m.pollutant.kappa_s);
    r.integer("max_level", m.pollutant.max_level);
    r.integer("base_cells", m.pollutant.base_cells);
    r.range("a_range", m.pollutant.a_lo, m.pollutant.a_hi);
    r.range("b_range", m.pollutant.b_lo, m.pollutant.b_hi);
    r.finish();
    require(m.pollutant.eps_visc > 0.0, "pollutant.eps_visc", "must be positive");
    require(m.pollutant.kappa_s > 0.0, "pollutant.kappa_s", "must be positive");
    require(m.pollutant.max_level >= 1 && m.pollutant.max_level <= 12, "pollutant.max_level",
            "must be in [1, 12]");
    require(m.pollutant.base_cells >= 2, "pollutant.base_cells", "must be at least 2");
  }
}

std::vector<double> default_design(const std::string& kind) {
  if (kind == "fhn") return {0.7, 0.8, 0.08, 1.0};
  if (kind == "pollutant") return std::vector<double>(9, 0.1);
  return {0.0};
}

std::size_t model_dimension(const std::string& kind) {
  if (kind == "fhn") return 4;
  if (kind == "pollutant") return 9;
  return 1;
}

void parse_mlmc(Reader& root, CmlmcSettings& s) {
  if (!root.has("mlmc")) return;
  Reader r(root.at("mlmc"), "mlmc");
  if (r.has("screen")) {
    Reader sc(r.at("screen"), "mlmc.screen");
    sc.integer("L", s.screen.max_level);
    std::vector<double> n;
    sc.numbers("N", n);
    if (!n.empty()) {
      s.screen.samples.clear();
      for (std::size_t i = 0; i < n.size(); ++i) {
        require(n[i] >= 2 && n[i] == std::floor(n[i]),
                "mlmc.screen.N[" + std::to_string(i) + "]", "must be an integer >= 2");
        s.screen.samples.push_back(static_cast<std::int64_t>(n[i]));
      }
    }
    sc.finish();
    require(s.screen.max_level >= 1, "mlmc.screen.L", "must be at least 1");
    require(s.screen.samples.size() == static_cast<std::size_t>(s.screen.max_level) + 1,
            "mlmc.screen.N", "needs L + 1 entries");
  }
  r.integer("n_init", s.screen.grid_size);
  r.integer("n_max", s.n_max);
  r.integer("bootstrap", s.errors.bootstrap_replicas);
  r.number("safety", s.safety);
  r.integer("max_rounds", s.max_rounds);
  r.number("ratio", s.ratio);
  r.number("spline_constant", s.errors.spline_constant);
  r.integer64("kde_max_samples", s.errors.kde_max_samples);
  r.integer64("kde_min_samples", s.errors.kde_min_samples);
  if (r.has("kde_level")) {
    int level = 0;
    r.integer("kde_level", level);
    require(level >= 0, "mlmc.kde_level", "must be non-negative");
    s.errors.kde_level = level;
  }
  if (r.has("split")) {
    Reader sp(r.at("split"), "mlmc.split");
    sp.number("interp", s.split.interp);
    sp.number("bias", s.split.bias);
    sp.number("stat", s.split.stat);
    sp.finish();
    require(s.split.interp > 0 && s.split.bias > 0 && s.split.stat > 0 &&
                std::fabs(s.split.interp + s.split.bias + s.split.stat - 1.0) <= 1e-9,
            "mlmc.split", "shares must be positive and sum to 1");
  }
  r.finish();
  const int n = s.screen.grid_size;
  require(n >= 9 && ((n - 1) % 8 == 0) && (((n - 1) / 8) & ((n - 1) / 8 - 1)) == 0,
          "mlmc.n_init", "n - 1 must be 8 times a power of two");
  require(s.n_max >= n, "mlmc.n_max", "must be at least n_init");
  require(s.errors.bootstrap_replicas >= 2, "mlmc.bootstrap", "must be at least 2");
  require(s.safety > 0.0, "mlmc.safety", "must be positive");
  require(s.max_rounds >= 1, "mlmc.max_rounds", "must be at least 1");
  require(s.ratio > 1.0, "mlmc.ratio", "must exceed 1");
  require(s.errors.spline_constant > 0.0, "mlmc.spline_constant", "must be positive");
  require(s.errors.kde_max_samples >= 2, "mlmc.kde_max_samples", "must be at least 2");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Reader root(doc, "");
  if (root.has("seed")) {
    const json& v = root.at("seed");
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            "seed", "expected a non-negative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  parse_model_blocks(root, cfg);
  const std::size_t dim = model_dimension(cfg.model.kind);
  cfg.z_ref = default_design(cfg.model.kind);
  cfg.z0 = default_design(cfg.model.kind);

  if (root.has("statistic")) {
    Reader r(root.at("statistic"), "statistic");
    r.number("tau", cfg.tau);
    r.number("kappa", cfg.kappa);
    r.numbers("z_ref", cfg.z_ref);
    r.finish();
  }
  require(cfg.tau > 0.0 && cfg.tau < 1.0, "statistic.tau", "must lie in (0, 1)");
  require(cfg.kappa >= 0.0, "statistic.kappa", "must be non-negative");
  require(cfg.z_ref.size() == dim, "statistic.z_ref",
          "needs " + std::to_string(dim) + " entries for model " + cfg.model.kind);

  if (root.has("optimiser")) {
    Reader r(root.at("optimiser"), "optimiser");
    r.numbers("z0", cfg.z0);
    r.number("alpha", cfg.alpha);
    r.number("eta", cfg.eta);
    r.number("eps", cfg.eps);
    r.integer("max_iters", cfg.max_iters);
    r.finish();
  }
  require(cfg.z0.size() == dim, "optimiser.z0",
          "needs " + std::to_string(dim) + " entries for model " + cfg.model.kind);
  require(cfg.alpha > 0.0, "optimiser.alpha", "must be positive");
  require(cfg.eta > 0.0, "optimiser.eta", "must be positive");
  require(cfg.eps > 0.0 && cfg.eps < 1.0, "optimiser.eps", "must lie in (0, 1)");
  require(cfg.max_iters >= 1, "optimiser.max_iters", "must be at least 1");

  parse_mlmc(root, cfg.mlmc);
  cfg.mlmc.tau = cfg.tau;

  if (root.has("experiment")) {
    Reader r(root.at("experiment"), "experiment");
    r.string("kind", cfg.kind);
    r.numbers("tolerances", cfg.tolerances);
    r.integer("repeats", cfg.repeats);
    std::string out = cfg.out_dir.string();
    r.string("out_dir", out);
    cfg.out_dir = out;
    if (r.has("theta_interval")) {
      Interval iv;
      r.range("theta_interval", iv.lo, iv.hi);
      cfg.theta_interval = iv;
    }
    if (r.has("reference")) {
      Reader ref(r.at("reference"), "experiment.reference");
      if (ref.has("file")) {
        std::string f;
        ref.string("file", f);
        cfg.reference.file = f;
      }
      ref.integer64("samples", cfg.reference.samples);
      if (ref.has("level")) {
        int level = 0;
        ref.integer("level", level);
        cfg.reference.level = level;
      }
      ref.integer("grid_points", cfg.reference.grid_points);
      ref.finish();
      require(cfg.reference.samples >= 100, "experiment.reference.samples", "must be at least 100");
      require(cfg.reference.grid_points >= 10, "experiment.reference.grid_points",
              "must be at least 10");
    }
    r.finish();
  }
  require(cfg.kind == "estimate" || cfg.kind == "reliability" || cfg.kind == "complexity" ||
              cfg.kind == "optimize" || cfg.kind == "reference",
          "experiment.kind", "must be estimate, reliability, complexity, optimize or reference");
  require(!cfg.tolerances.empty(), "experiment.tolerances", "must not be empty");
  for (std::size_t i = 0; i < cfg.tolerances.size(); ++i)
    require(cfg.tolerances[i] > 0.0, "experiment.tolerances[" + std::to_string(i) + "]",
            "must be positive");
  require(cfg.repeats >= 1, "experiment.repeats", "must be at least 1");
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

std::unique_ptr<Model> make_model(const ModelConfig& cfg) {
  if (cfg.kind == "linear_gaussian")
    return std::make_unique<LinearGaussianModel>(cfg.lg_sigma, cfg.lg_max_level);
  if (cfg.kind == "fhn") return std::make_unique<fhn::FhnModel>(cfg.fhn);
  if (cfg.kind == "pollutant") return std::make_unique<pollutant::PollutantModel>(cfg.pollutant);
  throw ConfigError("model", "unknown model " + cfg.kind);
}

}  // namespace cvar_mlmc
