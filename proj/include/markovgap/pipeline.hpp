#pragma once

// Config-driven pipeline behind the command-line tool: problem setup, single
// runs, sweeps, validation diagnostics, band export and the oracle
// cross-check suite.

#include <algorithm>
#include <array>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "markovgap/geometry.hpp"
#include "markovgap/models.hpp"
#include "markovgap/optimizer.hpp"
#include "markovgap/oracle.hpp"
#include "markovgap/sampling.hpp"

namespace markovgap {

inline constexpr const char* kVersion = "1.0.0";

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,  // validation diagnostics or oracle checks failed
  exit_config = 2,
  exit_geometry = 3,
  exit_numeric = 4,
  exit_not_converged = 5,
};

/// Maps an exception thrown by the library to its exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  if (dynamic_cast<const GeometryError*>(&e)) return exit_geometry;
  return exit_numeric;
}

enum class ModelKind { hofstadter, topological_insulator };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::hofstadter ? "hofstadter" : "topological_insulator";
}

inline std::string to_string(NoiseSchedule n) {
  return n == NoiseSchedule::off ? "off" : "stall_or_plateau";
}

struct RunConfig {
  // [model]
  ModelKind kind = ModelKind::hofstadter;
  int p = 1;
  int q = 4;
  double t = 1.0;
  double mu = 2.0;
  std::optional<int> filled_bands;
  // [geometry]; zero width or height means sized from the blocks and margin.
  Index width = 0;
  Index height = 0;
  Index l_a = 16;
  Index l_b = 16;
  std::optional<std::array<Index, 2>> anchor;
  SmootherShape shape = SmootherShape::two_circles;
  Index radius = 0;
  Index margin_min = kDefaultMarginMin;
  // [optimizer]; the seed lives in [run].
  OptimizerConfig optimizer;
  // [output]
  std::string out_dir = "out";
  std::string name = "run";
  bool write_trace = true;
  bool save_generators = true;
  std::string warm_start;
  // [run]
  Index max_dim = 1024;
  // [validate]
  std::vector<int> expected_chern;
  // [sweep]
  std::string sweep_key;
  std::vector<std::string> sweep_values;

  std::uint64_t seed() const { return optimizer.rng_seed; }

  ModelSpec model() const {
    ModelSpec s;
    s.p = p;
    s.q = q;
    s.t = t;
    s.mu = mu;
    s.filled_bands = filled_bands;
    if (kind == ModelKind::topological_insulator) s.layers = {{1, mu}, {-1, mu}};
    return s;
  }

  Index resolved_width() const {
    if (width > 0) return width;
    const Index w = 2 * margin_min + l_a + l_b;
    return q > 0 ? (w + q - 1) / q * q : w;
  }
  Index resolved_height() const { return height > 0 ? height : 2 * margin_min + std::max(l_a, l_b); }

  Lattice lattice() const {
    return Lattice(resolved_width(), resolved_height(), kind == ModelKind::topological_insulator ? 2 : 1);
  }

  /// Checks every field without building anything heavy; throws ConfigError.
  void validate() const {
    try {
      model().validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("[model] ") + e.what());
    }
    if (!(t != 0.0)) throw ConfigError("[model] t must be nonzero");
    if (l_a < 1 || l_b < 1) throw ConfigError("[geometry] l_a and l_b must be >= 1");
    if (width < 0 || height < 0) throw ConfigError("[geometry] width and height must be >= 0");
    if (resolved_width() % q != 0) {
      throw ConfigError("[geometry] width " + std::to_string(resolved_width()) + " is not a multiple of q = " +
                        std::to_string(q));
    }
    if (radius < 0) throw ConfigError("[geometry] radius must be >= 0");
    if (margin_min < 0) throw ConfigError("[geometry] margin_min must be >= 0");
    optimizer.validate();
    if (optimizer.tr_constrained && kind != ModelKind::topological_insulator) {
      throw ConfigError("[optimizer] tr_constrained needs model kind topological_insulator");
    }
    if (max_dim < 1) throw ConfigError("[run] max_dim must be >= 1");
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("[output] bad name");
    if (!expected_chern.empty() && static_cast<Index>(expected_chern.size()) != model().n_layers()) {
      throw ConfigError("[validate] expected_chern needs one value per layer");
    }
  }
};

// ---------------------------------------------------------------------------
// Config file: flat INI sections with a fixed key set.

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"model", {"kind", "p", "q", "t", "mu", "filled_bands"}},
      {"geometry", {"width", "height", "l_a", "l_b", "anchor_x", "anchor_y", "shape", "radius", "margin_min"}},
      {"optimizer",
       {"grad_tol", "max_iters", "initial_step", "max_bisections", "noise", "noise_amplitude",
        "max_noise_events", "noise_patience", "escape_tol", "plateau_window", "plateau_rel_change",
        "tr_constrained", "eps_entropy", "eps_hamiltonian"}},
      {"output", {"dir", "name", "trace", "save_generators", "warm_start"}},
      {"run", {"seed", "max_dim"}},
      {"validate", {"expected_chern"}},
      {"sweep", {"key", "values"}},
  };
  return schema;
}

template <class T>
T parse_value(const std::string& section, const std::string& key, const std::string& raw) {
  std::istringstream is(raw);
  T v{};
  std::string rest;
  if (!(is >> v) || (is >> rest)) throw ConfigError("[" + section + "] " + key + ": cannot parse '" + raw + "'");
  return v;
}

template <>
inline bool parse_value<bool>(const std::string& section, const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
  throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + raw + "'");
}

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string&, const std::string& raw) {
  return raw;
}

inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(raw);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Parses an INI config. Unknown sections or keys are errors; [model] and
/// [geometry] are required, every other section is optional.
inline RunConfig parse_config(std::istream& in) {
  // The INI reader drops sections without keys, so headers are collected here.
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::set<std::string> headers;
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto b = line.find_first_not_of(" \t");
      const auto e = line.find(']');
      if (b != std::string::npos && line[b] == '[' && e != std::string::npos) headers.insert(line.substr(b + 1, e - b - 1));
    }
  }
  detail::ptree tree;
  try {
    std::istringstream is(text);
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key [" + section + "] " + key);
    }
  }
  for (const auto& h : headers) {
    if (!schema.count(h)) throw ConfigError("config: unknown section [" + h + "]");
  }
  for (const char* required : {"model", "geometry"}) {
    if (!headers.count(required)) throw ConfigError(std::string("config: missing section [") + required + "]");
  }

  RunConfig cfg;
  auto get = [&](const std::string& section, const std::string& key, auto& target) {
    const auto raw = tree.get_optional<std::string>(detail::ptree::path_type(section + "." + key, '.'));
    if (!raw) return false;
    using T = std::decay_t<decltype(target)>;
    target = detail::parse_value<T>(section, key, *raw);
    return true;
  };

  std::string kind;
  if (get("model", "kind", kind)) {
    if (kind == "hofstadter") cfg.kind = ModelKind::hofstadter;
    else if (kind == "topological_insulator") cfg.kind = ModelKind::topological_insulator;
    else throw ConfigError("[model] kind must be hofstadter or topological_insulator");
  }
  get("model", "p", cfg.p);
  get("model", "q", cfg.q);
  get("model", "t", cfg.t);
  get("model", "mu", cfg.mu);
  int filled = 0;
  if (get("model", "filled_bands", filled)) cfg.filled_bands = filled;

  get("geometry", "width", cfg.width);
  get("geometry", "height", cfg.height);
  get("geometry", "l_a", cfg.l_a);
  get("geometry", "l_b", cfg.l_b);
  Index ax = 0, ay = 0;
  const bool has_x = get("geometry", "anchor_x", ax);
  const bool has_y = get("geometry", "anchor_y", ay);
  if (has_x != has_y) throw ConfigError("[geometry] anchor_x and anchor_y must be given together");
  if (has_x) cfg.anchor = std::array<Index, 2>{ax, ay};
  std::string shape;
  if (get("geometry", "shape", shape)) cfg.shape = parse_shape(shape);
  get("geometry", "radius", cfg.radius);
  get("geometry", "margin_min", cfg.margin_min);

  OptimizerConfig& o = cfg.optimizer;
  get("optimizer", "grad_tol", o.grad_tol);
  get("optimizer", "max_iters", o.max_iters);
  get("optimizer", "initial_step", o.line_search.initial_step);
  get("optimizer", "max_bisections", o.line_search.max_bisections);
  std::string noise;
  if (get("optimizer", "noise", noise)) {
    if (noise == "off") o.noise_schedule = NoiseSchedule::off;
    else if (noise == "stall_or_plateau") o.noise_schedule = NoiseSchedule::stall_or_plateau;
    else throw ConfigError("[optimizer] noise must be off or stall_or_plateau");
  }
  get("optimizer", "noise_amplitude", o.noise_amplitude);
  get("optimizer", "max_noise_events", o.max_noise_events);
  get("optimizer", "noise_patience", o.noise_patience);
  get("optimizer", "escape_tol", o.escape_tol);
  get("optimizer", "plateau_window", o.plateau_window);
  get("optimizer", "plateau_rel_change", o.plateau_rel_change);
  get("optimizer", "tr_constrained", o.tr_constrained);
  get("optimizer", "eps_entropy", o.eps_entropy);
  get("optimizer", "eps_hamiltonian", o.eps_hamiltonian);

  get("output", "dir", cfg.out_dir);
  get("output", "name", cfg.name);
  get("output", "trace", cfg.write_trace);
  get("output", "save_generators", cfg.save_generators);
  get("output", "warm_start", cfg.warm_start);

  std::uint64_t seed = 0;
  if (get("run", "seed", seed)) o.rng_seed = seed;
  get("run", "max_dim", cfg.max_dim);

  std::string chern;
  if (get("validate", "expected_chern", chern)) {
    for (const auto& v : detail::split_list(chern)) cfg.expected_chern.push_back(detail::parse_value<int>("validate", "expected_chern", v));
  }
  get("sweep", "key", cfg.sweep_key);
  std::string values;
  if (get("sweep", "values", values)) cfg.sweep_values = detail::split_list(values);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config(in);
}

/// Every field with defaults resolved; enough to re-run bit-identically.
inline nlohmann::json config_to_json(const RunConfig& c) {
  const Lattice lat = c.lattice();
  const auto anchor = c.anchor ? *c.anchor : centered_anchor(lat, c.l_a, c.l_b);
  const OptimizerConfig& o = c.optimizer;
  nlohmann::json j;
  j["model"] = {{"kind", to_string(c.kind)}, {"p", c.p}, {"q", c.q}, {"t", c.t}, {"mu", c.mu}};
  j["model"]["filled_bands"] = c.filled_bands ? nlohmann::json(*c.filled_bands) : nlohmann::json(nullptr);
  j["geometry"] = {{"width", lat.width},         {"height", lat.height},        {"layers", lat.layers},
                   {"l_a", c.l_a},               {"l_b", c.l_b},                {"anchor_x", anchor[0]},
                   {"anchor_y", anchor[1]},      {"shape", to_string(c.shape)}, {"radius", c.radius},
                   {"margin_min", c.margin_min}};
  j["optimizer"] = {{"grad_tol", o.grad_tol},
                    {"grad_norm", "frobenius"},
                    {"max_iters", o.max_iters},
                    {"initial_step", o.line_search.initial_step},
                    {"shrink", o.line_search.shrink},
                    {"max_bisections", o.line_search.max_bisections},
                    {"noise", to_string(o.noise_schedule)},
                    {"noise_amplitude", o.noise_amplitude},
                    {"max_noise_events", o.max_noise_events},
                    {"noise_patience", o.noise_patience},
                    {"escape_tol", o.escape_tol},
                    {"plateau_window", o.plateau_window},
                    {"plateau_rel_change", o.plateau_rel_change},
                    {"tr_constrained", o.tr_constrained},
                    {"eps_entropy", o.eps_entropy},
                    {"eps_hamiltonian", o.eps_hamiltonian}};
  j["output"] = {{"dir", c.out_dir},
                 {"name", c.name},
                 {"trace", c.write_trace},
                 {"save_generators", c.save_generators},
                 {"warm_start", c.warm_start}};
  j["run"] = {{"seed", c.seed()}, {"max_dim", c.max_dim}};
  return j;
}

// ---------------------------------------------------------------------------
// Problem setup

struct Problem {
  RunConfig config;
  ModelSpec model;
  Lattice lattice;
  Tripartition tripartition;
  SmootherSupport support;
  ModeMask work;  // A, B and the smoother support, in global mode indices
  GapProblem gap;  // masks relabelled into `work`
  std::vector<Matrix> tr_ops;

  /// Largest dense matrix the run diagonalizes.
  Index estimated_dim() const {
    return std::max(static_cast<Index>(work.size()), 2 * static_cast<Index>(tripartition.a.size()));
  }
};

/// Geometry and masks only; no covariance is built.
inline Problem build_problem(const RunConfig& cfg) {
  cfg.validate();
  const Lattice lat = cfg.lattice();
  const ModelSpec spec = cfg.model();
  const auto anchor = cfg.anchor ? *cfg.anchor : centered_anchor(lat, cfg.l_a, cfg.l_b);
  Tripartition tp = build_tripartition(lat, cfg.l_a, cfg.l_b, anchor, cfg.margin_min);
  SmootherSupport sup = smoother_support(tp, cfg.shape, cfg.radius);
  const ModeMask work = mask_union(mask_union(tp.a, tp.b), sup.combined());
  GapProblem gap{work.relabel(tp.a), work.relabel(tp.b), {}};
  std::vector<Matrix> tr;
  for (const auto& m : sup.masks) {
    gap.supports.push_back(work.relabel(m));
    if (cfg.optimizer.tr_constrained) tr.push_back(tr_operator(lat, m));
  }
  return Problem{cfg, spec, lat, std::move(tp), std::move(sup), work, std::move(gap), std::move(tr)};
}

/// Throws ConfigError when the run is larger than allowed.
inline void check_guardrail(const Problem& p, bool force) {
  if (!force && p.estimated_dim() > p.config.max_dim) {
    throw ConfigError("estimated matrix dimension " + std::to_string(p.estimated_dim()) + " exceeds max_dim " +
                      std::to_string(p.config.max_dim) + "; pass --force to run anyway");
  }
}

// ---------------------------------------------------------------------------
// Generator files for warm restarts. Modes are global lattice indices.

inline nlohmann::json generators_to_json(const Problem& p, const std::vector<Generator>& gens) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : gens) {
    std::vector<Index> modes;
    for (Index local : g.support) modes.push_back(p.work.indices()[static_cast<std::size_t>(local)]);
    std::vector<std::vector<double>> re(static_cast<std::size_t>(g.x.rows())), im(re.size());
    for (Index i = 0; i < g.x.rows(); ++i)
      for (Index j = 0; j < g.x.cols(); ++j) {
        re[static_cast<std::size_t>(i)].push_back(g.x(i, j).real());
        im[static_cast<std::size_t>(i)].push_back(g.x(i, j).imag());
      }
    arr.push_back({{"modes", modes}, {"re", re}, {"im", im}});
  }
  return {{"generators", arr}};
}

inline std::vector<Generator> generators_from_json(const Problem& p, const nlohmann::json& j) {
  std::vector<Generator> out;
  try {
    const auto& arr = j.at("generators");
    if (arr.size() != p.support.masks.size()) throw ConfigError("warm start: generator count does not match the support");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const auto modes = arr[k].at("modes").get<std::vector<Index>>();
      if (!(ModeMask(modes) == p.support.masks[k])) throw ConfigError("warm start: support modes do not match");
      const auto re = arr[k].at("re").get<std::vector<std::vector<double>>>();
      const auto im = arr[k].at("im").get<std::vector<std::vector<double>>>();
      const auto n = static_cast<Index>(modes.size());
      if (static_cast<Index>(re.size()) != n || static_cast<Index>(im.size()) != n) throw ConfigError("warm start: bad matrix size");
      Matrix x(n, n);
      for (Index i = 0; i < n; ++i) {
        const auto& ri = re[static_cast<std::size_t>(i)];
        const auto& ii = im[static_cast<std::size_t>(i)];
        if (static_cast<Index>(ri.size()) != n || static_cast<Index>(ii.size()) != n) throw ConfigError("warm start: bad matrix size");
        for (Index jx = 0; jx < n; ++jx) x(i, jx) = cplx(ri[static_cast<std::size_t>(jx)], ii[static_cast<std::size_t>(jx)]);
      }
      out.push_back({p.work.relabel(p.support.masks[k]), x});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("warm start: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single run

struct RunReport {
  nlohmann::json config;
  Index dim = 0;
  OptimizationReport optimization;
  double bare_h = 0.0;
  double final_h = 0.0;
  double c_plus_estimate = 0.0;
  double runtime_s = 0.0;
  std::string report_path, trace_path, generators_path;

  bool converged() const { return optimization.converged; }

  nlohmann::json to_json() const {
    const auto& o = optimization;
    auto parts = [](const MarkovGapParts& m) {
      return nlohmann::json{{"entropy_a", m.entropy_a},
                            {"entropy_b", m.entropy_b},
                            {"entropy_ab", m.entropy_ab},
                            {"reflected_entropy", m.reflected_entropy},
                            {"mutual_information", m.mutual_information},
                            {"markov_gap", m.markov_gap}};
    };
    nlohmann::json saddles = nlohmann::json::array();
    for (const auto& s : o.saddle_events)
      saddles.push_back({{"iteration", s.iteration}, {"h", s.h}, {"grad_norm", s.grad_norm}, {"kind", s.kind}});
    nlohmann::json j;
    j["config"] = config;
    j["units"] = "nats; *_log2 fields are in units of log 2";
    j["dimension"] = dim;
    j["bare_h"] = bare_h;
    j["bare_h_log2"] = bare_h / std::numbers::ln2;
    j["final_h"] = final_h;
    j["final_h_log2"] = final_h / std::numbers::ln2;
    j["c_plus_estimate"] = c_plus_estimate;
    j["final_parts"] = parts(o.final_parts);
    j["final_grad_norm"] = o.final_grad_norm;
    j["iterations"] = o.iterations;
    j["converged"] = o.converged;
    j["stop_reason"] = o.stop_reason;
    j["noise_events"] = o.noise_events;
    j["saddle_events"] = saddles;
    j["max_tr_defect"] = o.max_tr_defect;
    j["h_trace"] = trace_path;
    j["generators"] = generators_path;
    j["timing"] = {{"runtime_s", runtime_s}};
    j["versions"] = {{"markovgap", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    return j;
  }
};

struct RunOptions {
  bool force = false;
  bool write_files = true;
  std::mutex* io_mutex = nullptr;  // serializes file writes across threads
};

inline RunReport run(const RunConfig& cfg, const RunOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem p = build_problem(cfg);
  check_guardrail(p, opt.force);

  std::vector<Generator> warm;
  if (!cfg.warm_start.empty()) {
    std::ifstream in(cfg.warm_start);
    if (!in) throw ConfigError("warm start: cannot open " + cfg.warm_start);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("warm start: ") + e.what());
    }
    warm = generators_from_json(p, j);
  }

  const Matrix c = covariance_submatrix(p.model, p.lattice, p.work);
  RunReport rep;
  rep.config = config_to_json(cfg);
  rep.dim = p.estimated_dim();
  rep.optimization = optimize(c, p.gap, cfg.optimizer, p.tr_ops, warm);
  rep.optimization.final_covariance.resize(0, 0);
  rep.bare_h = rep.optimization.bare_h;
  rep.final_h = rep.optimization.final_h;
  rep.c_plus_estimate = 3.0 * rep.final_h / std::numbers::ln2;
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (opt.write_files) {
    std::unique_lock<std::mutex> lock;
    if (opt.io_mutex) lock = std::unique_lock<std::mutex>(*opt.io_mutex);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    rep.report_path = (dir / (cfg.name + ".json")).string();
    if (cfg.write_trace) {
      rep.trace_path = (dir / (cfg.name + "_trace.csv")).string();
      std::ofstream t(rep.trace_path);
      write_trace_csv(t, rep.optimization);
    }
    if (cfg.save_generators && !p.support.empty()) {
      rep.generators_path = (dir / (cfg.name + "_generators.json")).string();
      std::ofstream g(rep.generators_path);
      g << generators_to_json(p, rep.optimization.generators).dump() << '\n';
    }
    std::ofstream r(rep.report_path);
    r << rep.to_json().dump(2) << '\n';
    if (!r) throw NumericError("cannot write report " + rep.report_path);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string value;
  double bare_h = std::numeric_limits<double>::quiet_NaN();
  double final_h = std::numeric_limits<double>::quiet_NaN();
  Index iterations = 0;
  bool converged = false;
  double runtime_s = 0.0;
  std::string error;
};

/// Config of one sweep row. L_A sets both block sizes.
inline RunConfig sweep_config(const RunConfig& base, const std::string& key, const std::string& value) {
  RunConfig c = base;
  if (key == "R") {
    c.radius = detail::parse_value<Index>("sweep", "R", value);
  } else if (key == "L_A") {
    c.l_a = c.l_b = detail::parse_value<Index>("sweep", "L_A", value);
  } else if (key == "shape") {
    c.shape = parse_shape(value);
  } else {
    throw ConfigError("sweep: key must be R, L_A or shape, got '" + key + "'");
  }
  c.name = base.name + "_" + key + "_" + value;
  return c;
}

inline std::vector<SweepRow> sweep(const RunConfig& base, const std::string& key,
                                   const std::vector<std::string>& values, int jobs = 1,
                                   const RunOptions& opt = {}) {
  if (key != "R" && key != "L_A" && key != "shape") {
    throw ConfigError("sweep: key must be R, L_A or shape, got '" + key + "'");
  }
  if (jobs < 1) throw ConfigError("sweep: jobs must be >= 1");
  std::vector<SweepRow> rows(values.size());
  std::mutex io;
  RunOptions row_opt = opt;
  row_opt.io_mutex = &io;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SweepRow& row = rows[i];
      row.value = values[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const RunReport r = run(sweep_config(base, key, values[i]), row_opt);
        row.bare_h = r.bare_h;
        row.final_h = r.final_h;
        row.iterations = r.optimization.iterations;
        row.converged = r.converged();
        if (!row.converged) row.error = "not converged: " + r.optimization.stop_reason;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n_threads = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(values.size(), 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline void write_sweep_csv(std::ostream& os, const std::string& key, const std::vector<SweepRow>& rows) {
  os << key << ",bare_h,final_h,bare_h_log2,final_h_log2,iterations,converged,runtime_s,error\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << csv_escape(r.value) << ',' << r.bare_h << ',' << r.final_h << ',' << r.bare_h / std::numbers::ln2 << ','
       << r.final_h / std::numbers::ln2 << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.runtime_s
       << ',' << csv_escape(r.error) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Validation diagnostics

struct Check {
  std::string name;
  bool passed = false;
  std::string message;
};

struct Diagnostics {
  std::vector<Check> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

inline constexpr double kPurityTol = 1e-8;
inline constexpr double kTrSymmetryTol = 1e-9;

namespace detail {

/// Number of occupied bands if it is the same at every k, else nullopt.
inline std::optional<Index> uniform_filling(const BlochSolution& sol) {
  std::optional<Index> n;
  for (const auto& e : sol.energies) {
    const auto occ = occupied_bands(sol.spec, e);
    const auto k = static_cast<Index>(std::count(occ.begin(), occ.end(), true));
    if (n && *n != k) return std::nullopt;
    n = k;
  }
  return n;
}

inline std::string signed_int(int v) { return (v > 0 ? "+" : "") + std::to_string(v); }

}  // namespace detail

/// Cheap checks of a config: geometry, filling, Chern numbers and time
/// reversal. At most one covariance is built.
inline Diagnostics validate(const RunConfig& cfg) {
  Diagnostics d;
  auto add = [&](std::string name, bool ok, std::string msg) { d.checks.push_back({std::move(name), ok, std::move(msg)}); };

  try {
    cfg.validate();
    add("config", true, "ok");
  } catch (const std::exception& e) {
    add("config", false, e.what());
    return d;
  }

  std::optional<Problem> prob;
  try {
    prob = build_problem(cfg);
    std::ostringstream m;
    m << "lattice " << prob->lattice.width << "x" << prob->lattice.height << "x" << prob->lattice.layers << ", margin "
      << prob->tripartition.margin() << ", support " << prob->support.combined().size() << " modes, dimension "
      << prob->estimated_dim() << (prob->estimated_dim() > cfg.max_dim ? " (exceeds max_dim; run needs --force)" : "");
    add("geometry", true, m.str());
  } catch (const std::exception& e) {
    add("geometry", false, e.what());
  }

  const ModelSpec spec = cfg.model();
  const Lattice lat = cfg.lattice();
  bool gapped = true;
  std::vector<Index> filled(static_cast<std::size_t>(spec.n_layers()), 0);
  for (Index l = 0; l < spec.n_layers(); ++l) {
    const BlochSolution sol = solve_bands(spec.layer(l), lat);
    const auto n = detail::uniform_filling(sol);
    if (!n) {
      gapped = false;
      add("purity", false,
          "layer " + std::to_string(l) + ": mu lies inside a band, the filled set is not a band projector");
      continue;
    }
    filled[static_cast<std::size_t>(l)] = *n;
  }
  if (gapped) {
    if (lat.n_modes() <= cfg.max_dim) {
      const double defect = covariance_real_space(spec, lat).purity_defect();
      std::ostringstream m;
      m << "max|C^2 - C| = " << defect;
      add("purity", defect <= kPurityTol, m.str());
    } else {
      add("purity", true, "filled set is a band projector at every k (full covariance above max_dim, not built)");
    }
  }

  for (Index l = 0; l < spec.n_layers(); ++l) {
    const std::string label = "chern layer " + std::to_string(l);
    const Index n = filled[static_cast<std::size_t>(l)];
    if (!gapped) {
      add(label, false, "skipped: gapless");
      continue;
    }
    try {
      // An empty or full band set carries no Chern number.
      const int chern = n == 0 || n == spec.q ? 0 : chern_number(solve_bands(spec.layer(l), lat), lowest_bands(n)).chern;
      std::string msg = detail::signed_int(chern);
      bool ok = true;
      if (!cfg.expected_chern.empty()) {
        const int want = cfg.expected_chern[static_cast<std::size_t>(l)];
        ok = chern == want;
        msg += ok ? ": pass" : ": expected " + detail::signed_int(want);
      }
      add(label, ok, msg);
    } catch (const std::exception& e) {
      add(label, false, e.what());
    }
  }

  if (cfg.kind == ModelKind::topological_insulator && prob) {
    try {
      const Matrix c = covariance_submatrix(spec, lat, prob->work);
      const double defect = tr_defect(c, tr_operator(lat, prob->work));
      std::ostringstream m;
      m << "defect " << defect;
      add("tr_symmetry", defect <= kTrSymmetryTol, m.str());
    } catch (const std::exception& e) {
      add("tr_symmetry", false, e.what());
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Band export

inline void write_bands_csv(std::ostream& os, const ModelSpec& spec, Index grid, const Lattice& lat) {
  os << "layer,ix,iy,kx,ky";
  for (Index b = 0; b < spec.q; ++b) os << ",e" << b;
  os << '\n';
  os.precision(17);
  for (Index l = 0; l < spec.n_layers(); ++l) {
    const BlochSolution sol = grid > 0 ? solve_bands(spec.layer(l), grid) : solve_bands(spec.layer(l), lat);
    for (Index ix = 0; ix < sol.nx(); ++ix)
      for (Index iy = 0; iy < sol.ny(); ++iy) {
        os << l << ',' << ix << ',' << iy << ',' << sol.kx[static_cast<std::size_t>(ix)] << ','
           << sol.ky[static_cast<std::size_t>(iy)];
        const RealVector& e = sol.energies[sol.at(ix, iy)];
        for (Index b = 0; b < e.size(); ++b) os << ',' << e(b);
        os << '\n';
      }
  }
}

// ---------------------------------------------------------------------------
// Oracle cross-check: Gaussian formalism against dense many-body states.

struct OracleCheckResult {
  int states = 0;
  double max_err_entropy = 0.0;  // over S(A), S(B), S(AB)
  double max_err_mutual_information = 0.0;
  double max_err_reflected = 0.0;
  double max_err_markov_gap = 0.0;
  double toric_h = 0.0;
  double tolerance = 1e-6;
  double toric_tolerance = 1e-10;

  double max_err() const {
    return std::max({max_err_entropy, max_err_mutual_information, max_err_reflected, max_err_markov_gap});
  }
  bool gaussian_passed() const { return max_err() <= tolerance; }
  bool toric_passed() const { return std::abs(toric_h) <= toric_tolerance; }
  bool passed() const { return gaussian_passed() && toric_passed(); }
};

/// `n_states` seeded random Slater states on 6 to 8 modes with random
/// tripartitions, plus the toric-code state.
inline OracleCheckResult oracle_check(std::uint64_t seed, int n_states = 50) {
  sampling::Rng rng(seed);
  OracleCheckResult r;
  r.states = n_states;
  for (int s = 0; s < n_states; ++s) {
    const Index n = 6 + static_cast<Index>(rng() % 3);
    const Index particles = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(n - 1));
    const Matrix psi = sampling::random_orbitals(rng, n, particles);
    const auto [a, b] = sampling::random_split(rng, n);
    const oracle::DenseGapParts dense = oracle::dense_markov_gap_parts(oracle::slater_statevector(psi), a, b);
    const MarkovGapParts g = markov_gap_parts(sampling::slater_covariance(psi), a, b);
    r.max_err_entropy = std::max({r.max_err_entropy, std::abs(dense.entropy_a - g.entropy_a),
                                  std::abs(dense.entropy_b - g.entropy_b), std::abs(dense.entropy_ab - g.entropy_ab)});
    r.max_err_mutual_information =
        std::max(r.max_err_mutual_information, std::abs(dense.mutual_information - g.mutual_information));
    r.max_err_reflected = std::max(r.max_err_reflected, std::abs(dense.reflected_entropy - g.reflected_entropy));
    r.max_err_markov_gap = std::max(r.max_err_markov_gap, std::abs(dense.markov_gap - g.markov_gap));
  }
  const oracle::ToricSots t = oracle::toric_sots_state();
  r.toric_h = oracle::dense_markov_gap(t.state, t.a, t.b);
  return r;
}

}  // namespace markovgap
