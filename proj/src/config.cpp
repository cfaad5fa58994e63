#include "ltvchase/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace ltvchase {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(fmt::format("field '{}': {}", path, msg));
}

// Object view that remembers which keys were read so leftovers can be
// reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    if (!j_.contains(key)) fail(at(key), "missing");
    used_.insert(key);
    return j_.at(key);
  }
  const json* find(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) fail(at(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Vector as_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], fmt::format("{}[{}]", path, i));
  return v;
}

Matrix as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = j.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].empty()) fail(fmt::format("{}[{}]", path, i), "expected a non-empty row");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) fail(fmt::format("{}[{}]", path, i), fmt::format("expected {} entries", cols));
  }
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols; ++k) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          as_number(j[i][k], fmt::format("{}[{}][{}]", path, i, k));
    }
  }
  return M;
}

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ParamPoint parse_model(const json& j, const std::string& path) {
  Fields f(j, path);
  const Matrix A = as_matrix(f.get("A"), f.at("A"));
  const Matrix B = as_matrix(f.get("B"), f.at("B"));
  f.finish();
  if (A.rows() != A.cols()) fail(f.at("A"), "must be square");
  if (B.rows() != A.rows()) fail(f.at("B"), fmt::format("must have {} rows", A.rows()));
  return ParamPoint(A, B);
}

std::vector<ParamPoint> parse_models(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of models");
  std::vector<ParamPoint> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_model(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

PlantModel parse_plant(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = as_string(f.get("type"), f.at("type"));
  PlantModel plant;
  if (type == "mjls") {
    MjlsPlant p;
    p.modes = parse_models(f.get("modes"), f.at("modes"));
    p.transition = as_matrix(f.get("transition"), f.at("transition"));
    if (const auto* m = f.find("initial_mode")) p.initial_mode = static_cast<int>(as_integer(*m, f.at("initial_mode")));
    plant = p;
  } else if (type == "ltv_formula") {
    plant = LtvFormulaPlant{};
  } else if (type == "scripted") {
    plant = ScriptedPlant{parse_models(f.get("thetas"), f.at("thetas"))};
  } else {
    fail(f.at("type"), fmt::format("unknown plant type '{}' (mjls, ltv_formula, scripted)", type));
  }
  f.finish();
  try {
    validate_plant(plant);
  } catch (const BadDims& e) {
    fail(path, e.what());
  }
  return plant;
}

DisturbanceModel parse_disturbance(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = as_string(f.get("type"), f.at("type"));
  DisturbanceModel d;
  if (type == "finite_set") {
    FiniteSetDisturbance fs;
    const json& atoms = f.get("atoms");
    if (!atoms.is_array() || atoms.empty()) fail(f.at("atoms"), "expected a non-empty array of vectors");
    for (std::size_t i = 0; i < atoms.size(); ++i) fs.atoms.push_back(as_vector(atoms[i], fmt::format("{}[{}]", f.at("atoms"), i)));
    d.kind = fs;
  } else if (type == "uniform_box") {
    d.kind = UniformBoxDisturbance{as_number(f.get("half_width"), f.at("half_width"))};
  } else if (type == "zero") {
    d.kind = ZeroDisturbance{};
  } else if (type == "sign_adversary") {
    d.kind = SignAdversary{as_number(f.get("magnitude"), f.at("magnitude"))};
  } else {
    fail(f.at("type"), fmt::format("unknown disturbance type '{}' (finite_set, uniform_box, zero, sign_adversary)", type));
  }
  if (const auto* z = f.find("zero_tail")) d.zero_tail = static_cast<int>(as_integer(*z, f.at("zero_tail")));
  f.finish();
  if (d.zero_tail < 0) fail(f.at("zero_tail"), "must be >= 0");
  if (d.bound() < 0.0) fail(path, "disturbance magnitude must be >= 0");
  return d;
}

ControllerEntry parse_controller(const json& j, const std::string& path, int default_samples, int default_window) {
  Fields f(j, path);
  ControllerEntry entry;
  entry.label = as_string(f.get("label"), f.at("label"));
  if (entry.label.empty()) fail(f.at("label"), "must not be empty");
  for (char c : entry.label) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      fail(f.at("label"), "use letters, digits, '_' or '-' only");
    }
  }
  const std::string type = as_string(f.get("type"), f.at("type"));
  if (type == "cbc_lqr") {
    CbcLqrController c;
    c.samples = default_samples;
    c.window_cap = default_window;
    if (const auto* v = f.find("samples")) c.samples = static_cast<int>(as_integer(*v, f.at("samples")));
    if (const auto* v = f.find("window_cap")) c.window_cap = static_cast<int>(as_integer(*v, f.at("window_cap")));
    if (const auto* v = f.find("exploration")) c.exploration = as_number(*v, f.at("exploration"));
    if (const auto* v = f.find("antithetic")) c.antithetic = as_bool(*v, f.at("antithetic"));
    if (const auto* v = f.find("common_directions")) c.common_directions = as_bool(*v, f.at("common_directions"));
    if (const auto* v = f.find("control_variate")) c.control_variate = as_bool(*v, f.at("control_variate"));
    entry.spec = c;
  } else if (type == "ols_lqr") {
    OlsLqrController c;
    if (const auto* v = f.find("window")) c.window = static_cast<int>(as_integer(*v, f.at("window")));
    if (const auto* v = f.find("forgetting")) c.forgetting = as_number(*v, f.at("forgetting"));
    if (const auto* v = f.find("ridge")) c.ridge = as_number(*v, f.at("ridge"));
    entry.spec = c;
  } else if (type == "open_loop") {
    entry.spec = OpenLoopController{};
  } else if (type == "fixed_gain") {
    entry.spec = FixedGainController{as_matrix(f.get("K"), f.at("K"))};
  } else if (type == "random_input") {
    RandomInputController c;
    if (const auto* v = f.find("magnitude")) c.magnitude = as_number(*v, f.at("magnitude"));
    entry.spec = c;
  } else {
    fail(f.at("type"),
         fmt::format("unknown controller type '{}' (cbc_lqr, ols_lqr, open_loop, fixed_gain, random_input)", type));
  }
  f.finish();
  return entry;
}

json controller_json(const ControllerEntry& entry) {
  json j;
  j["label"] = entry.label;
  j["type"] = controller_kind(entry.spec);
  std::visit(Overloaded{
                 [&](const CbcLqrController& c) {
                   j["samples"] = c.samples;
                   j["window_cap"] = c.window_cap;
                   if (c.exploration) j["exploration"] = *c.exploration;
                   j["antithetic"] = c.antithetic;
                   j["common_directions"] = c.common_directions;
                   j["control_variate"] = c.control_variate;
                 },
                 [&](const OlsLqrController& c) {
                   j["window"] = c.window;
                   j["forgetting"] = c.forgetting;
                   j["ridge"] = c.ridge;
                 },
                 [](const OpenLoopController&) {},
                 [&](const FixedGainController& c) { j["K"] = matrix_json(c.K); },
                 [&](const RandomInputController& c) { j["magnitude"] = c.magnitude; },
             },
             entry.spec);
  return j;
}

json model_json(const ParamPoint& th) {
  return json{{"A", matrix_json(th.A())}, {"B", matrix_json(th.B())}};
}

std::size_t line_of(const std::string& text, std::size_t byte, std::size_t& column) {
  std::size_t line = 1;
  std::size_t last_newline = 0;
  const auto end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      last_newline = i + 1;
    }
  }
  column = end - last_newline;
  if (column == 0) column = 1;
  return line;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (horizon < 1) fail("horizon", "must be >= 1");
  if (!(W > 0.0)) fail("W", "must be > 0");
  if (controllers.empty()) fail("controllers", "at least one controller is required");
  if (seeds.empty()) fail("seeds", "at least one seed is required");
  if (samples < 1) fail("samples", "must be >= 1");
  if (window_cap < 1) fail("window_cap", "must be >= 1");
  if (!(theta_box.lo < theta_box.hi)) fail("theta_box", "lo must be < hi");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < controllers.size(); ++i) {
    const auto& c = controllers[i];
    if (!labels.insert(c.label).second) fail(fmt::format("controllers[{}].label", i), fmt::format("duplicate label '{}'", c.label));
  }
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) fail("seeds", "duplicate seed");
  for (std::size_t i = 0; i < controllers.size(); ++i) {
    try {
      make_run_spec(*this, controllers[i], seeds.front()).validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(fmt::format("controllers[{}]", i), e.what());
    }
  }
}

ExperimentConfig parse_config(const json& doc) {
  Fields f(doc, "");
  ExperimentConfig cfg;
  if (const auto* v = f.find("name")) cfg.name = as_string(*v, "name");
  cfg.plant = parse_plant(f.get("plant"), "plant");
  if (const auto* v = f.find("disturbance")) cfg.disturbance = parse_disturbance(*v, "disturbance");
  cfg.W = as_number(f.get("W"), "W");
  if (const auto* v = f.find("theta_box")) {
    Fields b(*v, "theta_box");
    cfg.theta_box.lo = as_number(b.get("lo"), "theta_box.lo");
    cfg.theta_box.hi = as_number(b.get("hi"), "theta_box.hi");
    b.finish();
  }
  const int n = plant_state_dim(cfg.plant);
  const int m = plant_input_dim(cfg.plant);
  cfg.weights = LqrWeights::identity(n, m);
  if (const auto* v = f.find("weights")) {
    Fields w(*v, "weights");
    if (const auto* q = w.find("Q")) cfg.weights.Q = as_matrix(*q, "weights.Q");
    if (const auto* r = w.find("R")) cfg.weights.R = as_matrix(*r, "weights.R");
    w.finish();
    try {
      cfg.weights.validate();
    } catch (const BadDims& e) {
      fail("weights", e.what());
    }
  }
  cfg.horizon = static_cast<int>(as_integer(f.get("horizon"), "horizon"));
  if (const auto* v = f.find("seeds")) {
    if (!v->is_array()) fail("seeds", "expected an array of non-negative integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto s = as_integer((*v)[i], fmt::format("seeds[{}]", i));
      if (s < 0) fail(fmt::format("seeds[{}]", i), "must be >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (const auto* v = f.find("x0")) cfg.x0 = as_vector(*v, "x0");
  if (const auto* v = f.find("output_dir")) cfg.output_dir = as_string(*v, "output_dir");
  if (const auto* v = f.find("samples")) cfg.samples = static_cast<int>(as_integer(*v, "samples"));
  if (const auto* v = f.find("window_cap")) cfg.window_cap = static_cast<int>(as_integer(*v, "window_cap"));
  if (const auto* v = f.find("chase_diagnostics")) cfg.chase_diagnostics = as_bool(*v, "chase_diagnostics");
  const json& ctrls = f.get("controllers");
  if (!ctrls.is_array()) fail("controllers", "expected an array");
  for (std::size_t i = 0; i < ctrls.size(); ++i) {
    cfg.controllers.push_back(parse_controller(ctrls[i], fmt::format("controllers[{}]", i), cfg.samples, cfg.window_cap));
  }
  f.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t col = 0;
    const auto line = line_of(text, e.byte, col);
    std::string what = e.what();
    if (const auto pos = what.find("]: "); pos != std::string::npos) what = what.substr(pos + 3);
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, line, col, what));
  }
  try {
    return parse_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  std::visit(Overloaded{
                 [&](const MjlsPlant& p) {
                   json modes = json::array();
                   for (const auto& th : p.modes) modes.push_back(model_json(th));
                   j["plant"] = {{"type", "mjls"},
                                 {"modes", modes},
                                 {"transition", matrix_json(p.transition)},
                                 {"initial_mode", p.initial_mode}};
                 },
                 [&](const LtvFormulaPlant&) { j["plant"] = {{"type", "ltv_formula"}}; },
                 [&](const ScriptedPlant& p) {
                   json thetas = json::array();
                   for (const auto& th : p.thetas) thetas.push_back(model_json(th));
                   j["plant"] = {{"type", "scripted"}, {"thetas", thetas}};
                 },
             },
             cfg.plant);
  json d;
  std::visit(Overloaded{
                 [&](const FiniteSetDisturbance& fs) {
                   d["type"] = "finite_set";
                   d["atoms"] = json::array();
                   for (const auto& a : fs.atoms) d["atoms"].push_back(vector_json(a));
                 },
                 [&](const UniformBoxDisturbance& u) {
                   d["type"] = "uniform_box";
                   d["half_width"] = u.half_width;
                 },
                 [&](const ZeroDisturbance&) { d["type"] = "zero"; },
                 [&](const SignAdversary& s) {
                   d["type"] = "sign_adversary";
                   d["magnitude"] = s.magnitude;
                 },
             },
             cfg.disturbance.kind);
  d["zero_tail"] = cfg.disturbance.zero_tail;
  j["disturbance"] = d;
  j["W"] = cfg.W;
  j["theta_box"] = {{"lo", cfg.theta_box.lo}, {"hi", cfg.theta_box.hi}};
  j["weights"] = {{"Q", matrix_json(cfg.weights.Q)}, {"R", matrix_json(cfg.weights.R)}};
  j["horizon"] = cfg.horizon;
  j["seeds"] = cfg.seeds;
  if (cfg.x0) j["x0"] = vector_json(*cfg.x0);
  j["output_dir"] = cfg.output_dir;
  j["samples"] = cfg.samples;
  j["window_cap"] = cfg.window_cap;
  j["chase_diagnostics"] = cfg.chase_diagnostics;
  j["controllers"] = json::array();
  for (const auto& c : cfg.controllers) j["controllers"].push_back(controller_json(c));
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides) {
  if (overrides.seed) config.seeds = {*overrides.seed};
  if (overrides.horizon) config.horizon = *overrides.horizon;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.samples) {
    config.samples = *overrides.samples;
    for (auto& c : config.controllers) {
      if (auto* cbc = std::get_if<CbcLqrController>(&c.spec)) cbc->samples = *overrides.samples;
    }
  }
  if (overrides.controller) {
    std::vector<ControllerEntry> keep;
    for (const auto& c : config.controllers) {
      if (c.label == *overrides.controller) keep.push_back(c);
    }
    if (keep.empty()) throw ConfigError(fmt::format("--controller: no controller labelled '{}'", *overrides.controller));
    config.controllers = std::move(keep);
  }
  config.validate();
}

RunSpec make_run_spec(const ExperimentConfig& config, const ControllerEntry& controller, std::uint64_t seed) {
  RunSpec spec;
  spec.label = controller.label;
  spec.plant = config.plant;
  spec.disturbance = config.disturbance;
  spec.controller = controller.spec;
  spec.W = config.W;
  spec.theta_box = config.theta_box;
  spec.weights = config.weights;
  spec.horizon = config.horizon;
  spec.seed = seed;
  spec.x0 = config.x0;
  spec.chase_diagnostics = config.chase_diagnostics;
  spec.config_hash = config_hash(config);
  return spec;
}

}  // namespace ltvchase
