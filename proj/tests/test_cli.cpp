#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <fmt/format.h>

#include "ltvchase/cbc.hpp"
#include "ltvchase/config.hpp"
#include "ltvchase/experiment.hpp"
#include "ltvchase/lemma1.hpp"
#include "ltvchase/plot.hpp"
#include "ltvchase/trace_io.hpp"

using namespace ltvchase;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "ltvchase_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two-mode jump system with a short horizon; cheap controllers only unless
// the test adds a cbc entry.
const char* kSmallConfig = R"({
  "name": "small",
  "plant": {
    "type": "mjls",
    "modes": [
      {"A": [[1.5, 1.0], [0.0, 0.5]], "B": [[0.0], [1.0]]},
      {"A": [[0.6, 0.0], [0.1, 1.2]], "B": [[1.0], [1.0]]}
    ],
    "transition": [[0.8, 0.2], [0.1, 0.9]]
  },
  "disturbance": {"type": "finite_set", "atoms": [[-10, -10], [-3, -3], [3, 3]], "zero_tail": 3},
  "W": 10,
  "horizon": 12,
  "seeds": [1, 2],
  "controllers": [
    {"label": "ols5", "type": "ols_lqr", "window": 5},
    {"label": "open_loop", "type": "open_loop"}
  ]
})";

ExperimentConfig small_config() { return parse_config_text(kSmallConfig, "small.json"); }

nlohmann::json small_json() { return nlohmann::json::parse(kSmallConfig); }

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "x.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing fills defaults") {
  const auto cfg = small_config();
  CHECK(cfg.name == "small");
  CHECK(cfg.horizon == 12);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(cfg.W == 10.0);
  CHECK(cfg.theta_box.lo == -2.0);
  CHECK(cfg.theta_box.hi == 3.0);
  CHECK(cfg.weights.Q.isApprox(Matrix::Identity(2, 2)));
  CHECK(cfg.weights.R.isApprox(Matrix::Identity(1, 1)));
  REQUIRE(cfg.controllers.size() == 2);
  const auto* ols = std::get_if<OlsLqrController>(&cfg.controllers[0].spec);
  REQUIRE(ols != nullptr);
  CHECK(ols->window == 5);
  CHECK(ols->forgetting == 0.95);
  CHECK(cfg.disturbance.zero_tail == 3);
  CHECK(cfg.disturbance.bound() == 10.0);
}

TEST_CASE("config errors name the field") {
  auto j = small_json();
  j["horizon"] = 0;
  CHECK(error_of(j.dump()).find("horizon") != std::string::npos);

  j = small_json();
  j["W"] = -1;
  CHECK(error_of(j.dump()).find("W") != std::string::npos);

  j = small_json();
  j["controllers"] = nlohmann::json::array();
  CHECK(error_of(j.dump()).find("controllers") != std::string::npos);

  j = small_json();
  j["plant"]["modes"][0]["B"] = {{0.0}};
  CHECK(error_of(j.dump()).find("plant.modes[0].B") != std::string::npos);

  j = small_json();
  j["controllers"][0]["windw"] = 3;
  CHECK(error_of(j.dump()).find("controllers[0].windw") != std::string::npos);

  j = small_json();
  j["controllers"][1]["label"] = "ols5";
  CHECK(error_of(j.dump()).find("duplicate") != std::string::npos);

  j = small_json();
  j["W"] = 5;  // atoms reach 10
  CHECK(!error_of(j.dump()).empty());

  j = small_json();
  j["plant"]["transition"] = {{0.5, 0.2}, {0.1, 0.9}};
  CHECK(!error_of(j.dump()).empty());

  j = small_json();
  j["controllers"][0]["type"] = "pid";
  CHECK(error_of(j.dump()).find("unknown controller type") != std::string::npos);
}

TEST_CASE("config syntax errors carry line and column") {
  const std::string msg = error_of("{\n  \"W\": 1,\n  oops\n}");
  CHECK(msg.find("x.json:3:") != std::string::npos);
}

TEST_CASE("config round trip and hash") {
  const auto cfg = small_config();
  const auto again = parse_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  auto moved = cfg;
  moved.output_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(cfg));
  auto changed = cfg;
  changed.horizon = 13;
  CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("overrides") {
  auto cfg = small_config();
  ConfigOverrides o;
  o.seed = 7;
  o.controller = "open_loop";
  o.horizon = 5;
  o.output_dir = "o";
  apply_overrides(cfg, o);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
  REQUIRE(cfg.controllers.size() == 1);
  CHECK(cfg.controllers[0].label == "open_loop");
  CHECK(cfg.horizon == 5);
  CHECK(cfg.output_dir == "o");

  auto bad = small_config();
  ConfigOverrides none;
  none.controller = "cbc";
  CHECK_THROWS_AS(apply_overrides(bad, none), ConfigError);

  auto zero = small_config();
  ConfigOverrides h0;
  h0.horizon = 0;
  CHECK_THROWS_AS(apply_overrides(zero, h0), ConfigError);

  auto j = small_json();
  j["controllers"].push_back({{"label", "cbc"}, {"type", "cbc_lqr"}});
  auto with_cbc = parse_config(j);
  ConfigOverrides n;
  n.samples = 17;
  apply_overrides(with_cbc, n);
  CHECK(std::get<CbcLqrController>(with_cbc.controllers.back().spec).samples == 17);
}

TEST_CASE("bundled configs load") {
  const fs::path root = LTVCHASE_SOURCE_DIR;
  const auto mjls = load_config((root / "configs/mjls.json").string());
  CHECK(mjls.horizon == 100);
  CHECK(mjls.W == 10.0);
  CHECK(mjls.disturbance.zero_tail == 10);
  std::vector<std::string> labels;
  for (const auto& c : mjls.controllers) labels.push_back(c.label);
  CHECK(labels == std::vector<std::string>{"cbc", "ols5", "ols10", "ols20", "open_loop"});
  CHECK(mjls.seeds.size() == 2);

  const auto ltv = load_config((root / "configs/ltv.json").string());
  CHECK(ltv.horizon == 150);
  CHECK(std::holds_alternative<LtvFormulaPlant>(ltv.plant));
  CHECK(std::holds_alternative<ZeroDisturbance>(ltv.disturbance.kind));
  const auto* cbc = std::get_if<CbcLqrController>(&ltv.controllers[0].spec);
  REQUIRE(cbc != nullptr);
  REQUIRE(cbc->exploration.has_value());
  CHECK(*cbc->exploration == 1.0);
  CHECK(std::holds_alternative<RandomInputController>(ltv.controllers[1].spec));
}

TEST_CASE("trace csv schema") {
  CHECK(trace_columns(2, 1) ==
        std::vector<std::string>{"t", "mode", "x_0", "x_1", "u_0", "w_0", "w_1", "norm_x", "norm_u", "hyp_step_F",
                                 "true_step_F", "cum_hyp_path", "cum_true_var", "dare_status", "consistent"});
  CHECK(trace_filename("ols5", 3) == "trace_ols5_3.csv");
}

TEST_CASE("trace csv round trip is exact") {
  const auto cfg = small_config();
  const auto spec = make_run_spec(cfg, cfg.controllers[0], 2);
  const auto trace = run_closed_loop(spec);
  const auto dir = scratch("roundtrip");
  const auto path = (dir / "t.csv").string();
  write_trace_csv(trace, path);
  const auto back = read_trace_csv(path);
  REQUIRE(back.steps.size() == trace.steps.size());
  CHECK(back.n == 2);
  CHECK(back.m == 1);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& a = trace.steps[i];
    const auto& b = back.steps[i];
    CHECK(a.t == b.t);
    CHECK(a.mode == b.mode);
    CHECK(a.x == b.x);
    CHECK(a.u == b.u);
    CHECK(a.w == b.w);
    CHECK(a.norm_x == b.norm_x);
    CHECK(a.hyp_step == b.hyp_step);
    CHECK(a.cum_true_var == b.cum_true_var);
    CHECK(a.dare_status == b.dare_status);
    CHECK(a.consistent == b.consistent);
  }
  CHECK(trace_csv(back) == slurp(path));
}

TEST_CASE("malformed trace files report the line") {
  const auto dir = scratch("malformed");
  const auto path = dir / "bad.csv";
  {
    std::ofstream out(path);
    out << fmt::format("{}\n", fmt::join(trace_columns(1, 1), ","));
    out << "0,0,1,0,0,1,0,0,0,0,0,0,1\n";
    out << "1,0,abc,0,0,1,0,0,0,0,0,0,1\n";
  }
  try {
    read_trace_csv(path.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "t,mode,x\n";
  }
  CHECK_THROWS_AS(read_trace_csv(path.string()), Error);
  CHECK_THROWS_AS(read_trace_csv((dir / "missing.csv").string()), Error);
}

TEST_CASE("run_experiment writes traces and a consistent summary") {
  auto cfg = small_config();
  const auto dir = scratch("experiment");
  cfg.output_dir = dir.string();
  const auto res = run_experiment(cfg, 2);
  REQUIRE(res.summaries.size() == 4);
  for (const char* f : {"trace_ols5_1.csv", "trace_ols5_2.csv", "trace_open_loop_1.csv", "trace_open_loop_2.csv",
                        "summary.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto summary = read_summary_json(res.summary_path);
  REQUIRE(summary.size() == 4);
  for (const auto& s : summary) {
    const auto trace = read_trace_csv((dir / s.trace_file).string());
    double mx = 0.0;
    for (const auto& r : trace.steps) mx = std::max(mx, r.norm_x);
    CHECK(s.max_state_norm == mx);
    CHECK(s.final_state_norm == trace.steps.back().norm_x);
    CHECK(s.cum_hyp_path == trace.steps.back().cum_hyp_path);
    CHECK(s.consistency_violations == 0);
  }
  CHECK(summary[0].label == "ols5");
  CHECK(summary[0].seed == 1);
  CHECK(summary[0].controller == "ols_lqr");
  CHECK(summary[3].label == "open_loop");
  CHECK(summary[3].seed == 2);
}

TEST_CASE("run_experiment output does not depend on the worker count") {
  auto j = small_json();
  j["horizon"] = 6;
  j["seeds"] = {3};
  j["controllers"].push_back({{"label", "cbc"}, {"type", "cbc_lqr"}, {"samples", 30}});
  auto cfg = parse_config(j);
  const auto a = scratch("workers_a");
  const auto b = scratch("workers_b");
  cfg.output_dir = a.string();
  run_experiment(cfg, 1);
  cfg.output_dir = b.string();
  run_experiment(cfg, 3);
  for (const char* f : {"trace_ols5_3.csv", "trace_open_loop_3.csv", "trace_cbc_3.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("run_experiment rejects disturbances larger than W") {
  auto j = small_json();
  j["disturbance"] = {{"type", "uniform_box"}, {"half_width", 1.0}};
  j["W"] = 1.0;
  auto cfg = parse_config(j);
  cfg.disturbance.kind = UniformBoxDisturbance{5.0};
  CHECK_THROWS_AS(run_experiment(cfg, 1, false), ConfigError);
}

TEST_CASE("check_partial_paths") {
  // selections 0 -> 1 -> 1 -> 3 on a line, oracle constant
  std::vector<Vector> sel, opt;
  for (double v : {0.0, 1.0, 1.0, 3.0}) sel.push_back(Vector::Constant(1, v));
  for (int i = 0; i < 4; ++i) opt.push_back(Vector::Zero(1));
  auto c = check_partial_paths(sel, opt, 1, 0.0, 0.0, 0.0);
  CHECK(c.intervals == 3);  // (1,2) (1,3) (2,3)
  CHECK(c.worst_gap == doctest::Approx(2.0));
  CHECK(c.violations == 2);
  c = check_partial_paths(sel, opt, 1, 1.0, 0.5, 0.0);  // bound 2
  CHECK(c.worst_gap == doctest::Approx(0.0));
  CHECK(c.violations == 0);
  CHECK_THROWS_AS(check_partial_paths(sel, {opt[0]}, 1, 0, 0, 0), BadDims);
}

TEST_CASE("random request sequences stay in the box and are nonempty") {
  const BoxBounds box{-1.0, 1.0};
  const auto seq = random_request_sequence(3, 10, box, 42);
  REQUIRE(seq.size() == 10);
  int nested = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto ball = chebyshev_center(seq[t]);
    CHECK(ball.radius > 0.0);
    CHECK(contains(box_polytope(box, 3), ball.center));
    if (t > 0 && contains(seq[t - 1], ball.center)) ++nested;
  }
  CHECK(nested < 9);
  CHECK(random_request_sequence(3, 10, box, 42).size() == 10);
}

TEST_CASE("lemma1 harness") {
  Lemma1Options o;
  o.dim = 2;
  o.instances = 2;
  o.horizon = 4;
  o.samples = 200;
  const auto r = lemma1_test(o);
  CHECK(r.failures == 0);
  CHECK(r.intervals == 2 * 3 * 2);  // C(4, 2) - 3 intervals starting at 0 are excluded
  CHECK(r.diameter == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(r.kappa == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.tolerance == doctest::Approx(0.05 * 2 * r.diameter));
  CHECK(r.pass());
  CHECK(format_report(r).find("PASS") != std::string::npos);

  o.horizon = 1;
  const auto trivial = lemma1_test(o);
  CHECK(trivial.intervals == 0);
  CHECK(trivial.pass());

  o.dim = 7;
  CHECK_THROWS_AS(lemma1_test(o), ConfigError);
  o.dim = 2;
  o.horizon = 21;
  CHECK_THROWS_AS(lemma1_test(o), ConfigError);
}

TEST_CASE("offline optimum on nested shrinking boxes") {
  // 1-D boxes [k, 10] shrinking toward 10: OPT walks from the anchor to the last box
  std::vector<Polytope> req;
  for (int k = 1; k <= 5; ++k) {
    Polytope p(1);
    p.add(Halfspace(Vector::Constant(1, 1.0), 10.0));
    p.add(Halfspace(Vector::Constant(1, -1.0), -2.0 * k));
    req.push_back(p);
  }
  const auto opt = offline_optimal(req, Vector::Zero(1));
  CHECK(opt.cost == doctest::Approx(10.0).epsilon(1e-5));
  std::vector<Vector> sel{Vector::Zero(1)};
  WorkHistory h(Vector::Zero(1), 10);
  for (const auto& r : req) {
    h.append(r);
    sel.push_back(select_hypothesis(h, 400, 9).projected);
  }
  const auto c = check_partial_paths(sel, opt.trajectory, 1, 2.0, 1.0, 0.0);
  CHECK(c.violations == 0);
  CHECK(c.worst_gap < -1.0);
}

TEST_CASE("plot renders three panels") {
  auto cfg = small_config();
  const auto dir = scratch("plot");
  cfg.output_dir = dir.string();
  run_experiment(cfg, 1);
  const auto out = dir / "fig.svg";
  emit_plot({(dir / "trace_ols5_1.csv").string(), (dir / "trace_open_loop_1.csv").string()}, out.string());
  const std::string svg = slurp(out);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("State norm") != std::string::npos);
  CHECK(svg.find("Cumulative hypothesis path") != std::string::npos);
  CHECK(svg.find("True model") != std::string::npos);
  CHECK(svg.find("ols5_1") != std::string::npos);
  CHECK(svg.find("open_loop_1") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  CHECK(polylines == 6);
}

TEST_CASE("plot log axis extends for divergent traces") {
  ClosedLoopTrace t;
  t.n = 1;
  t.m = 1;
  for (int k = 0; k <= 10; ++k) {
    StepRecord r;
    r.t = k;
    r.norm_x = std::pow(10.0, k);
    t.steps.push_back(r);
  }
  const std::string svg = render_plot_svg({{"open", t}});
  CHECK(svg.find(">1e10<") != std::string::npos);
  CHECK(svg.find(">1e0<") != std::string::npos);
  CHECK(svg.find("True model variation") != std::string::npos);
}

TEST_CASE("plot errors") {
  CHECK_THROWS_AS(render_plot_svg({}), Error);
  CHECK_THROWS_AS(emit_plot({}, "x.svg"), Error);
  ClosedLoopTrace a, b;
  a.steps.resize(5);
  b.steps.resize(6);
  for (int k = 0; k < 6; ++k) {
    if (k < 5) a.steps[k].t = k;
    b.steps[k].t = k;
  }
  CHECK_THROWS_AS(render_plot_svg({{"a", a}, {"b", b}}), Error);
  CHECK(series_label("/x/y/trace_cbc_3.csv") == "cbc_3");
}
