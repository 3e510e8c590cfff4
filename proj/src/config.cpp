#include "fossa/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace fossa {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(where + ": expected an array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(where + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

SurfaceMesh parse_mesh(const json& j, const std::string& where) {
  check_keys(j, where, {"nodes", "triangles"});
  SurfaceMesh mesh;
  for (const auto& row : j.at("nodes"))
    mesh.nodes.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
  if (j.contains("triangles"))
    for (const auto& row : j["triangles"])
      mesh.triangles.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
  mesh.validate();
  return mesh;
}

std::vector<std::vector<Monomial>> parse_basis(const json& j, const std::string& where) {
  std::vector<std::vector<Monomial>> basis;
  if (!j.is_array()) throw ConfigError(where + ": expected an array per parameter");
  for (const auto& feats : j) {
    std::vector<Monomial> param;
    for (const auto& m : feats) {
      check_keys(m, where + " monomial", {"c", "px", "py", "pz", "pt"});
      Monomial mono;
      mono.coeff = m.value("c", 1.0);
      mono.px = m.value("px", 0);
      mono.py = m.value("py", 0);
      mono.pz = m.value("pz", 0);
      mono.pt = m.value("pt", 0);
      param.push_back(mono);
    }
    basis.push_back(std::move(param));
  }
  return basis;
}

json basis_to_json(const std::vector<std::vector<Monomial>>& basis) {
  json out = json::array();
  for (const auto& feats : basis) {
    json param = json::array();
    for (const auto& m : feats)
      param.push_back({{"c", m.coeff}, {"px", m.px}, {"py", m.py}, {"pz", m.pz}, {"pt", m.pt}});
    out.push_back(param);
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json mesh_to_json(const SurfaceMesh& mesh) {
  json j;
  j["nodes"] = json::array();
  for (const auto& p : mesh.nodes) j["nodes"].push_back({p.x(), p.y(), p.z()});
  j["triangles"] = json::array();
  for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
  return j;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config",
             {"out_dir", "threads", "timing", "master_seed", "geometry", "ap", "sim", "data",
              "model", "collocation", "sensor_weights", "loss_weights", "train", "hvp", "cg",
              "confidence", "impute", "selection", "experiment"});
  RunConfig cfg;
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.timing = j.value("timing", cfg.timing);
  cfg.master_seed = j.value("master_seed", cfg.master_seed);

  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    check_keys(g, "geometry",
               {"mode", "heart_nodes", "body_nodes", "heart_radius", "body_radius",
                "kernel_scale", "heart_mesh", "body_mesh", "transfer"});
    cfg.geometry.mode = g.value("mode", cfg.geometry.mode);
    cfg.geometry.heart_nodes = g.value("heart_nodes", cfg.geometry.heart_nodes);
    cfg.geometry.body_nodes = g.value("body_nodes", cfg.geometry.body_nodes);
    cfg.geometry.heart_radius = g.value("heart_radius", cfg.geometry.heart_radius);
    cfg.geometry.body_radius = g.value("body_radius", cfg.geometry.body_radius);
    cfg.geometry.kernel_scale = g.value("kernel_scale", cfg.geometry.kernel_scale);
    if (g.contains("heart_mesh")) cfg.geometry.heart_mesh = parse_mesh(g["heart_mesh"], "geometry.heart_mesh");
    if (g.contains("body_mesh")) cfg.geometry.body_mesh = parse_mesh(g["body_mesh"], "geometry.body_mesh");
    if (g.contains("transfer")) cfg.geometry.transfer = parse_matrix(g["transfer"], "geometry.transfer");
  }

  if (j.contains("ap")) {
    const auto& a = j["ap"];
    check_keys(a, "ap", {"diffusivity", "k_r", "a", "e0", "mu1", "mu2"});
    cfg.ap.diffusivity = a.value("diffusivity", cfg.ap.diffusivity);
    cfg.ap.k_r = a.value("k_r", cfg.ap.k_r);
    cfg.ap.a = a.value("a", cfg.ap.a);
    cfg.ap.e0 = a.value("e0", cfg.ap.e0);
    cfg.ap.mu1 = a.value("mu1", cfg.ap.mu1);
    cfg.ap.mu2 = a.value("mu2", cfg.ap.mu2);
  }

  if (j.contains("sim")) {
    const auto& s = j["sim"];
    check_keys(s, "sim", {"dt", "n_steps", "record_stride", "stimulus_nodes"});
    cfg.sim.dt = s.value("dt", cfg.sim.dt);
    cfg.sim.n_steps = s.value("n_steps", cfg.sim.n_steps);
    cfg.sim.record_stride = s.value("record_stride", cfg.sim.record_stride);
    if (s.contains("stimulus_nodes"))
      cfg.sim.stimulus_nodes = s["stimulus_nodes"].get<std::vector<int>>();
  }

  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"mode", "sigma", "noise_seed", "y", "times"});
    cfg.data.mode = d.value("mode", cfg.data.mode);
    cfg.data.sigma = d.value("sigma", cfg.data.sigma);
    cfg.data.noise_seed = d.value("noise_seed", cfg.data.noise_seed);
    if (d.contains("y")) cfg.data.y = parse_matrix(d["y"], "data.y");
    if (d.contains("times")) cfg.data.times = parse_vector(d["times"], "data.times");
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"type", "hidden", "init_seed", "u_basis", "v_basis", "theta0"});
    cfg.model.type = m.value("type", cfg.model.type);
    if (m.contains("hidden")) cfg.model.hidden = m["hidden"].get<std::vector<int>>();
    cfg.model.init_seed = m.value("init_seed", cfg.model.init_seed);
    if (m.contains("u_basis")) cfg.model.u_basis = parse_basis(m["u_basis"], "model.u_basis");
    if (m.contains("v_basis")) cfg.model.v_basis = parse_basis(m["v_basis"], "model.v_basis");
    if (m.contains("theta0")) cfg.model.theta0 = parse_vector(m["theta0"], "model.theta0");
  }

  if (j.contains("collocation")) {
    const auto& c = j["collocation"];
    check_keys(c, "collocation", {"count", "seed", "t_lo", "t_hi"});
    cfg.collocation.count = c.value("count", cfg.collocation.count);
    cfg.collocation.seed = c.value("seed", cfg.collocation.seed);
    if (c.contains("t_lo")) cfg.collocation.t_lo = c["t_lo"].get<double>();
    if (c.contains("t_hi")) cfg.collocation.t_hi = c["t_hi"].get<double>();
  }

  if (j.contains("sensor_weights"))
    cfg.sensor_weights = parse_vector(j["sensor_weights"], "sensor_weights");

  if (j.contains("loss_weights")) {
    const auto& l = j["loss_weights"];
    check_keys(l, "loss_weights", {"lambda_d", "lambda_p"});
    cfg.loss_weights.lambda_d = l.value("lambda_d", cfg.loss_weights.lambda_d);
    cfg.loss_weights.lambda_p = l.value("lambda_p", cfg.loss_weights.lambda_p);
  }

  auto parse_train = [](const json& t, const std::string& where, TrainConfig base) {
    check_keys(t, where,
               {"step_size", "max_iters", "g_tol", "seed", "beta1", "beta2", "adam_eps"});
    TrainConfig out = base;
    out.step_size = t.value("step_size", out.step_size);
    out.max_iters = t.value("max_iters", out.max_iters);
    out.g_tol = t.value("g_tol", out.g_tol);
    out.seed = t.value("seed", out.seed);
    out.beta1 = t.value("beta1", out.beta1);
    out.beta2 = t.value("beta2", out.beta2);
    out.adam_eps = t.value("adam_eps", out.adam_eps);
    return out;
  };
  if (j.contains("train")) cfg.train = parse_train(j["train"], "train", cfg.train);

  if (j.contains("hvp")) {
    const auto& h = j["hvp"];
    check_keys(h, "hvp", {"fd_step_scale", "damping", "mode"});
    cfg.hvp.fd_step_scale = h.value("fd_step_scale", cfg.hvp.fd_step_scale);
    cfg.hvp.damping = h.value("damping", cfg.hvp.damping);
    const std::string mode = h.value("mode", std::string("finite_difference"));
    if (mode == "finite_difference") cfg.hvp.mode = HvpMode::finite_difference;
    else if (mode == "exact_quadratic") cfg.hvp.mode = HvpMode::exact_quadratic;
    else throw ConfigError("hvp.mode: expected finite_difference or exact_quadratic");
  }

  if (j.contains("cg")) {
    const auto& c = j["cg"];
    check_keys(c, "cg", {"rel_tol", "max_iters", "abs_floor"});
    cfg.cg.rel_tol = c.value("rel_tol", cfg.cg.rel_tol);
    cfg.cg.max_iters = c.value("max_iters", cfg.cg.max_iters);
    cfg.cg.abs_floor = c.value("abs_floor", cfg.cg.abs_floor);
  }

  if (j.contains("confidence")) {
    const auto& c = j["confidence"];
    check_keys(c, "confidence",
               {"c_min_solve", "p_solve", "eta", "mad_floor", "log_floor"});
    cfg.confidence.c_min_solve = c.value("c_min_solve", cfg.confidence.c_min_solve);
    cfg.confidence.p_solve = c.value("p_solve", cfg.confidence.p_solve);
    cfg.confidence.eta = c.value("eta", cfg.confidence.eta);
    cfg.confidence.mad_floor = c.value("mad_floor", cfg.confidence.mad_floor);
    cfg.confidence.log_floor = c.value("log_floor", cfg.confidence.log_floor);
  }

  if (j.contains("impute")) {
    const auto& i = j["impute"];
    check_keys(i, "impute", {"tau", "idw_epsilon", "delta", "max_iters"});
    cfg.impute.tau = i.value("tau", cfg.impute.tau);
    cfg.impute.idw_epsilon = i.value("idw_epsilon", cfg.impute.idw_epsilon);
    cfg.impute.delta = i.value("delta", cfg.impute.delta);
    cfg.impute.max_iters = i.value("max_iters", cfg.impute.max_iters);
  }

  if (j.contains("selection")) {
    for (const auto& s : j["selection"]) {
      check_keys(s, "selection[]", {"strategy", "budget", "seed", "start_node"});
      SelectionSpec spec;
      spec.strategy = strategy_from_string(s.value("strategy", std::string("fossa_topk")));
      spec.budget = s.value("budget", 1);
      spec.seed = s.value("seed", std::uint64_t{0});
      spec.start_node = s.value("start_node", 0);
      cfg.selections.push_back(spec);
    }
  }

  if (j.contains("experiment")) {
    const auto& e = j["experiment"];
    check_keys(e, "experiment",
               {"mode", "sigma", "k", "budgets", "strategies", "seeds", "retrain"});
    cfg.experiment.mode = e.value("mode", cfg.experiment.mode);
    cfg.experiment.sigma = e.value("sigma", cfg.experiment.sigma);
    cfg.experiment.k = e.value("k", cfg.experiment.k);
    if (e.contains("budgets")) cfg.experiment.budgets = e["budgets"].get<std::vector<int>>();
    if (e.contains("strategies"))
      cfg.experiment.strategies = e["strategies"].get<std::vector<std::string>>();
    if (e.contains("seeds"))
      cfg.experiment.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
    cfg.experiment.retrain = cfg.train;
    cfg.experiment.retrain.max_iters = std::max(1, cfg.train.max_iters / 2);
    if (e.contains("retrain"))
      cfg.experiment.retrain = parse_train(e["retrain"], "experiment.retrain",
                                           cfg.experiment.retrain);
  } else {
    cfg.experiment.retrain = cfg.train;
    cfg.experiment.retrain.max_iters = std::max(1, cfg.train.max_iters / 2);
  }

  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (timing != "wall" && timing != "off")
    throw ConfigError("timing: expected 'wall' or 'off'");
  if (geometry.mode != "spheres" && geometry.mode != "explicit")
    throw ConfigError("geometry.mode: expected 'spheres' or 'explicit'");
  if (geometry.mode == "spheres") {
    if (geometry.heart_nodes < 4) throw ConfigError("geometry.heart_nodes: need >= 4");
    if (geometry.body_nodes < 4) throw ConfigError("geometry.body_nodes: need >= 4");
    if (!(geometry.heart_radius > 0.0)) throw ConfigError("geometry.heart_radius: need > 0");
    if (!(geometry.body_radius > geometry.heart_radius))
      throw ConfigError("geometry.body_radius: must exceed heart_radius");
  } else {
    if (!geometry.heart_mesh || !geometry.body_mesh)
      throw ConfigError("geometry: explicit mode requires heart_mesh and body_mesh");
  }
  if (!(geometry.kernel_scale > 0.0)) throw ConfigError("geometry.kernel_scale: need > 0");
  ap.validate();
  if (!(sim.dt > 0.0)) throw ConfigError("sim.dt: need > 0");
  if (sim.n_steps < 0) throw ConfigError("sim.n_steps: need >= 0");
  if (sim.record_stride < 1) throw ConfigError("sim.record_stride: need >= 1");
  if (data.mode != "simulate" && data.mode != "explicit")
    throw ConfigError("data.mode: expected 'simulate' or 'explicit'");
  if (data.mode == "explicit" && (!data.y || !data.times))
    throw ConfigError("data: explicit mode requires y and times");
  if (!(data.sigma >= 0.0)) throw ConfigError("data.sigma: need >= 0");
  if (model.type != "mlp" && model.type != "linear")
    throw ConfigError("model.type: expected 'mlp' or 'linear'");
  if (model.type == "mlp") {
    if (model.hidden.empty()) throw ConfigError("model.hidden: need at least one hidden layer");
    for (int h : model.hidden)
      if (h < 1) throw ConfigError("model.hidden: layer widths must be positive");
  } else if (model.u_basis.empty()) {
    throw ConfigError("model.u_basis: linear model requires a basis");
  }
  if (collocation.count < 0) throw ConfigError("collocation.count: need >= 0");
  if (sensor_weights && (sensor_weights->array() < 0.0).any())
    throw ConfigError("sensor_weights: must be >= 0");
  loss_weights.validate();
  train.validate();
  hvp.validate();
  cg.validate();
  confidence.validate();
  impute.validate();
  if (experiment.mode != "rank-split" && experiment.mode != "sweep")
    throw ConfigError("experiment.mode: expected 'rank-split' or 'sweep'");
  if (experiment.seeds.empty()) throw ConfigError("experiment.seeds: need at least one seed");
  if (!(experiment.sigma >= 0.0)) throw ConfigError("experiment.sigma: need >= 0");
  experiment.retrain.validate();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json materialize(const RunConfig& cfg) {
  json j;
  j["out_dir"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  j["timing"] = cfg.timing;
  j["master_seed"] = cfg.master_seed;
  json g;
  g["mode"] = cfg.geometry.mode;
  g["heart_nodes"] = cfg.geometry.heart_nodes;
  g["body_nodes"] = cfg.geometry.body_nodes;
  g["heart_radius"] = cfg.geometry.heart_radius;
  g["body_radius"] = cfg.geometry.body_radius;
  g["kernel_scale"] = cfg.geometry.kernel_scale;
  if (cfg.geometry.heart_mesh) g["heart_mesh"] = mesh_to_json(*cfg.geometry.heart_mesh);
  if (cfg.geometry.body_mesh) g["body_mesh"] = mesh_to_json(*cfg.geometry.body_mesh);
  if (cfg.geometry.transfer) g["transfer"] = matrix_to_json(*cfg.geometry.transfer);
  j["geometry"] = g;
  j["ap"] = {{"diffusivity", cfg.ap.diffusivity}, {"k_r", cfg.ap.k_r}, {"a", cfg.ap.a},
             {"e0", cfg.ap.e0},                   {"mu1", cfg.ap.mu1}, {"mu2", cfg.ap.mu2}};
  j["sim"] = {{"dt", cfg.sim.dt},
              {"n_steps", cfg.sim.n_steps},
              {"record_stride", cfg.sim.record_stride},
              {"stimulus_nodes", cfg.sim.stimulus_nodes}};
  json d;
  d["mode"] = cfg.data.mode;
  d["sigma"] = cfg.data.sigma;
  d["noise_seed"] = cfg.data.noise_seed;
  if (cfg.data.y) d["y"] = matrix_to_json(*cfg.data.y);
  if (cfg.data.times) {
    json t = json::array();
    for (Eigen::Index i = 0; i < cfg.data.times->size(); ++i) t.push_back((*cfg.data.times)[i]);
    d["times"] = t;
  }
  j["data"] = d;
  json m;
  m["type"] = cfg.model.type;
  m["hidden"] = cfg.model.hidden;
  m["init_seed"] = cfg.model.init_seed;
  if (!cfg.model.u_basis.empty()) m["u_basis"] = basis_to_json(cfg.model.u_basis);
  if (!cfg.model.v_basis.empty()) m["v_basis"] = basis_to_json(cfg.model.v_basis);
  if (cfg.model.theta0) {
    json t = json::array();
    for (Eigen::Index i = 0; i < cfg.model.theta0->size(); ++i) t.push_back((*cfg.model.theta0)[i]);
    m["theta0"] = t;
  }
  j["model"] = m;
  json c;
  c["count"] = cfg.collocation.count;
  c["seed"] = cfg.collocation.seed;
  if (cfg.collocation.t_lo) c["t_lo"] = *cfg.collocation.t_lo;
  if (cfg.collocation.t_hi) c["t_hi"] = *cfg.collocation.t_hi;
  j["collocation"] = c;
  if (cfg.sensor_weights) {
    json w = json::array();
    for (Eigen::Index i = 0; i < cfg.sensor_weights->size(); ++i)
      w.push_back((*cfg.sensor_weights)[i]);
    j["sensor_weights"] = w;
  }
  j["loss_weights"] = {{"lambda_d", cfg.loss_weights.lambda_d},
                       {"lambda_p", cfg.loss_weights.lambda_p}};
  auto train_json = [](const TrainConfig& t) {
    return json{{"step_size", t.step_size}, {"max_iters", t.max_iters}, {"g_tol", t.g_tol},
                {"seed", t.seed},           {"beta1", t.beta1},         {"beta2", t.beta2},
                {"adam_eps", t.adam_eps}};
  };
  j["train"] = train_json(cfg.train);
  j["hvp"] = {{"fd_step_scale", cfg.hvp.fd_step_scale},
              {"damping", cfg.hvp.damping},
              {"mode", cfg.hvp.mode == HvpMode::exact_quadratic ? "exact_quadratic"
                                                                : "finite_difference"}};
  j["cg"] = {{"rel_tol", cfg.cg.rel_tol},
             {"max_iters", cfg.cg.max_iters},
             {"abs_floor", cfg.cg.abs_floor}};
  j["confidence"] = {{"c_min_solve", cfg.confidence.c_min_solve},
                     {"p_solve", cfg.confidence.p_solve},
                     {"eta", cfg.confidence.eta},
                     {"mad_floor", cfg.confidence.mad_floor},
                     {"log_floor", cfg.confidence.log_floor}};
  j["impute"] = {{"tau", cfg.impute.tau},
                 {"idw_epsilon", cfg.impute.idw_epsilon},
                 {"delta", cfg.impute.delta},
                 {"max_iters", cfg.impute.max_iters}};
  json sel = json::array();
  for (const auto& s : cfg.selections)
    sel.push_back({{"strategy", to_string(s.strategy)},
                   {"budget", s.budget},
                   {"seed", s.seed},
                   {"start_node", s.start_node}});
  j["selection"] = sel;
  j["experiment"] = {{"mode", cfg.experiment.mode},
                     {"sigma", cfg.experiment.sigma},
                     {"k", cfg.experiment.k},
                     {"budgets", cfg.experiment.budgets},
                     {"strategies", cfg.experiment.strategies},
                     {"seeds", cfg.experiment.seeds},
                     {"retrain", train_json(cfg.experiment.retrain)}};
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string dump = materialize(cfg).dump();  // object keys sorted by nlohmann
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  // splitmix64 finalizer over base xor a salt stripe
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace fossa
