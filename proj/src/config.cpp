#include "ddcbf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ddcbf/io.hpp"

namespace ddcbf {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      throw std::runtime_error("config: unknown key \"" + it.key() +
                               "\" in section " + section);
    }
  }
}

Edge parse_edge_key(const std::string& key) {
  const auto dash = key.find('-');
  if (dash == std::string::npos) {
    throw std::runtime_error("config: malformed edge key \"" + key + "\"");
  }
  return make_edge(std::stoi(key.substr(0, dash)),
                   std::stoi(key.substr(dash + 1)));
}

std::string edge_key(const Edge& e) {
  return std::to_string(e.first) + "-" + std::to_string(e.second);
}

Eigen::VectorXd parse_vector(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

AppConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("config: cannot open " + file.string());
  std::stringstream raw;
  raw << in.rdbuf();
  const json j = json::parse(raw.str());

  check_keys(j, "(root)",
             {"graph", "model", "barrier", "dataset", "bounds", "controller",
              "sim", "outputs", "study"});

  AppConfig cfg;
  cfg.config_hash = io::fnv1a_hex(json::parse(raw.str()).dump());
  Scenario& s = cfg.scenario;

  const json& jg = j.at("graph");
  check_keys(jg, "graph", {"num_agents", "leaders", "edges"});
  std::vector<Edge> edges;
  for (const auto& e : jg.at("edges")) {
    edges.push_back(make_edge(e.at(0).get<int>(), e.at(1).get<int>()));
  }
  s.graph = CommGraph(jg.at("num_agents").get<int>(),
                      jg.at("leaders").get<std::vector<int>>(), edges);

  const json& jm = j.at("model");
  check_keys(jm, "model", {"dim", "desired_disp", "state_box"});
  s.dim = jm.at("dim").get<int>();
  for (auto it = jm.at("desired_disp").begin(); it != jm.at("desired_disp").end();
       ++it) {
    s.desired_disp[parse_edge_key(it.key())] = parse_vector(it.value());
  }
  if (jm.contains("state_box")) {
    s.state_box = {jm.at("state_box").at(0).get<double>(),
                   jm.at("state_box").at(1).get<double>()};
  }

  const json& jb = j.at("barrier");
  check_keys(jb, "barrier", {"d_max", "gamma", "eps", "beta", "beta_overrides"});
  s.d_max = jb.at("d_max").get<double>();
  if (jb.contains("gamma")) s.gamma = jb.at("gamma").get<double>();
  if (jb.contains("eps")) s.eps = jb.at("eps").get<double>();
  if (jb.contains("beta")) s.beta_default = jb.at("beta").get<double>();
  if (jb.contains("beta_overrides")) {
    for (auto it = jb.at("beta_overrides").begin();
         it != jb.at("beta_overrides").end(); ++it) {
      s.beta_overrides[parse_edge_key(it.key())] = it.value().get<double>();
    }
  }

  const json& jd = j.at("dataset");
  check_keys(jd, "dataset", {"n_sims", "horizon", "dt", "box", "k", "seed"});
  s.dataset.n_sims = jd.at("n_sims").get<int>();
  if (s.dataset.n_sims < 1) {
    throw std::runtime_error("config: dataset.n_sims must be >= 1");
  }
  s.dataset.horizon = jd.at("horizon").get<double>();
  s.dataset.dt = jd.at("dt").get<double>();
  s.dataset.box_lo = jd.at("box").at(0).get<double>();
  s.dataset.box_hi = jd.at("box").at(1).get<double>();
  if (jd.contains("k")) s.dataset.kmeans_k = jd.at("k").get<int>();
  s.dataset.seed = jd.at("seed").get<std::uint64_t>();

  if (j.contains("bounds")) {
    const json& jb2 = j.at("bounds");
    check_keys(jb2, "bounds", {"scale"});
    if (jb2.contains("scale")) s.bound_scale = jb2.at("scale").get<double>();
  }

  const json& jc = j.at("controller");
  check_keys(jc, "controller", {"k_p", "targets", "rho", "input_box"});
  s.k_p = jc.at("k_p").get<double>();
  for (auto it = jc.at("targets").begin(); it != jc.at("targets").end(); ++it) {
    s.leader_targets[std::stoi(it.key())] = parse_vector(it.value());
  }
  if (jc.contains("rho")) s.rho = jc.at("rho").get<double>();
  if (jc.contains("input_box")) {
    s.input_box = {jc.at("input_box").at(0).get<double>(),
                   jc.at("input_box").at(1).get<double>()};
  }

  const json& js = j.at("sim");
  check_keys(js, "sim", {"dt", "horizon", "initial_state"});
  s.sim_dt = js.at("dt").get<double>();
  s.sim_horizon = js.at("horizon").get<double>();
  s.initial_state = parse_vector(js.at("initial_state"));

  if (j.contains("outputs")) {
    check_keys(j.at("outputs"), "outputs", {"dir"});
    cfg.out_dir = j.at("outputs").at("dir").get<std::string>();
  }

  if (j.contains("study")) {
    const json& jst = j.at("study");
    check_keys(jst, "study", {"configs", "seeds", "dt", "horizon"});
    StudyConfig study;
    for (const auto& entry : jst.at("configs")) {
      check_keys(entry, "study.configs[]", {"n_sims", "scale"});
      StudyEntry se;
      se.n_sims = entry.at("n_sims").get<int>();
      if (entry.contains("scale")) se.bound_scale = entry.at("scale").get<double>();
      study.entries.push_back(se);
    }
    study.seeds = jst.at("seeds").get<std::vector<std::uint64_t>>();
    if (jst.contains("dt")) study.sim_dt = jst.at("dt").get<double>();
    if (jst.contains("horizon")) study.sim_horizon = jst.at("horizon").get<double>();
    cfg.study = study;
  }

  s.validate();
  return cfg;
}

std::string dump_config(const AppConfig& cfg) {
  const Scenario& s = cfg.scenario;
  json j;
  j["graph"]["num_agents"] = s.graph.num_agents();
  j["graph"]["leaders"] = s.graph.leaders();
  json edges = json::array();
  for (const Edge& e : s.graph.edges()) edges.push_back({e.first, e.second});
  j["graph"]["edges"] = edges;

  j["model"]["dim"] = s.dim;
  for (const auto& [e, d] : s.desired_disp) {
    json arr = json::array();
    for (int i = 0; i < d.size(); ++i) arr.push_back(d[i]);
    j["model"]["desired_disp"][edge_key(e)] = arr;
  }
  j["model"]["state_box"] = {s.state_box.lo, s.state_box.hi};

  j["barrier"]["d_max"] = s.d_max;
  j["barrier"]["gamma"] = s.gamma;
  j["barrier"]["eps"] = s.eps;
  j["barrier"]["beta"] = s.beta_default;
  if (!s.beta_overrides.empty()) {
    for (const auto& [e, b] : s.beta_overrides) {
      j["barrier"]["beta_overrides"][edge_key(e)] = b;
    }
  }

  j["dataset"]["n_sims"] = s.dataset.n_sims;
  j["dataset"]["horizon"] = s.dataset.horizon;
  j["dataset"]["dt"] = s.dataset.dt;
  j["dataset"]["box"] = {s.dataset.box_lo, s.dataset.box_hi};
  j["dataset"]["k"] = s.dataset.kmeans_k;
  j["dataset"]["seed"] = s.dataset.seed;

  j["bounds"]["scale"] = s.bound_scale;

  j["controller"]["k_p"] = s.k_p;
  for (const auto& [leader, target] : s.leader_targets) {
    json arr = json::array();
    for (int i = 0; i < target.size(); ++i) arr.push_back(target[i]);
    j["controller"]["targets"][std::to_string(leader)] = arr;
  }
  j["controller"]["rho"] = s.rho;
  j["controller"]["input_box"] = {s.input_box.lo, s.input_box.hi};

  j["sim"]["dt"] = s.sim_dt;
  j["sim"]["horizon"] = s.sim_horizon;
  json init = json::array();
  for (int i = 0; i < s.initial_state.size(); ++i) {
    init.push_back(s.initial_state[i]);
  }
  j["sim"]["initial_state"] = init;

  j["outputs"]["dir"] = cfg.out_dir;

  if (cfg.study) {
    json configs = json::array();
    for (const StudyEntry& e : cfg.study->entries) {
      configs.push_back({{"n_sims", e.n_sims}, {"scale", e.bound_scale}});
    }
    j["study"]["configs"] = configs;
    j["study"]["seeds"] = cfg.study->seeds;
    j["study"]["dt"] = cfg.study->sim_dt;
    j["study"]["horizon"] = cfg.study->sim_horizon;
  }
  return j.dump(2) + "\n";
}

}  // namespace ddcbf
