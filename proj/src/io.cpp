#include "ddcbf/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ddcbf::io {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json candidate_to_json(const BarrierCandidate& c) {
  json j;
  j["edge"] = {c.edge.first, c.edge.second};
  j["variant"] = to_string(c.variant);
  j["d_max"] = c.d_max;
  j["members"] = c.members;
  j["hdot_members"] = c.hdot_members;
  if (c.ff_leaders) {
    j["ff_leaders"] = {c.ff_leaders->leader_k, c.ff_leaders->leader_j};
  }
  return j;
}

BarrierCandidate candidate_from_json(const json& j) {
  BarrierCandidate c;
  c.edge = {j.at("edge").at(0).get<int>(), j.at("edge").at(1).get<int>()};
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.d_max = j.at("d_max").get<double>();
  c.members = j.at("members").get<std::vector<int>>();
  c.hdot_members = j.at("hdot_members").get<std::vector<int>>();
  if (j.contains("ff_leaders")) {
    FfLeaderAssignment lead;
    lead.edge = c.edge;
    lead.leader_k = j.at("ff_leaders").at(0).get<int>();
    lead.leader_j = j.at("ff_leaders").at(1).get<int>();
    c.ff_leaders = lead;
  }
  return c;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << text;
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  return json::parse(in);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string dataset_hash(const DerivativeDataset& ds) {
  std::ostringstream ss;
  for (const DataSample& s : ds.samples) {
    ss << fmt_double(s.hdot) << ';';
    for (int i = 0; i < s.x_block.size(); ++i) ss << fmt_double(s.x_block[i]) << ',';
    for (int i = 0; i < s.u_block.size(); ++i) ss << fmt_double(s.u_block[i]) << ',';
  }
  return fnv1a_hex(ss.str());
}

void write_dataset(const std::filesystem::path& dir,
                   const DerivativeDataset& ds) {
  std::filesystem::create_directories(dir);
  const BarrierCandidate& c = ds.candidate;
  if (ds.samples.empty()) {
    throw std::runtime_error("refusing to write empty dataset " + c.label());
  }
  const int n = static_cast<int>(ds.samples.front().x_block.size()) /
                static_cast<int>(c.hdot_members.size());
  const int m = static_cast<int>(ds.samples.front().u_block.size()) /
                static_cast<int>(c.members.size());

  std::ostringstream csv;
  csv << "hdot";
  for (int a : c.hdot_members) {
    for (int d = 0; d < n; ++d) csv << ",x_" << a << "_" << d;
  }
  for (int a : c.members) {
    for (int d = 0; d < m; ++d) csv << ",u_" << a << "_" << d;
  }
  csv << "\n";
  for (const DataSample& s : ds.samples) {
    csv << fmt_double(s.hdot);
    for (int i = 0; i < s.x_block.size(); ++i) csv << "," << fmt_double(s.x_block[i]);
    for (int i = 0; i < s.u_block.size(); ++i) csv << "," << fmt_double(s.u_block[i]);
    csv << "\n";
  }
  write_text(dir / ("dataset_" + c.label() + ".csv"), csv.str());

  json manifest;
  manifest["seed"] = ds.seed;
  manifest["config_hash"] = ds.config_hash;
  manifest["candidate"] = candidate_to_json(c);
  manifest["samples"] = ds.samples.size();
  manifest["state_dim"] = n;
  manifest["input_dim"] = m;
  write_text(dir / ("dataset_" + c.label() + ".json"), manifest.dump(2) + "\n");
}

DerivativeDataset read_dataset(const std::filesystem::path& dir,
                               const std::string& label) {
  const json manifest = read_json(dir / ("dataset_" + label + ".json"));
  DerivativeDataset ds;
  ds.candidate = candidate_from_json(manifest.at("candidate"));
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.config_hash = manifest.at("config_hash").get<std::string>();
  const int n = manifest.at("state_dim").get<int>();
  const int m = manifest.at("input_dim").get<int>();
  const int dx = n * static_cast<int>(ds.candidate.hdot_members.size());
  const int du = m * static_cast<int>(ds.candidate.members.size());

  std::ifstream in(dir / ("dataset_" + label + ".csv"));
  if (!in) {
    throw std::runtime_error("missing dataset file for candidate " + label);
  }
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != 1 + dx + du) {
      throw std::runtime_error("malformed dataset row in " + label);
    }
    DataSample s;
    s.hdot = std::strtod(cells[0].c_str(), nullptr);
    s.x_block.resize(dx);
    s.u_block.resize(du);
    for (int i = 0; i < dx; ++i) {
      s.x_block[i] = std::strtod(cells[1 + i].c_str(), nullptr);
    }
    for (int i = 0; i < du; ++i) {
      s.u_block[i] = std::strtod(cells[1 + dx + i].c_str(), nullptr);
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != manifest.at("samples").get<std::size_t>()) {
    throw std::runtime_error("dataset row count disagrees with manifest: " +
                             label);
  }
  return ds;
}

void write_bounds(const std::filesystem::path& dir, const BarrierCandidate& c,
                  const JacobianBounds& b, const BoundsMeta& meta) {
  std::filesystem::create_directories(dir);
  json j;
  j["candidate"] = candidate_to_json(c);
  j["lower_x"] = vector_to_json(b.lower_x);
  j["upper_x"] = vector_to_json(b.upper_x);
  j["lower_u"] = vector_to_json(b.lower_u);
  j["upper_u"] = vector_to_json(b.upper_u);
  j["meta"] = {{"dataset_hash", meta.dataset_hash},
               {"kmeans_k", meta.kmeans_k},
               {"solver_tol", meta.solver_tol},
               {"scale_factor", meta.scale_factor}};
  write_text(dir / ("bounds_" + c.label() + ".json"), j.dump(2) + "\n");
}

JacobianBounds read_bounds(const std::filesystem::path& dir,
                           const std::string& label) {
  const std::filesystem::path file = dir / ("bounds_" + label + ".json");
  if (!std::filesystem::exists(file)) {
    throw std::runtime_error("missing bounds file for candidate " + label);
  }
  const json j = read_json(file);
  JacobianBounds b;
  b.lower_x = vector_from_json(j.at("lower_x"));
  b.upper_x = vector_from_json(j.at("upper_x"));
  b.lower_u = vector_from_json(j.at("lower_u"));
  b.upper_u = vector_from_json(j.at("upper_u"));
  return b;
}

void write_trajectory_csv(const std::filesystem::path& file,
                          const Trajectory& traj) {
  std::ostringstream csv;
  const int nx = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const int nu = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
  csv << "time";
  for (int i = 0; i < nx; ++i) csv << ",x_" << i;
  for (int i = 0; i < nu; ++i) csv << ",u_" << i;
  csv << "\n";
  for (std::size_t t = 0; t < traj.times.size(); ++t) {
    csv << fmt_double(traj.times[t]);
    for (int i = 0; i < nx; ++i) csv << "," << fmt_double(traj.states[t][i]);
    for (int i = 0; i < nu; ++i) csv << "," << fmt_double(traj.inputs[t][i]);
    csv << "\n";
  }
  write_text(file, csv.str());
}

Trajectory read_trajectory_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  int nx = 0, nu = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) nx++;
    if (h.rfind("u_", 0) == 0) nu++;
  }
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    traj.times.push_back(std::strtod(cells[0].c_str(), nullptr));
    Eigen::VectorXd x(nx), u(nu);
    for (int i = 0; i < nx; ++i) x[i] = std::strtod(cells[1 + i].c_str(), nullptr);
    for (int i = 0; i < nu; ++i) u[i] = std::strtod(cells[1 + nx + i].c_str(), nullptr);
    traj.states.push_back(std::move(x));
    traj.inputs.push_back(std::move(u));
  }
  if (traj.times.size() >= 2) traj.dt = traj.times[1] - traj.times[0];
  return traj;
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& res) {
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "trajectory.csv", res.trajectory);

  std::ostringstream inputs;
  const int nu = res.nominal_inputs.empty()
                     ? 0
                     : static_cast<int>(res.nominal_inputs[0].size());
  inputs << "time";
  for (int i = 0; i < nu; ++i) inputs << ",u_nom_" << i;
  for (int i = 0; i < nu; ++i) inputs << ",u_" << i;
  inputs << "\n";
  for (std::size_t t = 0; t < res.trajectory.times.size(); ++t) {
    inputs << fmt_double(res.trajectory.times[t]);
    for (int i = 0; i < nu; ++i) {
      inputs << "," << fmt_double(res.nominal_inputs[t][i]);
    }
    for (int i = 0; i < nu; ++i) {
      inputs << "," << fmt_double(res.trajectory.inputs[t][i]);
    }
    inputs << "\n";
  }
  write_text(dir / "inputs.csv", inputs.str());

  std::ostringstream hcsv;
  hcsv << "time";
  for (const auto& c : res.candidates) hcsv << ",h_" << c.label();
  hcsv << "\n";
  for (std::size_t t = 0; t < res.trajectory.times.size(); ++t) {
    hcsv << fmt_double(res.trajectory.times[t]);
    for (const auto& series : res.h_series) {
      hcsv << "," << fmt_double(series[t]);
    }
    hcsv << "\n";
  }
  write_text(dir / "h_values.csv", hcsv.str());

  json metrics;
  metrics["control_cost"] = res.metrics.control_cost;
  metrics["violation_count"] = res.metrics.violation_count;
  metrics["violation_flag"] = res.metrics.violation_flag;
  if (res.metrics.violation_flag) {
    metrics["min_h_after_warmup"] = nullptr;
  } else {
    metrics["min_h_after_warmup"] = res.metrics.min_h_after_warmup;
  }
  metrics["selection_failures"] = res.metrics.selection_failures;
  metrics["input_total_variation"] = res.metrics.input_total_variation;
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
}

void write_study_csv(const std::filesystem::path& file,
                     const std::vector<StudyRow>& rows) {
  std::ostringstream csv;
  csv << "n_sims,bound_scale,control_cost,min_h,violation_instants,"
         "violating_runs,failed_runs,runs\n";
  for (const StudyRow& r : rows) {
    csv << r.n_sims << "," << fmt_double(r.bound_scale) << ","
        << fmt_double(r.mean_cost) << ","
        << (r.min_h_defined ? fmt_double(r.mean_min_h) : std::string("-")) << ","
        << r.violation_instants << "," << r.violating_runs << ","
        << r.failed_runs << "," << r.runs << "\n";
  }
  write_text(file, csv.str());
}

std::string format_study_table(const std::vector<StudyRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %14s %12s %16s\n", "configuration",
                "control cost", "min h", "violations");
  out << line;
  for (const StudyRow& r : rows) {
    std::string name = std::to_string(r.n_sims) + " sims";
    if (r.bound_scale != 1.0) {
      char sc[32];
      std::snprintf(sc, sizeof(sc), ", %gx bounds", r.bound_scale);
      name += sc;
    }
    char minh[32];
    if (r.min_h_defined) {
      std::snprintf(minh, sizeof(minh), "%.3f", r.mean_min_h);
    } else {
      std::snprintf(minh, sizeof(minh), "-");
    }
    std::snprintf(line, sizeof(line), "%-24s %14.3f %12s %10ld (%d)\n",
                  name.c_str(), r.mean_cost, minh, r.violation_instants,
                  r.violating_runs);
    out << line;
  }
  return out.str();
}

}  // namespace ddcbf::io
