#include "ddcbf/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ddcbf {

Eigen::VectorXd SystemModel::state_derivative(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& u) const {
  const int n = state_dim();
  const int m = input_dim();
  Eigen::VectorXd xdot(n * num_agents());
  for (int j = 0; j < num_agents(); ++j) {
    Eigen::VectorXd dj = drift(x, j);
    if (graph().is_leader(j)) {
      dj += input_map(x, j) * u.segment(m * j, m);
    }
    xdot.segment(n * j, n) = dj;
  }
  return xdot;
}

ConsensusModel::ConsensusModel(CommGraph graph, int dim,
                               std::map<Edge, Eigen::VectorXd> desired_disp,
                               Box state_box, Box input_box)
    : graph_(std::move(graph)),
      dim_(dim),
      desired_disp_(std::move(desired_disp)),
      state_box_(state_box),
      input_box_(input_box) {
  if (dim_ <= 0) throw std::invalid_argument("state dimension must be positive");
  for (const Edge& e : graph_.edges()) {
    auto it = desired_disp_.find(e);
    if (it == desired_disp_.end()) {
      throw std::invalid_argument("missing desired displacement for edge (" +
                                  std::to_string(e.first) + "," +
                                  std::to_string(e.second) + ")");
    }
    if (it->second.size() != dim_) {
      throw std::invalid_argument("desired displacement has wrong dimension");
    }
  }
}

Eigen::VectorXd ConsensusModel::desired_disp(int i, int j) const {
  const Edge e = make_edge(i, j);
  const Eigen::VectorXd& d = desired_disp_.at(e);
  return (i == e.first) ? d : Eigen::VectorXd(-d);
}

Eigen::VectorXd ConsensusModel::drift(const Eigen::VectorXd& x, int j) const {
  if (j < 0 || j >= graph_.num_agents()) {
    throw std::invalid_argument("drift: vertex id out of range");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  const Eigen::VectorXd xj = x.segment(dim_ * j, dim_);
  for (int i : neighbors(graph_, j)) {
    out -= xj - x.segment(dim_ * i, dim_) - desired_disp(j, i);
  }
  return out;
}

Eigen::MatrixXd ConsensusModel::input_map(const Eigen::VectorXd&, int) const {
  return Eigen::MatrixXd::Identity(dim_, dim_);
}

Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step: dt must be positive");
  return x + dt * model.state_derivative(x, u);
}

Trajectory rollout(const SystemModel& model, const Eigen::VectorXd& x0,
                   const InputPolicy& policy, double horizon, double dt) {
  if (dt <= 0.0 || horizon <= 0.0) {
    throw std::invalid_argument("rollout: horizon and dt must be positive");
  }
  if (horizon < dt) throw std::invalid_argument("rollout: horizon < dt");

  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  const Box box = model.state_box();

  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps + 1);

  Eigen::VectorXd x = x0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const Eigen::VectorXd u = policy(t);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.inputs.push_back(u);
    if (!traj.exited_state_box) {
      for (int c = 0; c < x.size(); ++c) {
        if (!box.contains(x[c])) {
          traj.exited_state_box = true;
          break;
        }
      }
    }
    if (k < steps) x = step(model, x, u, dt);
  }
  return traj;
}

Eigen::VectorXd gather(const Eigen::VectorXd& stacked,
                       const std::vector<int>& agents, int per_agent) {
  Eigen::VectorXd out(per_agent * static_cast<int>(agents.size()));
  for (std::size_t i = 0; i < agents.size(); ++i) {
    out.segment(per_agent * static_cast<int>(i), per_agent) =
        stacked.segment(per_agent * agents[i], per_agent);
  }
  return out;
}

}  // namespace ddcbf
