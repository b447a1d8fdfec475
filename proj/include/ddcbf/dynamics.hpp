#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "ddcbf/graph.hpp"

namespace ddcbf {

/// Per-component box, the same interval for every coordinate.
struct Box {
  double lo = -10.0;
  double hi = 10.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Control-affine leader-follower system. Leaders have an input channel,
/// followers evolve on drift alone. The certification pipeline never sees
/// this interface; it exists for simulation and for test oracles.
class SystemModel {
public:
  virtual ~SystemModel() = default;

  virtual int state_dim() const = 0;  ///< n, per agent
  virtual int input_dim() const = 0;  ///< m, per agent (leaders)
  virtual const CommGraph& graph() const = 0;

  /// Drift of agent j given the stacked state (input excluded for leaders).
  virtual Eigen::VectorXd drift(const Eigen::VectorXd& x, int j) const = 0;

  /// Input map g_j(x_j) of leader j, an n-by-m matrix.
  virtual Eigen::MatrixXd input_map(const Eigen::VectorXd& x, int j) const = 0;

  virtual Box state_box() const = 0;
  virtual Box input_box() const = 0;

  int num_agents() const { return graph().num_agents(); }

  /// Stacked time derivative of the full system at (x, u).
  Eigen::VectorXd state_derivative(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const;
};

/// Consensus dynamics: every agent is driven toward its desired relative
/// displacement from each neighbor; leaders add an identity-mapped input.
/// Displacements are stored per canonical edge; the reverse direction is the
/// negation.
class ConsensusModel final : public SystemModel {
public:
  ConsensusModel(CommGraph graph, int dim,
                 std::map<Edge, Eigen::VectorXd> desired_disp,
                 Box state_box = {}, Box input_box = {});

  int state_dim() const override { return dim_; }
  int input_dim() const override { return dim_; }
  const CommGraph& graph() const override { return graph_; }

  Eigen::VectorXd drift(const Eigen::VectorXd& x, int j) const override;
  Eigen::MatrixXd input_map(const Eigen::VectorXd& x, int j) const override;

  Box state_box() const override { return state_box_; }
  Box input_box() const override { return input_box_; }

  /// d_ij^des with sign resolved for the (i, j) direction.
  Eigen::VectorXd desired_disp(int i, int j) const;

private:
  CommGraph graph_;
  int dim_;
  std::map<Edge, Eigen::VectorXd> desired_disp_;
  Box state_box_;
  Box input_box_;
};

struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;  ///< input applied while leaving each point
  bool exited_state_box = false;
};

using InputPolicy = std::function<Eigen::VectorXd(double)>;

/// One explicit-Euler step. Follower input blocks are ignored.
Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, double dt);

/// Fixed-step rollout over floor(horizon/dt) steps; inputs recorded as
/// applied. States leaving the state box set a flag, they are not clamped.
Trajectory rollout(const SystemModel& model, const Eigen::VectorXd& x0,
                   const InputPolicy& policy, double horizon, double dt);

/// Stack the n-dim blocks of the listed agents out of a full state vector.
Eigen::VectorXd gather(const Eigen::VectorXd& stacked,
                       const std::vector<int>& agents, int per_agent);

}  // namespace ddcbf
