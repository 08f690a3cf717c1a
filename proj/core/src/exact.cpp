#include "otloss/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace otloss {

namespace {

// Entering threshold: a cell enters only if its reduced cost is below
// -kPivotTol. Keeps rounding noise from driving useless pivots and bounds
// the dual infeasibility of the returned certificate.
constexpr double kPivotTol = 1e-11;
constexpr double kPrimalDegenerateTol = 1e-12;
constexpr double kDualDegenerateTol = 1e-9;

// Transportation simplex state on the complete bipartite graph. Nodes are
// rows 0..k-1 and columns k..2k-1; the basis is a spanning tree with
// 2k - 1 edges (basic cells), some of which may carry zero flow.
struct SimplexState {
  int k = 0;
  const Eigen::MatrixXd* cost = nullptr;
  Eigen::MatrixXd flow;                 // flow on basic cells, 0 elsewhere
  std::vector<std::uint8_t> is_basic;   // k*k flags
  std::vector<std::vector<int>> adjacency;  // tree adjacency over 2k nodes
  Eigen::VectorXd u, v;                 // row and column duals

  int cell(int i, int j) const { return i * k + j; }

  void add_edge(int i, int j) {
    is_basic[cell(i, j)] = 1;
    adjacency[i].push_back(k + j);
    adjacency[k + j].push_back(i);
  }

  void remove_edge(int i, int j) {
    is_basic[cell(i, j)] = 0;
    auto drop = [](std::vector<int>& list, int node) {
      for (std::size_t t = 0; t < list.size(); ++t) {
        if (list[t] == node) {
          list[t] = list.back();
          list.pop_back();
          return;
        }
      }
    };
    drop(adjacency[i], k + j);
    drop(adjacency[k + j], i);
  }
};

// Northwest-corner initial basis: walks the cost matrix from (0, 0) to
// (k-1, k-1) advancing one index per step, which yields exactly 2k - 1
// basic cells forming a spanning tree even when marginals contain zeros.
void northwest_corner(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                      SimplexState& state) {
  const int k = state.k;
  Eigen::VectorXd remaining_supply = supply;
  Eigen::VectorXd remaining_demand = demand;
  int i = 0, j = 0;
  while (true) {
    const double moved = std::min(remaining_supply(i), remaining_demand(j));
    state.flow(i, j) = std::max(moved, 0.0);
    state.add_edge(i, j);
    remaining_supply(i) -= moved;
    remaining_demand(j) -= moved;
    if (i == k - 1 && j == k - 1) break;
    if ((remaining_supply(i) <= remaining_demand(j) && i < k - 1) || j == k - 1) {
      ++i;
    } else {
      ++j;
    }
  }
}

// Solves u_i + v_j = c_ij over the basis tree, rooted at row 0 with u_0 = 0.
void compute_duals(SimplexState& state) {
  const int k = state.k;
  const Eigen::MatrixXd& cost = *state.cost;
  std::vector<int> stack;
  std::vector<std::uint8_t> visited(2 * k, 0);
  stack.push_back(0);
  visited[0] = 1;
  state.u(0) = 0.0;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    for (int next : state.adjacency[node]) {
      if (visited[next]) continue;
      visited[next] = 1;
      if (node < k) {
        state.v(next - k) = cost(node, next - k) - state.u(node);
      } else {
        state.u(next) = cost(next, node - k) - state.v(node - k);
      }
      stack.push_back(next);
    }
  }
}

// Lowest-index cell with reduced cost below -kPivotTol, or -1 if optimal.
int find_entering(const SimplexState& state) {
  const int k = state.k;
  const Eigen::MatrixXd& cost = *state.cost;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (state.is_basic[state.cell(i, j)]) continue;
      if (cost(i, j) - state.u(i) - state.v(j) < -kPivotTol) {
        return state.cell(i, j);
      }
    }
  }
  return -1;
}

// Tree path from node `from` to node `to`; returns the node sequence.
std::vector<int> tree_path(const SimplexState& state, int from, int to) {
  const int n = 2 * state.k;
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<int> stack{from};
  visited[from] = 1;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (node == to) break;
    for (int next : state.adjacency[node]) {
      if (visited[next]) continue;
      visited[next] = 1;
      parent[next] = node;
      stack.push_back(next);
    }
  }
  std::vector<int> path;
  for (int node = to; node != -1; node = parent[node]) path.push_back(node);
  // path is to -> from; reverse to get from -> to
  std::reverse(path.begin(), path.end());
  return path;
}

// One pivot: pushes flow around the unique cycle closed by the entering
// cell and swaps the leaving cell out of the basis tree.
void pivot(SimplexState& state, int entering) {
  const int k = state.k;
  const int enter_row = entering / k;
  const int enter_col = entering % k;

  // Cycle = entering edge + tree path from the entering column node back to
  // the entering row node. Cells along the path alternate signs starting
  // with -, the entering cell itself being +.
  const std::vector<int> path = tree_path(state, k + enter_col, enter_row);
  struct CycleCell {
    int i, j;
    bool positive;
  };
  std::vector<CycleCell> cycle;
  cycle.reserve(path.size());
  bool positive = false;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const int a = path[t], b = path[t + 1];
    const int i = (a < k) ? a : b;
    const int j = (a < k) ? b - k : a - k;
    cycle.push_back({i, j, positive});
    positive = !positive;
  }

  // Leaving cell: smallest flow among the negative cells, ties broken by
  // lowest linear index.
  double theta = -1.0;
  int leave_i = -1, leave_j = -1;
  for (const CycleCell& c : cycle) {
    if (c.positive) continue;
    const double f = state.flow(c.i, c.j);
    const int idx = state.cell(c.i, c.j);
    if (theta < 0.0 || f < theta ||
        (f == theta && idx < state.cell(leave_i, leave_j))) {
      theta = f;
      leave_i = c.i;
      leave_j = c.j;
    }
  }
  if (leave_i < 0) {
    throw std::runtime_error("exact_transport: degenerate cycle without leaving cell");
  }

  for (const CycleCell& c : cycle) {
    state.flow(c.i, c.j) += c.positive ? theta : -theta;
  }
  state.flow(enter_row, enter_col) = theta;
  state.flow(leave_i, leave_j) = 0.0;

  state.remove_edge(leave_i, leave_j);
  state.add_edge(enter_row, enter_col);
}

}  // namespace

ExactSolution exact_transport(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              const GroundMetric& metric) {
  const int k = metric.size();
  if (mu.size() != k || nu.size() != k) {
    throw std::invalid_argument("exact_transport: dimension mismatch");
  }
  if (!mu.is_normalized() || !nu.is_normalized()) {
    throw std::invalid_argument("exact_transport: inputs must be normalized measures");
  }
  if (std::abs(mu.total_mass() - nu.total_mass()) > kMassBalanceTol) {
    throw std::invalid_argument("exact_transport: total mass mismatch");
  }

  SimplexState state;
  state.k = k;
  state.cost = &metric.costs();
  state.flow = Eigen::MatrixXd::Zero(k, k);
  state.is_basic.assign(static_cast<std::size_t>(k) * k, 0);
  state.adjacency.assign(2 * k, {});
  state.u = Eigen::VectorXd::Zero(k);
  state.v = Eigen::VectorXd::Zero(k);

  // Rebalance the demand so both sides sum identically at machine precision;
  // the NW-corner walk then leaves no stray residue.
  Eigen::VectorXd supply = mu.values();
  Eigen::VectorXd demand = nu.values();
  const double demand_mass = demand.sum();
  if (demand_mass > 0.0) demand *= supply.sum() / demand_mass;

  northwest_corner(supply, demand, state);

  const long max_pivots = 2000L * k * k + 1000;
  for (long step = 0;; ++step) {
    if (step > max_pivots) {
      throw std::runtime_error("exact_transport: pivot limit exceeded");
    }
    compute_duals(state);
    const int entering = find_entering(state);
    if (entering < 0) break;
    pivot(state, entering);
  }

  // Assemble the certificate. Flows can pick up tiny negative rounding
  // residue across pivots; clamp before building the plan.
  Eigen::MatrixXd plan_matrix = state.flow.cwiseMax(0.0);
  const double cost = (plan_matrix.array() * metric.costs().array()).sum();

  const double shift = state.u.mean();
  Eigen::VectorXd alpha = state.u.array() - shift;
  Eigen::VectorXd beta = state.v.array() + shift;

  bool primal_degenerate = false;
  bool dual_degenerate = false;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double reduced = metric(i, j) - state.u(i) - state.v(j);
      if (state.is_basic[state.cell(i, j)]) {
        primal_degenerate |= state.flow(i, j) <= kPrimalDegenerateTol;
      } else {
        dual_degenerate |= reduced <= kDualDegenerateTol;
      }
    }
  }

  return ExactSolution{cost, TransportPlan(std::move(plan_matrix)),
                       std::move(alpha), std::move(beta),
                       primal_degenerate, dual_degenerate};
}

double cdf_wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("cdf_wasserstein_1d: dimension mismatch");
  }
  if (!mu.is_normalized() || !nu.is_normalized()) {
    throw std::invalid_argument("cdf_wasserstein_1d: inputs must be normalized measures");
  }
  double cdf_mu = 0.0, cdf_nu = 0.0, total = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    cdf_mu += mu[i];
    cdf_nu += nu[i];
    total += std::abs(cdf_mu - cdf_nu);
  }
  return total;
}

double one_hot_loss(const DiscreteMeasure& h, int target, const GroundMetric& metric) {
  if (h.size() != metric.size()) {
    throw std::invalid_argument("one_hot_loss: dimension mismatch");
  }
  if (!h.is_normalized()) {
    throw std::invalid_argument("one_hot_loss: prediction must be normalized");
  }
  if (target < 0 || target >= metric.size()) {
    throw std::out_of_range("one_hot_loss: target index out of range");
  }
  return metric.costs().col(target).dot(h.values());
}

Eigen::VectorXd dual_subgradient(const ExactSolution& solution) {
  return solution.dual_alpha.array() - solution.dual_alpha.mean();
}

}  // namespace otloss
