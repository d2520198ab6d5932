#include "jist/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace jist {

namespace {

// Pivot threshold relative to the largest original diagonal entry of a block.
constexpr double kSingularPivotRatio = 1e-11;

std::string id_str(const char* what, std::uint64_t id) {
  std::ostringstream os;
  os << what << " " << id;
  return os.str();
}

}  // namespace

double Factor::cost(std::span<const StateVector* const> states) const {
  const Eigen::VectorXd h = evaluate(states, nullptr);
  return 0.5 * h.dot(information() * h);
}

// ---------------------------------------------------------------------------
// LinearSystem

Eigen::MatrixXd LinearSystem::dense() const {
  const auto n = static_cast<Eigen::Index>(num_blocks());
  const Eigen::Index bd = block_dim;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n * bd, n * bd);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.block(i * bd, i * bd, bd, bd) = diagonal[i];
    const int p = parent_index[i];
    if (p >= 0) {
      a.block(p * bd, i * bd, bd, bd) = off_diagonal[i];
      a.block(i * bd, p * bd, bd, bd) = off_diagonal[i].transpose();
    }
  }
  return a;
}

Eigen::VectorXd LinearSystem::solve() const {
  const std::size_t n = num_blocks();
  const Eigen::Index bd = block_dim;
  std::vector<Eigen::MatrixXd> d = diagonal;
  Eigen::VectorXd rhs = b;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factor(n);

  auto factorize = [&](std::size_t i) {
    const double scale = std::max(1.0, diagonal[i].diagonal().cwiseAbs().maxCoeff());
    factor[i].compute(d[i]);
    if (factor[i].info() != Eigen::Success) {
      throw Error(ErrorCode::singular_system,
                  id_str("normal matrix not positive definite at variable", ordering[i]));
    }
    const Eigen::MatrixXd l = factor[i].matrixL();
    if (l.diagonal().array().square().minCoeff() < kSingularPivotRatio * scale) {
      throw Error(ErrorCode::singular_system,
                  id_str("normal matrix singular at variable", ordering[i]));
    }
  };

  // Parents precede children in the ordering, so a reverse sweep eliminates
  // every child before its parent and produces no fill-in.
  for (std::size_t i = n; i-- > 1;) {
    const int p = parent_index[i];
    factorize(i);
    const Eigen::MatrixXd& coupling = off_diagonal[i];
    const Eigen::MatrixXd x = factor[i].solve(coupling.transpose());
    d[p] -= coupling * x;
    d[p] = 0.5 * (d[p] + d[p].transpose()).eval();
    const Eigen::VectorXd y = factor[i].solve(rhs.segment(i * bd, bd));
    rhs.segment(p * bd, bd) -= coupling * y;
  }
  Eigen::VectorXd delta(rhs.size());
  if (n == 0) return delta;
  factorize(0);
  delta.segment(0, bd) = factor[0].solve(rhs.segment(0, bd));
  for (std::size_t i = 1; i < n; ++i) {
    const int p = parent_index[i];
    delta.segment(i * bd, bd) = factor[i].solve(
        rhs.segment(i * bd, bd) - off_diagonal[i].transpose() * delta.segment(p * bd, bd));
  }
  return delta;
}

// ---------------------------------------------------------------------------
// FactorGraph

const FactorGraph::Node& FactorGraph::node(VariableId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::unknown_variable, id_str("unknown variable", id));
  return it->second;
}

FactorGraph::Node& FactorGraph::node(VariableId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::unknown_variable, id_str("unknown variable", id));
  return it->second;
}

VariableId FactorGraph::root() const {
  if (!root_) throw Error(ErrorCode::unknown_variable, "graph is empty");
  return *root_;
}

VariableId FactorGraph::add_variable(std::optional<VariableId> parent, StateVector init) {
  if (init.size() == 0) throw Error(ErrorCode::dimension_mismatch, "empty state vector");
  if (!init.allFinite()) throw Error(ErrorCode::non_finite, "initial state is not finite");
  if (!nodes_.empty() && init.size() != state_dim_) {
    throw Error(ErrorCode::dimension_mismatch, "state dimension differs from graph");
  }
  if (parent) {
    if (!contains(*parent)) throw Error(ErrorCode::unknown_variable, id_str("unknown parent", *parent));
  } else if (!nodes_.empty()) {
    throw Error(ErrorCode::invalid_argument, "graph already has a root");
  }
  const VariableId id = next_variable_++;
  state_dim_ = static_cast<int>(init.size());
  nodes_.emplace(id, Node{std::move(init), parent, {}, {}});
  if (parent) {
    node(*parent).children.push_back(id);
  } else {
    root_ = id;
  }
  return id;
}

FactorId FactorGraph::add_factor(std::shared_ptr<const Factor> factor, std::vector<VariableId> vars) {
  if (!factor) throw Error(ErrorCode::invalid_argument, "null factor");
  if (vars.size() != factor->arity()) {
    throw Error(ErrorCode::arity_mismatch, std::string(factor->name()) + ": arity mismatch");
  }
  for (VariableId v : vars) {
    if (!contains(v)) throw Error(ErrorCode::unknown_variable, id_str("unknown variable", v));
  }
  if (vars.size() == 2) {
    const bool edge = node(vars[1]).parent == vars[0] || node(vars[0]).parent == vars[1];
    if (!edge) throw Error(ErrorCode::non_edge, std::string(factor->name()) + ": variables are not a parent-child pair");
  } else if (vars.size() > 2) {
    throw Error(ErrorCode::arity_mismatch, "factors span at most one tree edge");
  }
  const FactorId id = next_factor_++;
  for (VariableId v : vars) node(v).factors.push_back(id);
  factors_.emplace(id, FactorEntry{std::move(factor), std::move(vars)});
  return id;
}

void FactorGraph::remove_factor(FactorId id) {
  auto it = factors_.find(id);
  if (it == factors_.end()) throw Error(ErrorCode::invalid_argument, id_str("unknown factor", id));
  for (VariableId v : it->second.vars) {
    auto& list = node(v).factors;
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
  }
  factors_.erase(it);
}

std::size_t FactorGraph::remove_all_except_subtree(VariableId keep_root) {
  if (!contains(keep_root)) throw Error(ErrorCode::unknown_variable, id_str("unknown variable", keep_root));
  if (keep_root == root()) return 0;

  std::unordered_map<VariableId, bool> keep;
  std::vector<VariableId> stack{keep_root};
  while (!stack.empty()) {
    const VariableId v = stack.back();
    stack.pop_back();
    keep[v] = true;
    for (VariableId c : node(v).children) stack.push_back(c);
  }

  std::size_t removed = 0;
  for (auto it = nodes_.begin(); it != nodes_.end();) {
    if (keep.count(it->first)) {
      ++it;
      continue;
    }
    for (FactorId f : it->second.factors) {
      auto fit = factors_.find(f);
      if (fit == factors_.end()) continue;
      for (VariableId v : fit->second.vars) {
        if (v == it->first || !keep.count(v)) continue;
        auto& list = nodes_.at(v).factors;
        list.erase(std::remove(list.begin(), list.end(), f), list.end());
      }
      factors_.erase(fit);
    }
    it = nodes_.erase(it);
    ++removed;
  }
  node(keep_root).parent.reset();
  root_ = keep_root;
  return removed;
}

std::vector<const StateVector*> FactorGraph::states_of(const FactorEntry& entry) const {
  std::vector<const StateVector*> states;
  states.reserve(entry.vars.size());
  for (VariableId v : entry.vars) states.push_back(&node(v).value);
  return states;
}

double FactorGraph::factor_cost(FactorId id) const {
  const FactorEntry& entry = factor(id);
  const auto states = states_of(entry);
  return entry.factor->cost(states);
}

double FactorGraph::total_cost() const {
  double total = 0.0;
  for (const auto& [id, entry] : factors_) {
    const auto states = states_of(entry);
    total += entry.factor->cost(states);
  }
  return total;
}

LinearSystem FactorGraph::linearize() const {
  LinearSystem sys;
  sys.block_dim = state_dim_;
  if (nodes_.empty()) return sys;

  // Breadth-first ordering puts parents before children.
  std::deque<VariableId> queue{root()};
  while (!queue.empty()) {
    const VariableId v = queue.front();
    queue.pop_front();
    sys.index[v] = sys.ordering.size();
    sys.ordering.push_back(v);
    for (VariableId c : node(v).children) queue.push_back(c);
  }
  const std::size_t n = sys.ordering.size();
  const Eigen::Index bd = state_dim_;
  sys.parent_index.assign(n, -1);
  sys.diagonal.assign(n, Eigen::MatrixXd::Zero(bd, bd));
  sys.off_diagonal.assign(n, Eigen::MatrixXd());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = node(sys.ordering[i]).parent;
    if (p) {
      sys.parent_index[i] = static_cast<int>(sys.index.at(*p));
      sys.off_diagonal[i] = Eigen::MatrixXd::Zero(bd, bd);
    }
  }
  sys.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * bd);

  std::vector<Eigen::MatrixXd> jac;
  for (const auto& [fid, entry] : factors_) {
    const auto states = states_of(entry);
    jac.clear();
    const Eigen::VectorXd h = entry.factor->evaluate(states, &jac);
    bool finite = h.allFinite() && jac.size() == entry.vars.size();
    for (const auto& j : jac) finite = finite && j.allFinite();
    if (!finite) {
      throw Error(ErrorCode::non_finite,
                  id_str((std::string(entry.factor->name()) + ": non-finite residual or Jacobian, factor").c_str(), fid));
    }
    const Eigen::MatrixXd info = entry.factor->information();
    const Eigen::VectorXd wh = info * h;
    for (std::size_t a = 0; a < entry.vars.size(); ++a) {
      const std::size_t ia = sys.index.at(entry.vars[a]);
      const Eigen::MatrixXd jt_info = jac[a].transpose() * info;
      sys.b.segment(static_cast<Eigen::Index>(ia) * bd, bd) -= jac[a].transpose() * wh;
      for (std::size_t c = 0; c < entry.vars.size(); ++c) {
        const std::size_t ic = sys.index.at(entry.vars[c]);
        const Eigen::MatrixXd block = jt_info * jac[c];
        if (ia == ic) {
          sys.diagonal[ia] += block;
        } else if (sys.parent_index[ic] == static_cast<int>(ia)) {
          sys.off_diagonal[ic] += block;  // A(parent, child)
        }
        // The transposed (child, parent) block is implied by symmetry.
      }
    }
  }
  return sys;
}

void FactorGraph::retract(const LinearSystem& system, const Eigen::VectorXd& delta) {
  const Eigen::Index bd = system.block_dim;
  for (std::size_t i = 0; i < system.num_blocks(); ++i) {
    node(system.ordering[i]).value += delta.segment(static_cast<Eigen::Index>(i) * bd, bd);
  }
}

void FactorGraph::set_value(VariableId id, StateVector value) {
  if (value.size() != state_dim_) throw Error(ErrorCode::dimension_mismatch, "state dimension differs from graph");
  node(id).value = std::move(value);
}

std::size_t FactorGraph::depth(VariableId id) const {
  std::size_t d = 0;
  for (auto p = node(id).parent; p; p = node(*p).parent) ++d;
  return d;
}

std::vector<VariableId> FactorGraph::path_to(VariableId id) const {
  std::vector<VariableId> path{id};
  for (auto p = node(id).parent; p; p = node(*p).parent) path.push_back(*p);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<VariableId> FactorGraph::variable_ids() const {
  std::vector<VariableId> ids;
  ids.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) ids.push_back(id);
  return ids;
}

std::vector<VariableId> FactorGraph::leaves() const {
  std::vector<VariableId> ids;
  for (const auto& [id, n] : nodes_) {
    if (n.children.empty()) ids.push_back(id);
  }
  return ids;
}

const FactorGraph::FactorEntry& FactorGraph::factor(FactorId id) const {
  auto it = factors_.find(id);
  if (it == factors_.end()) throw Error(ErrorCode::invalid_argument, id_str("unknown factor", id));
  return it->second;
}

void FactorGraph::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, "invalid graph: " + msg); };
  if (nodes_.empty()) {
    if (!factors_.empty()) fail("factors without variables");
    return;
  }
  if (!root_ || !contains(*root_)) fail("missing root");
  if (node(*root_).parent) fail("root has a parent");
  std::size_t edges = 0;
  for (const auto& [id, n] : nodes_) {
    if (n.value.size() != state_dim_ || !n.value.allFinite()) fail(id_str("bad state at", id));
    if (id != *root_) {
      if (!n.parent) fail(id_str("second root", id));
      if (!contains(*n.parent)) fail(id_str("dangling parent of", id));
      const auto& siblings = node(*n.parent).children;
      if (std::count(siblings.begin(), siblings.end(), id) != 1) fail(id_str("parent does not list child", id));
      ++edges;
      std::size_t steps = 0;
      for (auto p = n.parent; p; p = node(*p).parent) {
        if (++steps > nodes_.size()) fail(id_str("cycle through", id));
      }
    }
    for (VariableId c : n.children) {
      if (!contains(c) || node(c).parent != id) fail(id_str("child link broken at", id));
    }
    for (FactorId f : n.factors) {
      auto it = factors_.find(f);
      if (it == factors_.end()) fail(id_str("stale factor reference on", id));
      const auto& vars = it->second.vars;
      if (std::find(vars.begin(), vars.end(), id) == vars.end()) fail(id_str("factor list mismatch on", id));
    }
  }
  if (edges != nodes_.size() - 1) fail("edge count is not n-1");
  for (const auto& [fid, entry] : factors_) {
    for (VariableId v : entry.vars) {
      if (!contains(v)) fail(id_str("factor references missing variable, factor", fid));
    }
    if (entry.vars.size() == 2) {
      const bool edge = node(entry.vars[1]).parent == entry.vars[0] || node(entry.vars[0]).parent == entry.vars[1];
      if (!edge) fail(id_str("binary factor not on an edge, factor", fid));
    }
  }
}

// ---------------------------------------------------------------------------

SolveReport gauss_newton(FactorGraph& graph, const GaussNewtonOptions& options) {
  if (options.max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 1");
  SolveReport report;
  double cost = graph.total_cost();
  if (!std::isfinite(cost)) throw Error(ErrorCode::non_finite, "non-finite initial cost");
  report.initial_cost = cost;
  report.cost_history.push_back(cost);

  while (true) {
    if (cost < options.abs_tol) {
      report.converged = true;
      break;
    }
    if (report.iterations >= options.max_iters) break;
    const LinearSystem system = graph.linearize();
    const Eigen::VectorXd delta = system.solve();
    if (!delta.allFinite()) throw Error(ErrorCode::non_finite, "non-finite Gauss-Newton step");
    // Decrease predicted by the local quadratic model: b.delta - 0.5 delta.A.delta = 0.5 b.delta.
    const double predicted = 0.5 * system.b.dot(delta);
    if (predicted <= options.rel_tol * cost) {
      report.converged = true;
      break;
    }
    std::vector<StateVector> saved;
    saved.reserve(system.num_blocks());
    for (VariableId v : system.ordering) saved.push_back(graph.value(v));
    graph.retract(system, delta);
    const double next = graph.total_cost();
    if (!(next <= cost)) {
      for (std::size_t i = 0; i < saved.size(); ++i) graph.set_value(system.ordering[i], std::move(saved[i]));
      report.converged = true;
      break;
    }
    ++report.iterations;
    report.cost_history.push_back(next);
    const double decrease = cost - next;
    cost = next;
    if (decrease <= options.rel_tol * (cost + decrease)) {
      report.converged = true;
      break;
    }
  }
  report.final_cost = cost;
  return report;
}

}  // namespace jist
