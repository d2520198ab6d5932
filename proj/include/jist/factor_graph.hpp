#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jist/types.hpp"

namespace jist {

using VariableId = std::uint64_t;
using FactorId = std::uint64_t;

/**
 * One residual term h_k(Theta_k) with Gaussian noise Sigma_k. Contributes
 * 0.5 * h^T Sigma^-1 h to the objective.
 *
 * Factors are evaluated against the ordered states they were attached to.
 * Implementations must be pure with respect to those states.
 */
class Factor {
 public:
  virtual ~Factor() = default;

  virtual std::size_t arity() const = 0;
  virtual int residual_dim() const = 0;
  virtual std::string_view name() const = 0;

  /// Residual at `states`. When `jacobians` is non-null it receives one
  /// residual_dim x state_dim block per state.
  virtual Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                                   std::vector<Eigen::MatrixXd>* jacobians) const = 0;

  /// Sigma^-1.
  virtual Eigen::MatrixXd information() const = 0;

  double cost(std::span<const StateVector* const> states) const;
};

/// Normal equations A * delta = b assembled over a tree, stored by variable blocks.
struct LinearSystem {
  int block_dim = 0;
  /// Block index -> variable id, parents before children.
  std::vector<VariableId> ordering;
  std::unordered_map<VariableId, std::size_t> index;
  /// Parent block index, -1 for the root.
  std::vector<int> parent_index;
  std::vector<Eigen::MatrixXd> diagonal;
  /// Block A(parent(i), i); empty for the root.
  std::vector<Eigen::MatrixXd> off_diagonal;
  Eigen::VectorXd b;

  std::size_t num_blocks() const { return ordering.size(); }
  Eigen::MatrixXd dense() const;

  /// Block Cholesky eliminating leaves to root. Throws singular_system when the
  /// system is not positive definite (typically an unanchored graph).
  Eigen::VectorXd solve() const;
};

struct SolveReport {
  std::size_t iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

struct GaussNewtonOptions {
  std::size_t max_iters = 20;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;
};

/**
 * Tree-structured factor graph. Variables hold their current values, so
 * optimization mutates the graph in place.
 *
 * Invariants: parent links form one tree rooted at root(); binary factors
 * only connect a (parent, child) pair; ids are never reused.
 */
class FactorGraph {
 public:
  struct FactorEntry {
    std::shared_ptr<const Factor> factor;
    std::vector<VariableId> vars;
  };

  FactorGraph() = default;

  VariableId add_variable(std::optional<VariableId> parent, StateVector init);
  FactorId add_factor(std::shared_ptr<const Factor> factor, std::vector<VariableId> vars);
  void remove_factor(FactorId id);

  /// Keep `keep_root` and its descendants, drop everything else. Returns the
  /// number of removed variables.
  std::size_t remove_all_except_subtree(VariableId keep_root);

  double total_cost() const;
  double factor_cost(FactorId id) const;
  LinearSystem linearize() const;

  /// theta <- theta + delta, with delta laid out per `system.ordering`.
  void retract(const LinearSystem& system, const Eigen::VectorXd& delta);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  bool contains(VariableId id) const { return nodes_.count(id) != 0; }
  int state_dim() const { return state_dim_; }
  VariableId root() const;

  const StateVector& value(VariableId id) const { return node(id).value; }
  void set_value(VariableId id, StateVector value);
  std::optional<VariableId> parent(VariableId id) const { return node(id).parent; }
  const std::vector<VariableId>& children(VariableId id) const { return node(id).children; }
  const std::vector<FactorId>& factors_of(VariableId id) const { return node(id).factors; }
  std::size_t depth(VariableId id) const;
  /// Root-to-`id` path, inclusive.
  std::vector<VariableId> path_to(VariableId id) const;
  std::vector<VariableId> variable_ids() const;
  std::vector<VariableId> leaves() const;

  std::size_t num_factors() const { return factors_.size(); }
  const std::map<FactorId, FactorEntry>& factors() const { return factors_; }
  const FactorEntry& factor(FactorId id) const;

  /// Throws with a description of the first violated structural invariant.
  void validate() const;

 private:
  struct Node {
    StateVector value;
    std::optional<VariableId> parent;
    std::vector<VariableId> children;
    std::vector<FactorId> factors;
  };

  const Node& node(VariableId id) const;
  Node& node(VariableId id);
  std::vector<const StateVector*> states_of(const FactorEntry& entry) const;

  std::map<VariableId, Node> nodes_;
  std::map<FactorId, FactorEntry> factors_;
  std::optional<VariableId> root_;
  VariableId next_variable_ = 0;
  FactorId next_factor_ = 0;
  int state_dim_ = 0;
};

SolveReport gauss_newton(FactorGraph& graph, const GaussNewtonOptions& options = {});

}  // namespace jist
