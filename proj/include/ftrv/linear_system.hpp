#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ftrv/error.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

/// The chain restricted to one closed set of configurations, re-indexed
/// 0..|B|-1 in the order of `members`. `entry` maps each local entry back to
/// its index in the full chain.
struct LocalChain {
  std::vector<std::uint32_t> members;
  std::vector<std::size_t> row_start;
  std::vector<std::uint32_t> column;
  std::vector<double> prob;
  std::vector<std::size_t> entry;

  std::size_t size() const noexcept { return members.size(); }
};

/// `members` must be closed under transitions (a BSCC).
inline LocalChain restrict_chain(const ConfigChain& chain, std::span<const std::uint32_t> members) {
  LocalChain local;
  local.members.assign(members.begin(), members.end());
  std::vector<std::uint32_t> sorted = local.members;
  std::sort(sorted.begin(), sorted.end());
  auto local_index = [&](std::uint32_t global) -> std::uint32_t {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), global);
    if (it == sorted.end() || *it != global) throw ValidationError("configuration set is not closed");
    return static_cast<std::uint32_t>(it - sorted.begin());
  };
  // Members are usually already sorted; translate sorted position to member position.
  std::vector<std::uint32_t> member_pos(sorted.size());
  for (std::uint32_t i = 0; i < local.members.size(); ++i) member_pos[local_index(local.members[i])] = i;

  local.row_start.push_back(0);
  for (std::uint32_t g : local.members) {
    for (std::size_t e = chain.row_start[g]; e < chain.row_start[g + 1]; ++e) {
      local.column.push_back(member_pos[local_index(chain.column[e])]);
      local.prob.push_back(chain.prob[e]);
      local.entry.push_back(e);
    }
    local.row_start.push_back(local.column.size());
  }
  return local;
}

inline constexpr std::size_t kDenseSolverLimit = 2000;
inline constexpr double kIterativeTolerance = 1e-10;

/// (I - Q) x = b where Q is the local chain restricted to non-target states.
/// Dense partial-pivot LU up to kDenseSolverLimit unknowns, BiCGSTAB with an
/// incomplete-LU preconditioner beyond. The same factorization serves every
/// right-hand side and the transposed system.
class HittingSystem {
 public:
  HittingSystem(const LocalChain& local, std::span<const char> is_target) : n_local_(local.size()) {
    unknown_of_.assign(n_local_, -1);
    for (std::size_t i = 0; i < n_local_; ++i)
      if (!is_target[i]) {
        unknown_of_[i] = static_cast<std::int64_t>(local_of_.size());
        local_of_.push_back(i);
      }
    const auto n = static_cast<Eigen::Index>(local_of_.size());
    if (n == 0) return;

    if (local_of_.size() <= kDenseSolverLimit) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto c = local_of_[r];
        for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e) {
          const auto u = unknown_of_[local.column[e]];
          if (u >= 0) m(r, u) -= local.prob[e];
        }
      }
      dense_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(m);
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index r = 0; r < n; ++r) {
        trip.emplace_back(r, r, 1.0);
        const auto c = local_of_[r];
        for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e) {
          const auto u = unknown_of_[local.column[e]];
          if (u >= 0) trip.emplace_back(r, u, -local.prob[e]);
        }
      }
      sparse_.resize(n, n);
      sparse_.setFromTriplets(trip.begin(), trip.end());
      iterative_ = std::make_unique<Iterative>();
      configure(*iterative_, sparse_);
    }
  }

  std::size_t unknowns() const noexcept { return local_of_.size(); }
  /// Local index of unknown `u`.
  std::size_t local_of(std::size_t u) const { return local_of_[u]; }
  /// Unknown index of local state `i`, or -1 for targets.
  std::int64_t unknown_of(std::size_t i) const { return unknown_of_[i]; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (unknowns() == 0) return {};
    if (dense_) return dense_->solve(rhs);
    return run(*iterative_, rhs);
  }

  Eigen::VectorXd solve_transposed(const Eigen::VectorXd& rhs) const {
    if (unknowns() == 0) return {};
    if (dense_) return dense_->transpose().solve(rhs);
    if (!iterative_t_) {
      sparse_t_ = sparse_.transpose();
      iterative_t_ = std::make_unique<Iterative>();
      configure(*iterative_t_, sparse_t_);
    }
    return run(*iterative_t_, rhs);
  }

 private:
  using Iterative = Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>;

  void configure(Iterative& solver, const Eigen::SparseMatrix<double>& m) const {
    solver.setTolerance(kIterativeTolerance);
    solver.setMaxIterations(static_cast<Eigen::Index>(10 * n_local_));
    solver.compute(m);
    if (solver.info() != Eigen::Success) throw NumericalError("preconditioner setup failed");
  }

  Eigen::VectorXd run(Iterative& solver, const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw NumericalError("iterative solve did not converge (error " + std::to_string(solver.error()) + ")");
    return x;
  }

  std::size_t n_local_;
  std::vector<std::size_t> local_of_;
  std::vector<std::int64_t> unknown_of_;
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> dense_;
  Eigen::SparseMatrix<double> sparse_;
  mutable Eigen::SparseMatrix<double> sparse_t_;
  std::unique_ptr<Iterative> iterative_;
  mutable std::unique_ptr<Iterative> iterative_t_;
};

}  // namespace ftrv
