#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "reltrack/dynamics.hpp"

namespace reltrack {

/// Default relative tolerance deciding whether a minimum eigenvalue counts
/// as strictly positive: the matrix passes when lambda_min exceeds this
/// fraction of lambda_max.
inline constexpr double kPositivityRelTol = 1e-9;

/// Excitation summary of a window of baseline direction vectors.
///
/// a_hat is the measured excitation level (the minimum eigenvalue itself)
/// and a_check the analytic ceiling N * max ||q||^2, which the maximum
/// eigenvalue can never exceed.
struct PEReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int window = 0;
  double a_hat = 0.0;
  double a_check = 0.0;
  bool satisfied = false;
};

/// Sums q q^T over the window and reports its eigenvalue range.
///
/// The window is persistently exciting when the sum has full rank, i.e.
/// the baseline directions span all of 3-space with definite weight.
inline PEReport pe_gram(const std::vector<Eigen::Vector3d>& qs,
                        double rel_tol = kPositivityRelTol) {
  if (qs.empty()) {
    throw std::invalid_argument("pe_gram: empty window");
  }
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  double max_norm_sq = 0.0;
  for (const Eigen::Vector3d& q : qs) {
    sum.noalias() += q * q.transpose();
    max_norm_sq = std::max(max_norm_sq, q.squaredNorm());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sum);
  PEReport out;
  out.window = static_cast<int>(qs.size());
  out.lambda_min = eig.eigenvalues().minCoeff();
  out.lambda_max = eig.eigenvalues().maxCoeff();
  out.a_hat = out.lambda_min;
  out.a_check = static_cast<double>(qs.size()) * max_norm_sq;
  out.satisfied = out.lambda_min > rel_tol * std::max(out.lambda_max, 0.0);
  return out;
}

/// Observability summary of a window of output matrices.
struct GramianReport {
  Matrix6d gram = Matrix6d::Zero();
  int window = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool satisfied = false;
};

/// Assembles the discrete observability Gramian over a window.
///
/// Each block of outputs[m] has 6 columns (one or more output rows at
/// step m). The state at step m maps back to the end of the window
/// through A^(M-1-m), so the Gramian is
///   sum_m (A^(M-1-m))^T outputs[m]^T outputs[m] A^(M-1-m),
/// with the last step contributing through the identity. The window is
/// uniformly observable when the Gramian is positive definite.
inline GramianReport obs_gramian(const DynamicsParams& params,
                                 const std::vector<Eigen::MatrixXd>& outputs,
                                 double rel_tol = kPositivityRelTol) {
  if (outputs.empty()) {
    throw std::invalid_argument("obs_gramian: empty window");
  }
  for (const Eigen::MatrixXd& c : outputs) {
    if (c.cols() != 6 || c.rows() < 1) {
      throw std::invalid_argument("obs_gramian: output blocks must have 6 columns");
    }
  }
  const int window = static_cast<int>(outputs.size());
  Matrix6d gram = Matrix6d::Zero();
  Matrix6d power = Matrix6d::Identity();
  for (int m = window - 1; m >= 0; --m) {
    const Eigen::MatrixXd cp = outputs[static_cast<std::size_t>(m)] * power;
    gram.noalias() += cp.transpose() * cp;
    power = params.A() * power;
  }
  gram = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(gram);
  GramianReport out;
  out.gram = gram;
  out.window = window;
  out.lambda_min = eig.eigenvalues().minCoeff();
  out.lambda_max = eig.eigenvalues().maxCoeff();
  out.satisfied = out.lambda_min > rel_tol * std::max(out.lambda_max, 0.0);
  return out;
}

/// Probabilistic excitation certificate for randomized attitude windows.
struct ChernoffBound {
  double a_hat = 0.0;
  double p_bound = 0.0;
  double log_p_bound = 0.0;
};

/// Chernoff bound on the probability that a window of uniformly random
/// baseline directions fails the excitation level a_hat.
///
/// For N directions of norm xi, the window sum concentrates around
/// (N/3) xi^2 per axis; the probability that its minimum eigenvalue
/// falls below a_hat = (1-c)(N/3) xi^2 is at most
///   3 * [exp(-c) / (1-c)^(1-c)]^(N/3).
/// Evaluated in the log domain so large N cannot underflow the
/// intermediate terms; p_bound itself may round to zero, in which case
/// log_p_bound still carries the exponent.
inline ChernoffBound chernoff_pe_bound(int window, double c, double xi) {
  if (window < 1) {
    throw std::invalid_argument("chernoff_pe_bound: window must be at least 1");
  }
  if (!(c >= 0.0 && c <= 1.0)) {
    throw std::invalid_argument("chernoff_pe_bound: c must lie in [0, 1]");
  }
  const double third = static_cast<double>(window) / 3.0;
  ChernoffBound out;
  out.a_hat = (1.0 - c) * third * xi * xi;
  // (1-c) log(1-c) -> 0 as c -> 1.
  const double entropy = (c < 1.0) ? (1.0 - c) * std::log(1.0 - c) : 0.0;
  out.log_p_bound = std::log(3.0) + third * (-c - entropy);
  out.p_bound = std::exp(out.log_p_bound);
  return out;
}

}  // namespace reltrack
