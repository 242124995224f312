// Alternative evaluations of the gains, used to cross-check the production
// route in mc_gain/enkf_gain.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "robust_enkf/correntropy.hpp"
#include "robust_enkf/errors.hpp"
#include "robust_enkf/model.hpp"

namespace robust_enkf {

/// Information form (l_C Ĉ⁻¹ + Hᵀ l_R R⁻¹ H)⁻¹ Hᵀ l_R R⁻¹. Requires Ĉ to be
/// invertible, unlike mc_gain.
inline MatrixXd information_form_gain(const MatrixXd& c_hat, const MatrixXd& H,
                                      const MatrixXd& r, const WeightPair& w = {}) {
  const Eigen::Index n = c_hat.rows();
  const Eigen::Index m = r.rows();
  Eigen::LLT<MatrixXd> c_llt(c_hat);
  Eigen::LLT<MatrixXd> r_llt(r);
  if (c_llt.info() != Eigen::Success || r_llt.info() != Eigen::Success) {
    throw SingularityError("information_form_gain: Ĉ and R must be positive definite");
  }
  const MatrixXd c_inv = c_llt.solve(MatrixXd::Identity(n, n));
  const MatrixXd r_inv_h = r_llt.solve(H);                   // R⁻¹ H
  const MatrixXd r_inv = r_llt.solve(MatrixXd::Identity(m, m));
  const MatrixXd information = w.l_C * c_inv + w.l_R * H.transpose() * r_inv_h;
  Eigen::LLT<MatrixXd> info_llt(0.5 * (information + information.transpose()));
  if (info_llt.info() != Eigen::Success) {
    throw SingularityError("information_form_gain: information matrix is not positive definite");
  }
  return info_llt.solve(w.l_R * H.transpose() * r_inv);
}

/// Right-hand side of the matrix inversion lemma,
///   A⁻¹ - A⁻¹ B (D A⁻¹ B + C⁻¹)⁻¹ D A⁻¹,
/// which equals (A + B C D)⁻¹ for non-singular A and C.
inline MatrixXd woodbury_inverse(const MatrixXd& a, const MatrixXd& b, const MatrixXd& c,
                                 const MatrixXd& d) {
  if (a.rows() != a.cols() || c.rows() != c.cols() || b.rows() != a.rows() ||
      b.cols() != c.rows() || d.rows() != c.rows() || d.cols() != a.cols()) {
    throw ConfigError("woodbury_inverse: dimension mismatch");
  }
  Eigen::PartialPivLU<MatrixXd> a_lu(a);
  Eigen::PartialPivLU<MatrixXd> c_lu(c);
  const MatrixXd a_inv = a_lu.inverse();
  const MatrixXd inner = d * a_inv * b + c_lu.inverse();
  Eigen::PartialPivLU<MatrixXd> inner_lu(inner);
  return a_inv - a_inv * b * inner_lu.solve(d * a_inv);
}

}  // namespace robust_enkf
