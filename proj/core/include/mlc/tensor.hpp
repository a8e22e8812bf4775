#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "mlc/error.hpp"

namespace mlc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Order-K dense real tensor, first index varying fastest.
///
/// The flat offset of (i_1..i_K), 1-based, is sum_t (i_t - 1) * prod_{n<t} I_n.
/// All public mode arguments are 1-based (matching the usual tensor-algebra
/// convention); element access below is 0-based. With this layout the mode-1
/// unfolding is a reinterpretation of the same value sequence.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<Eigen::Index> shape);
  DenseTensor(std::vector<Eigen::Index> shape, std::vector<double> values);

  Eigen::Index order() const { return static_cast<Eigen::Index>(shape_.size()); }
  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index extent(Eigen::Index mode1b) const;  // 1-based mode
  Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size()); }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// 0-based multi-index access.
  double operator()(const std::vector<Eigen::Index>& idx) const { return values_[offset(idx)]; }
  double& operator()(const std::vector<Eigen::Index>& idx) { return values_[offset(idx)]; }

  Eigen::Index offset(const std::vector<Eigen::Index>& idx) const;

  static DenseTensor zeros(std::vector<Eigen::Index> shape) { return DenseTensor(std::move(shape)); }

 private:
  std::vector<Eigen::Index> shape_;
  std::vector<double> values_;
};

/// Rank-R CP factorization: K factor matrices of dims I_k x R.
struct CPFactors {
  Eigen::Index rank = 0;
  std::vector<Mat> factors;

  /// Validates R >= 1, K >= 2, and equal column counts.
  void validate() const;
};

/// Tucker factorization: core of shape [R_1..R_K] plus K factors I_k x R_k.
struct TuckerFactors {
  DenseTensor core;
  std::vector<Mat> factors;

  void validate() const;
};

/// Elementwise product of equal-shape matrices.
Mat hadamard(const Mat& a, const Mat& b);

/// Kronecker product: (I x M) x (J x N) -> (IJ) x (MN), blocks ordered by a's rows.
Mat kronecker(const Mat& a, const Mat& b);

/// Column-wise Kronecker product of matrices with equal column counts.
Mat khatri_rao(const Mat& a, const Mat& b);

/// Mode-k unfolding (k is 1-based): element (i_1..i_K) lands at row i_k,
/// column 1 + sum_{t != k} (i_t - 1) J_t with J_t = prod_{n<t, n != k} I_n.
Mat mode_k_unfold(const DenseTensor& t, Eigen::Index k);

/// Inverse of mode_k_unfold for the given shape.
DenseTensor mode_k_fold(const Mat& m, Eigen::Index k, const std::vector<Eigen::Index>& shape);

/// Contraction with a vector along mode k; result has order K-1.
DenseTensor mode_k_vprod(const DenseTensor& t, Eigen::Index k, const Vec& u);

/// Multiplication by a matrix along mode k: extent I_k becomes u.rows().
DenseTensor mode_k_mprod(const DenseTensor& t, Eigen::Index k, const Mat& u);

/// Sum of rank-one outer products, shape [I_1..I_K].
DenseTensor cp_reconstruct(const CPFactors& f);

/// core x_1 U(1) x_2 ... x_K U(K).
DenseTensor tucker_reconstruct(const TuckerFactors& f);

}  // namespace mlc
