#include "mlc/tensor.hpp"

#include <numeric>
#include <sstream>

namespace mlc {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

std::string shape_str(const std::vector<Eigen::Index>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Eigen::Index product(const std::vector<Eigen::Index>& s) {
  return std::accumulate(s.begin(), s.end(), Eigen::Index{1}, std::multiplies<>());
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Eigen::Index> shape) : shape_(std::move(shape)) {
  for (const auto e : shape_)
    if (e < 1) throw DimensionError("DenseTensor: extents must be >= 1, got " + shape_str(shape_));
  values_.assign(static_cast<std::size_t>(product(shape_)), 0.0);
}

DenseTensor::DenseTensor(std::vector<Eigen::Index> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (const auto e : shape_)
    if (e < 1) throw DimensionError("DenseTensor: extents must be >= 1, got " + shape_str(shape_));
  if (static_cast<Eigen::Index>(values_.size()) != product(shape_))
    throw DimensionError("DenseTensor: " + std::to_string(values_.size()) +
                         " values for shape " + shape_str(shape_));
}

Eigen::Index DenseTensor::extent(Eigen::Index mode1b) const {
  if (mode1b < 1 || mode1b > order())
    throw ModeError("mode " + std::to_string(mode1b) + " out of range 1.." + std::to_string(order()));
  return shape_[static_cast<std::size_t>(mode1b - 1)];
}

Eigen::Index DenseTensor::offset(const std::vector<Eigen::Index>& idx) const {
  Eigen::Index off = 0, stride = 1;
  for (std::size_t t = 0; t < shape_.size(); ++t) {
    off += idx[t] * stride;
    stride *= shape_[t];
  }
  return off;
}

void CPFactors::validate() const {
  if (rank < 1) throw DimensionError("CPFactors: rank must be >= 1");
  if (factors.size() < 2) throw DimensionError("CPFactors: need K >= 2 factor matrices");
  for (std::size_t k = 0; k < factors.size(); ++k)
    if (factors[k].cols() != rank)
      throw DimensionError("CPFactors: factor " + std::to_string(k + 1) + " has " +
                           std::to_string(factors[k].cols()) + " columns, expected rank " +
                           std::to_string(rank));
}

void TuckerFactors::validate() const {
  if (core.order() != static_cast<Eigen::Index>(factors.size()))
    throw DimensionError("TuckerFactors: core order " + std::to_string(core.order()) +
                         " != factor count " + std::to_string(factors.size()));
  for (Eigen::Index k = 1; k <= core.order(); ++k)
    if (factors[static_cast<std::size_t>(k - 1)].cols() != core.extent(k))
      throw DimensionError("TuckerFactors: factor " + std::to_string(k) + " has " +
                           std::to_string(factors[static_cast<std::size_t>(k - 1)].cols()) +
                           " columns, core extent is " + std::to_string(core.extent(k)));
}

Mat hadamard(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("hadamard: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
  return a.cwiseProduct(b);
}

Mat kronecker(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat khatri_rao(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols())
    throw DimensionError("khatri_rao: column counts differ, " + shape_str(a.rows(), a.cols()) +
                         " vs " + shape_str(b.rows(), b.cols()));
  Mat out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index n = 0; n < a.cols(); ++n)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.col(n).segment(i * b.rows(), b.rows()) = a(i, n) * b.col(n);
  return out;
}

Mat mode_k_unfold(const DenseTensor& t, Eigen::Index k) {
  const Eigen::Index K = t.order();
  if (k < 1 || k > K)
    throw ModeError("mode_k_unfold: mode " + std::to_string(k) + " out of range 1.." + std::to_string(K));
  const auto& shape = t.shape();
  const Eigen::Index ik = shape[static_cast<std::size_t>(k - 1)];
  const Eigen::Index cols = t.size() / ik;
  Mat out(ik, cols);

  // Walk storage order once; for each element derive (row, col) from the
  // running multi-index. J_t strides accumulate over modes t != k.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(K), 0);
  std::vector<Eigen::Index> colstride(static_cast<std::size_t>(K), 0);
  Eigen::Index j = 1;
  for (Eigen::Index tmode = 0; tmode < K; ++tmode) {
    if (tmode == k - 1) continue;
    colstride[static_cast<std::size_t>(tmode)] = j;
    j *= shape[static_cast<std::size_t>(tmode)];
  }
  const auto& vals = t.values();
  for (Eigen::Index flat = 0; flat < t.size(); ++flat) {
    Eigen::Index col = 0;
    for (Eigen::Index tmode = 0; tmode < K; ++tmode)
      col += idx[static_cast<std::size_t>(tmode)] * colstride[static_cast<std::size_t>(tmode)];
    out(idx[static_cast<std::size_t>(k - 1)], col) = vals[static_cast<std::size_t>(flat)];
    for (Eigen::Index tmode = 0; tmode < K; ++tmode) {
      auto& it = idx[static_cast<std::size_t>(tmode)];
      if (++it < shape[static_cast<std::size_t>(tmode)]) break;
      it = 0;
    }
  }
  return out;
}

DenseTensor mode_k_fold(const Mat& m, Eigen::Index k, const std::vector<Eigen::Index>& shape) {
  const Eigen::Index K = static_cast<Eigen::Index>(shape.size());
  if (k < 1 || k > K)
    throw ModeError("mode_k_fold: mode " + std::to_string(k) + " out of range 1.." + std::to_string(K));
  DenseTensor out(shape);
  const Eigen::Index ik = shape[static_cast<std::size_t>(k - 1)];
  if (m.rows() != ik || m.rows() * m.cols() != out.size())
    throw DimensionError("mode_k_fold: matrix " + shape_str(m.rows(), m.cols()) +
                         " does not fold into " + shape_str(shape) + " along mode " + std::to_string(k));

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(K), 0);
  std::vector<Eigen::Index> colstride(static_cast<std::size_t>(K), 0);
  Eigen::Index j = 1;
  for (Eigen::Index tmode = 0; tmode < K; ++tmode) {
    if (tmode == k - 1) continue;
    colstride[static_cast<std::size_t>(tmode)] = j;
    j *= shape[static_cast<std::size_t>(tmode)];
  }
  auto& vals = out.values();
  for (Eigen::Index flat = 0; flat < out.size(); ++flat) {
    Eigen::Index col = 0;
    for (Eigen::Index tmode = 0; tmode < K; ++tmode)
      col += idx[static_cast<std::size_t>(tmode)] * colstride[static_cast<std::size_t>(tmode)];
    vals[static_cast<std::size_t>(flat)] = m(idx[static_cast<std::size_t>(k - 1)], col);
    for (Eigen::Index tmode = 0; tmode < K; ++tmode) {
      auto& it = idx[static_cast<std::size_t>(tmode)];
      if (++it < shape[static_cast<std::size_t>(tmode)]) break;
      it = 0;
    }
  }
  return out;
}

DenseTensor mode_k_vprod(const DenseTensor& t, Eigen::Index k, const Vec& u) {
  const Eigen::Index K = t.order();
  if (k < 1 || k > K)
    throw ModeError("mode_k_vprod: mode " + std::to_string(k) + " out of range 1.." + std::to_string(K));
  if (u.size() != t.extent(k))
    throw DimensionError("mode_k_vprod: vector length " + std::to_string(u.size()) +
                         " != extent " + std::to_string(t.extent(k)) + " of mode " + std::to_string(k));

  std::vector<Eigen::Index> out_shape;
  for (Eigen::Index tmode = 1; tmode <= K; ++tmode)
    if (tmode != k) out_shape.push_back(t.extent(tmode));
  Mat unf = mode_k_unfold(t, k);                   // I_k x prod(rest)
  Eigen::RowVectorXd row = u.transpose() * unf;    // 1 x prod(rest)
  if (out_shape.empty()) return DenseTensor({}, {row(0)});
  std::vector<double> vals(row.data(), row.data() + row.size());
  return DenseTensor(out_shape, std::move(vals));
}

DenseTensor mode_k_mprod(const DenseTensor& t, Eigen::Index k, const Mat& u) {
  if (u.cols() != t.extent(k))
    throw DimensionError("mode_k_mprod: matrix " + shape_str(u.rows(), u.cols()) +
                         " cannot contract extent " + std::to_string(t.extent(k)) + " of mode " +
                         std::to_string(k));
  std::vector<Eigen::Index> out_shape = t.shape();
  out_shape[static_cast<std::size_t>(k - 1)] = u.rows();
  return mode_k_fold(u * mode_k_unfold(t, k), k, out_shape);
}

DenseTensor cp_reconstruct(const CPFactors& f) {
  f.validate();
  const Eigen::Index K = static_cast<Eigen::Index>(f.factors.size());
  std::vector<Eigen::Index> shape(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) shape[static_cast<std::size_t>(k)] = f.factors[static_cast<std::size_t>(k)].rows();
  DenseTensor out(shape);
  auto& vals = out.values();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(K), 0);
  for (Eigen::Index flat = 0; flat < out.size(); ++flat) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < f.rank; ++r) {
      double p = 1.0;
      for (Eigen::Index k = 0; k < K; ++k)
        p *= f.factors[static_cast<std::size_t>(k)](idx[static_cast<std::size_t>(k)], r);
      s += p;
    }
    vals[static_cast<std::size_t>(flat)] = s;
    for (Eigen::Index k = 0; k < K; ++k) {
      auto& it = idx[static_cast<std::size_t>(k)];
      if (++it < shape[static_cast<std::size_t>(k)]) break;
      it = 0;
    }
  }
  return out;
}

DenseTensor tucker_reconstruct(const TuckerFactors& f) {
  f.validate();
  DenseTensor out = f.core;
  for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(f.factors.size()); ++k)
    out = mode_k_mprod(out, k, f.factors[static_cast<std::size_t>(k - 1)]);
  return out;
}

}  // namespace mlc
