#include "mlc/graph.hpp"

#include <algorithm>
#include <cmath>

namespace mlc {

double pairwise_sum(const double* x, std::ptrdiff_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::ptrdiff_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(const std::string& name, Mat value) {
  if (index_.count(name)) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  Entry e;
  e.grad = Mat::Zero(value.rows(), value.cols());
  e.m = Mat::Zero(value.rows(), value.cols());
  e.v = Mat::Zero(value.rows(), value.cols());
  e.value = std::move(value);
  index_[name] = entries_.size();
  names_.push_back(name);
  entries_.push_back(std::move(e));
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

Mat& ParamStore::value(const std::string& name) { return entry(name).value; }
const Mat& ParamStore::value(const std::string& name) const { return entry(name).value; }
Mat& ParamStore::grad(const std::string& name) { return entry(name).grad; }
const Mat& ParamStore::grad(const std::string& name) const { return entry(name).grad; }
std::int64_t ParamStore::step_count(const std::string& name) const { return entry(name).t; }

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (auto& e : entries_) {
    e.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.t));
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * e.grad;
    e.v = cfg.beta2 * e.v + (1.0 - cfg.beta2) * e.grad.cwiseProduct(e.grad);
    e.value.array() -=
        cfg.lr * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + cfg.eps);
    e.grad.setZero();
  }
}

Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = rng.uniform(-limit, limit);
  return w;
}

Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Mat w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = stddev * rng.normal();
  return w;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  evaluated_ = false;
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<std::int32_t>(nodes_.size()))
    throw GraphError("Tape: invalid node handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::fail(const Node& n, const std::string& msg) const {
  throw GraphError("Tape record #" + std::to_string(&n - nodes_.data()) + ": " + msg);
}

Eigen::Index Tape::rows(Var v) const { return node(v).rows; }
Eigen::Index Tape::cols(Var v) const { return node(v).cols; }

Tape::Var Tape::param(const std::string& name) {
  if (!store_) throw GraphError("Tape: param('" + name + "') without a bound ParamStore");
  const Mat& val = store_->value(name);  // throws if unknown
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.rows = val.rows();
  n.cols = val.cols();
  return push(std::move(n));
}

Tape::Var Tape::input(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  Node n;
  n.op = Op::kInput;
  n.name = name;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

Tape::Var Tape::constant(Mat value) {
  Node n;
  n.op = Op::kConst;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  return push(std::move(n));
}

void Tape::check_same_shape(const char* what, Var a, Var b) const {
  if (rows(a) != rows(b) || cols(a) != cols(b))
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(rows(a)) + "x" +
                         std::to_string(cols(a)) + " vs " + std::to_string(rows(b)) + "x" +
                         std::to_string(cols(b)));
}

Tape::Var Tape::add(Var a, Var b) {
  check_same_shape("add", a, b);
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id};
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  check_same_shape("sub", a, b);
  Node n;
  n.op = Op::kSub;
  n.in = {a.id, b.id};
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same_shape("mul", a, b);
  Node n;
  n.op = Op::kMul;
  n.in = {a.id, b.id};
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Eigen::Index ar = trans_a ? cols(a) : rows(a);
  const Eigen::Index ac = trans_a ? rows(a) : cols(a);
  const Eigen::Index br = trans_b ? cols(b) : rows(b);
  const Eigen::Index bc = trans_b ? rows(b) : cols(b);
  if (ac != br)
    throw DimensionError("matmul: inner dims differ, " + std::to_string(ar) + "x" + std::to_string(ac) +
                         " * " + std::to_string(br) + "x" + std::to_string(bc));
  Node n;
  n.op = Op::kMatMul;
  n.in = {a.id, b.id};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.rows = ar;
  n.cols = bc;
  return push(std::move(n));
}

Tape::Var Tape::affine(Var w, Var b, Var x) {
  if (cols(w) != rows(x) || rows(b) != rows(w) || cols(b) != 1)
    throw DimensionError("affine: W " + std::to_string(rows(w)) + "x" + std::to_string(cols(w)) +
                         ", b " + std::to_string(rows(b)) + "x" + std::to_string(cols(b)) + ", x " +
                         std::to_string(rows(x)) + "x" + std::to_string(cols(x)));
  Node n;
  n.op = Op::kAffine;
  n.in = {w.id, b.id, x.id};
  n.rows = rows(w);
  n.cols = cols(x);
  return push(std::move(n));
}

Tape::Var Tape::unary(Op op, Var a) {
  Node n;
  n.op = op;
  n.in = {a.id};
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::relu(Var a) { return unary(Op::kRelu, a); }
Tape::Var Tape::sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Tape::Var Tape::tanh(Var a) { return unary(Op::kTanh, a); }
Tape::Var Tape::exp(Var a) { return unary(Op::kExp, a); }
Tape::Var Tape::log(Var a) { return unary(Op::kLog, a); }
Tape::Var Tape::square(Var a) { return unary(Op::kSquare, a); }
Tape::Var Tape::softplus(Var a) { return unary(Op::kSoftplus, a); }
Tape::Var Tape::softmax_cols(Var a) { return unary(Op::kSoftmaxCols, a); }

Tape::Var Tape::axpb(Var a, double alpha, double beta) {
  Node n;
  n.op = Op::kAxpb;
  n.in = {a.id};
  n.a = alpha;
  n.b = beta;
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::clamp(Var a, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be < hi");
  Node n;
  n.op = Op::kClamp;
  n.in = {a.id};
  n.a = lo;
  n.b = hi;
  n.rows = rows(a);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSumAll;
  n.in = {a.id};
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

Tape::Var Tape::mean(Var a) {
  Node n;
  n.op = Op::kMeanAll;
  n.in = {a.id};
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

Tape::Var Tape::mean_cols(Var a) {
  Node n;
  n.op = Op::kMeanCols;
  n.in = {a.id};
  n.rows = rows(a);
  n.cols = 1;
  return push(std::move(n));
}

Tape::Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  Node n;
  n.op = Op::kConcatRows;
  n.cols = cols(parts[0]);
  for (const Var p : parts) {
    if (cols(p) != n.cols) throw DimensionError("concat_rows: column counts differ");
    n.rows += rows(p);
    n.in.push_back(p.id);
  }
  return push(std::move(n));
}

Tape::Var Tape::slice_rows(Var a, Eigen::Index first_row, Eigen::Index num_rows) {
  if (first_row < 0 || num_rows < 1 || first_row + num_rows > rows(a))
    throw DimensionError("slice_rows: [" + std::to_string(first_row) + ", +" +
                         std::to_string(num_rows) + ") outside " + std::to_string(rows(a)) + " rows");
  Node n;
  n.op = Op::kSliceRows;
  n.in = {a.id};
  n.first_row = first_row;
  n.rows = num_rows;
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::khatri_rao_cols(Var a, Var b) {
  if (cols(a) != cols(b)) throw DimensionError("khatri_rao_cols: column counts differ");
  Node n;
  n.op = Op::kKhatriRaoCols;
  n.in = {a.id, b.id};
  n.rows = rows(a) * rows(b);
  n.cols = cols(a);
  return push(std::move(n));
}

Tape::Var Tape::bce_with_logits(Var logits, Var targets) {
  check_same_shape("bce_with_logits", logits, targets);
  Node n;
  n.op = Op::kBceLogits;
  n.in = {logits.id, targets.id};
  n.rows = rows(logits);
  n.cols = cols(logits);
  return push(std::move(n));
}

Tape::Var Tape::ce_with_logits(Var logits, Var targets) {
  check_same_shape("ce_with_logits", logits, targets);
  Node n;
  n.op = Op::kCeLogits;
  n.in = {logits.id, targets.id};
  n.rows = 1;
  n.cols = cols(logits);
  return push(std::move(n));
}

void Tape::mark_output(const std::string& name, Var v) {
  node(v);  // validate
  outputs_[name] = v;
}

const Mat& Tape::value(Var v) const {
  const Node& n = node(v);
  if (!n.evaluated) throw GraphError("Tape: value requested before eval()");
  return n.value;
}

const Mat& Tape::output(const std::string& name) const {
  const auto it = outputs_.find(name);
  if (it == outputs_.end()) throw GraphError("Tape: unknown output '" + name + "'");
  return value(it->second);
}

void Tape::forward_node(Node& n, const std::map<std::string, Mat>& inputs) {
  const auto in = [&](std::size_t i) -> const Mat& {
    return nodes_[static_cast<std::size_t>(n.in[i])].value;
  };
  switch (n.op) {
    case Op::kParam: {
      n.value = store_->value(n.name);
      if (n.value.rows() != n.rows || n.value.cols() != n.cols)
        fail(n, "parameter '" + n.name + "' changed shape since recording");
      break;
    }
    case Op::kInput: {
      const auto it = inputs.find(n.name);
      if (it == inputs.end()) fail(n, "missing input '" + n.name + "'");
      if (it->second.rows() != n.rows || it->second.cols() != n.cols)
        fail(n, "input '" + n.name + "' has shape " + std::to_string(it->second.rows()) + "x" +
                    std::to_string(it->second.cols()) + ", declared " + std::to_string(n.rows) +
                    "x" + std::to_string(n.cols));
      n.value = it->second;
      break;
    }
    case Op::kConst:
      break;
    case Op::kAdd:
      n.value = in(0) + in(1);
      break;
    case Op::kSub:
      n.value = in(0) - in(1);
      break;
    case Op::kMul:
      n.value = in(0).cwiseProduct(in(1));
      break;
    case Op::kMatMul: {
      const Mat& a = in(0);
      const Mat& b = in(1);
      if (!n.trans_a && !n.trans_b) n.value.noalias() = a * b;
      else if (n.trans_a && !n.trans_b) n.value.noalias() = a.transpose() * b;
      else if (!n.trans_a && n.trans_b) n.value.noalias() = a * b.transpose();
      else n.value.noalias() = a.transpose() * b.transpose();
      break;
    }
    case Op::kAffine:
      n.value.noalias() = in(0) * in(2);
      n.value.colwise() += Eigen::VectorXd(in(1).col(0));
      break;
    case Op::kRelu:
      n.value = in(0).cwiseMax(0.0);
      break;
    case Op::kSigmoid:
      n.value = (1.0 / (1.0 + (-in(0).array()).exp())).matrix();
      break;
    case Op::kTanh:
      n.value = in(0).array().tanh().matrix();
      break;
    case Op::kExp:
      n.value = in(0).array().exp().matrix();
      break;
    case Op::kLog:
      n.value = in(0).array().log().matrix();
      break;
    case Op::kSquare:
      n.value = in(0).array().square().matrix();
      break;
    case Op::kSoftplus:
      n.value = (in(0).array().max(0.0) + (-in(0).array().abs()).exp().log1p()).matrix();
      break;
    case Op::kAxpb:
      n.value = (n.a * in(0).array() + n.b).matrix();
      break;
    case Op::kClamp:
      n.value = in(0).array().max(n.a).min(n.b).matrix();
      break;
    case Op::kSoftmaxCols: {
      const Mat& x = in(0);
      n.value.resize(x.rows(), x.cols());
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::ArrayXd e = (x.col(c).array() - x.col(c).maxCoeff()).exp();
        n.value.col(c) = (e / e.sum()).matrix();
      }
      break;
    }
    case Op::kSumAll:
      n.value = Mat::Constant(1, 1, pairwise_sum(in(0).data(), in(0).size()));
      break;
    case Op::kMeanAll:
      n.value = Mat::Constant(
          1, 1, pairwise_sum(in(0).data(), in(0).size()) / static_cast<double>(in(0).size()));
      break;
    case Op::kMeanCols:
      n.value = in(0).rowwise().mean();
      break;
    case Op::kConcatRows: {
      n.value.resize(n.rows, n.cols);
      Eigen::Index r = 0;
      for (const auto id : n.in) {
        const Mat& p = nodes_[static_cast<std::size_t>(id)].value;
        n.value.middleRows(r, p.rows()) = p;
        r += p.rows();
      }
      break;
    }
    case Op::kSliceRows:
      n.value = in(0).middleRows(n.first_row, n.rows);
      break;
    case Op::kKhatriRaoCols: {
      const Mat& a = in(0);
      const Mat& b = in(1);
      n.value.resize(a.rows() * b.rows(), a.cols());
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          n.value.col(c).segment(i * b.rows(), b.rows()) = a(i, c) * b.col(c);
      break;
    }
    case Op::kBceLogits: {
      const auto l = in(0).array();
      const auto t = in(1).array();
      n.value = (l.max(0.0) + (-l.abs()).exp().log1p() - t * l).matrix();
      break;
    }
    case Op::kCeLogits: {
      const Mat& l = in(0);
      const Mat& t = in(1);
      n.value.resize(1, l.cols());
      for (Eigen::Index c = 0; c < l.cols(); ++c) {
        const double m = l.col(c).maxCoeff();
        const double lse = m + std::log((l.col(c).array() - m).exp().sum());
        n.value(0, c) = lse - t.col(c).dot(l.col(c));
      }
      break;
    }
  }
  n.evaluated = true;
}

void Tape::eval(const std::map<std::string, Mat>& inputs) {
  for (auto& n : nodes_) forward_node(n, inputs);
  evaluated_ = true;
}

void Tape::backward_node(Node& n) {
  if (n.grad.size() == 0) return;  // no downstream use
  const auto in = [&](std::size_t i) -> Node& { return nodes_[static_cast<std::size_t>(n.in[i])]; };
  const auto acc = [](Node& target, const Mat& g) {
    if (target.grad.size() == 0) target.grad = Mat::Zero(target.value.rows(), target.value.cols());
    target.grad += g;
  };
  const Mat& g = n.grad;
  switch (n.op) {
    case Op::kParam:
      store_->grad(n.name) += g;
      break;
    case Op::kInput: {
      auto [it, inserted] = input_grads_.try_emplace(n.name, g);
      if (!inserted) it->second += g;
      break;
    }
    case Op::kConst:
      break;
    case Op::kAdd:
      acc(in(0), g);
      acc(in(1), g);
      break;
    case Op::kSub:
      acc(in(0), g);
      acc(in(1), -g);
      break;
    case Op::kMul:
      acc(in(0), g.cwiseProduct(in(1).value));
      acc(in(1), g.cwiseProduct(in(0).value));
      break;
    case Op::kMatMul: {
      const Mat& a = in(0).value;
      const Mat& b = in(1).value;
      if (!n.trans_a && !n.trans_b) {
        acc(in(0), g * b.transpose());
        acc(in(1), a.transpose() * g);
      } else if (n.trans_a && !n.trans_b) {
        acc(in(0), b * g.transpose());
        acc(in(1), a * g);
      } else if (!n.trans_a && n.trans_b) {
        acc(in(0), g * b);
        acc(in(1), g.transpose() * a);
      } else {
        acc(in(0), b.transpose() * g.transpose());
        acc(in(1), g.transpose() * a.transpose());
      }
      break;
    }
    case Op::kAffine:
      acc(in(0), g * in(2).value.transpose());
      acc(in(1), g.rowwise().sum());
      acc(in(2), in(0).value.transpose() * g);
      break;
    case Op::kRelu:
      acc(in(0), (in(0).value.array() > 0.0).select(g, Mat::Zero(g.rows(), g.cols())));
      break;
    case Op::kSigmoid:
      acc(in(0), (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
      break;
    case Op::kTanh:
      acc(in(0), (g.array() * (1.0 - n.value.array().square())).matrix());
      break;
    case Op::kExp:
      acc(in(0), g.cwiseProduct(n.value));
      break;
    case Op::kLog:
      acc(in(0), (g.array() / in(0).value.array()).matrix());
      break;
    case Op::kSquare:
      acc(in(0), (2.0 * g.array() * in(0).value.array()).matrix());
      break;
    case Op::kSoftplus:
      acc(in(0), (g.array() / (1.0 + (-in(0).value.array()).exp())).matrix());
      break;
    case Op::kAxpb:
      acc(in(0), n.a * g);
      break;
    case Op::kClamp: {
      const auto x = in(0).value.array();
      acc(in(0), ((x > n.a && x < n.b).select(g, Mat::Zero(g.rows(), g.cols()))));
      break;
    }
    case Op::kSoftmaxCols: {
      Mat gi(g.rows(), g.cols());
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const double dot = n.value.col(c).dot(g.col(c));
        gi.col(c) = n.value.col(c).cwiseProduct(g.col(c) - Vec::Constant(g.rows(), dot));
      }
      acc(in(0), gi);
      break;
    }
    case Op::kSumAll:
      acc(in(0), Mat::Constant(in(0).value.rows(), in(0).value.cols(), g(0, 0)));
      break;
    case Op::kMeanAll:
      acc(in(0), Mat::Constant(in(0).value.rows(), in(0).value.cols(),
                               g(0, 0) / static_cast<double>(in(0).value.size())));
      break;
    case Op::kMeanCols:
      acc(in(0), g.replicate(1, in(0).value.cols()) / static_cast<double>(in(0).value.cols()));
      break;
    case Op::kConcatRows: {
      Eigen::Index r = 0;
      for (const auto id : n.in) {
        Node& p = nodes_[static_cast<std::size_t>(id)];
        acc(p, g.middleRows(r, p.value.rows()));
        r += p.value.rows();
      }
      break;
    }
    case Op::kSliceRows: {
      Mat gi = Mat::Zero(in(0).value.rows(), in(0).value.cols());
      gi.middleRows(n.first_row, n.rows) = g;
      acc(in(0), gi);
      break;
    }
    case Op::kKhatriRaoCols: {
      const Mat& a = in(0).value;
      const Mat& b = in(1).value;
      Mat ga = Mat::Zero(a.rows(), a.cols());
      Mat gb = Mat::Zero(b.rows(), b.cols());
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const auto gseg = g.col(c).segment(i * b.rows(), b.rows());
          ga(i, c) += gseg.dot(b.col(c));
          gb.col(c) += a(i, c) * gseg;
        }
      acc(in(0), ga);
      acc(in(1), gb);
      break;
    }
    case Op::kBceLogits: {
      const auto l = in(0).value.array();
      const auto t = in(1).value.array();
      acc(in(0), (g.array() * (1.0 / (1.0 + (-l).exp()) - t)).matrix());
      acc(in(1), (-g.array() * l).matrix());
      break;
    }
    case Op::kCeLogits: {
      const Mat& l = in(0).value;
      const Mat& t = in(1).value;
      Mat gl(l.rows(), l.cols());
      for (Eigen::Index c = 0; c < l.cols(); ++c) {
        Eigen::ArrayXd e = (l.col(c).array() - l.col(c).maxCoeff()).exp();
        gl.col(c) = g(0, c) * (e / e.sum() - t.col(c).array()).matrix();
      }
      acc(in(0), gl);
      acc(in(1), (-(l.array().rowwise() * g.row(0).array())).matrix());
      break;
    }
  }
}

void Tape::grad(const std::string& seed_output) {
  if (!evaluated_) throw GraphError("Tape: grad() before eval()");
  const auto it = outputs_.find(seed_output);
  if (it == outputs_.end()) throw GraphError("Tape: unknown output '" + seed_output + "'");
  Node& seed = nodes_[static_cast<std::size_t>(it->second.id)];
  if (seed.rows != 1 || seed.cols != 1)
    throw ContractError("Tape: gradient seed '" + seed_output + "' is " + std::to_string(seed.rows) +
                        "x" + std::to_string(seed.cols) + ", must be scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  input_grads_.clear();
  seed.grad = Mat::Constant(1, 1, 1.0);
  for (auto rit = nodes_.rbegin(); rit != nodes_.rend(); ++rit) backward_node(*rit);
}

const Mat& Tape::input_grad(const std::string& name) const {
  const auto it = input_grads_.find(name);
  if (it == input_grads_.end())
    throw GraphError("Tape: no gradient recorded for input '" + name + "' (did grad() run?)");
  return it->second;
}

// ---------------------------------------------------------------------------

double grad_check(Tape& tape, ParamStore& store, const std::map<std::string, Mat>& inputs,
                  const std::string& seed_output, double h, Eigen::Index max_entries_per_param) {
  if (!(h > 0.0)) throw ContractError("grad_check: h must be > 0");
  store.zero_grad();
  tape.eval(inputs);
  tape.grad(seed_output);

  std::map<std::string, Mat> analytic;
  for (const auto& name : store.names()) analytic[name] = store.grad(name);

  double max_rel = 0.0;
  for (const auto& name : store.names()) {
    Mat& theta = store.value(name);
    const Mat& a = analytic[name];
    const Eigen::Index total = theta.size();
    Eigen::Index stride = 1;
    if (max_entries_per_param > 0 && total > max_entries_per_param)
      stride = (total + max_entries_per_param - 1) / max_entries_per_param;
    for (Eigen::Index i = 0; i < total; i += stride) {
      const double saved = theta.data()[i];
      theta.data()[i] = saved + h;
      tape.eval(inputs);
      const double fp = tape.output(seed_output)(0, 0);
      theta.data()[i] = saved - h;
      tape.eval(inputs);
      const double fm = tape.output(seed_output)(0, 0);
      theta.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double ana = a.data()[i];
      const double rel =
          std::abs(ana - numeric) / std::max({std::abs(ana), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  tape.eval(inputs);  // leave tape consistent with restored parameters
  return max_rel;
}

}  // namespace mlc
