#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlc/error.hpp"
#include "mlc/rng.hpp"
#include "mlc/tensor.hpp"

namespace mlc {

/// Numerically careful sum (pairwise recursion); deterministic.
double pairwise_sum(const double* x, std::ptrdiff_t n);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named trainable arrays with parallel gradient buffers and per-parameter
/// Adam state. Iteration order is insertion order, which makes every sweep
/// over parameters (updates, checkpoints, gradient checks) deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Mat value);
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);
  const Mat& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  void zero_grad();

  /// Bias-corrected Adam update on every parameter; clears gradients and
  /// advances each parameter's step counter.
  void adam_step(const AdamConfig& cfg);

  std::int64_t step_count(const std::string& name) const;

 private:
  struct Entry {
    Mat value, grad, m, v;
    std::int64_t t = 0;
  };
  friend class Tape;
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::vector<std::string> names_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Glorot/Xavier uniform init for an affine weight of shape rows x cols.
Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

/// Append-only reverse-mode tape over f64 matrices. Vectors are one-column
/// matrices and scalars are 1x1. Shapes are fixed and checked at record time,
/// so a malformed graph fails at construction, not mid-training.
///
/// Typical life cycle: build once per minibatch, eval(), grad(), discard.
class Tape {
 public:
  struct Var {
    std::int32_t id = -1;
  };

  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  // Leaves.
  Var param(const std::string& name);
  Var input(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Var constant(Mat value);

  // Elementwise and linear algebra primitives.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  /// w x + b with b broadcast over the columns of x.
  Var affine(Var w, Var b, Var x);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var softplus(Var a);
  /// alpha * a + beta, elementwise.
  Var axpb(Var a, double alpha, double beta);
  Var clamp(Var a, double lo, double hi);
  Var softmax_cols(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var mean_cols(Var a);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, Eigen::Index first_row, Eigen::Index num_rows);
  Var khatri_rao_cols(Var a, Var b);
  /// Per-element softplus(l) - t*l; summing it gives the Bernoulli NLL of
  /// sigmoid(l) against targets t. Stable for large |l|.
  Var bce_with_logits(Var logits, Var targets);
  /// Per-column logsumexp(l) - t.l (softmax cross-entropy), output 1 x B.
  Var ce_with_logits(Var logits, Var targets);

  void mark_output(const std::string& name, Var v);

  Eigen::Index rows(Var v) const;
  Eigen::Index cols(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  /// Forward pass. Inputs are matched by declared name and shape.
  void eval(const std::map<std::string, Mat>& inputs = {});

  const Mat& value(Var v) const;
  const Mat& output(const std::string& name) const;
  const std::map<std::string, Var>& outputs() const { return outputs_; }

  /// Reverse sweep from a scalar output. Parameter gradients accumulate into
  /// the bound ParamStore (+=); input gradients are kept on the tape.
  void grad(const std::string& seed_output);

  const Mat& input_grad(const std::string& name) const;

 private:
  enum class Op : std::uint8_t {
    kParam, kInput, kConst,
    kAdd, kSub, kMul, kMatMul, kAffine,
    kRelu, kSigmoid, kTanh, kExp, kLog, kSquare, kSoftplus,
    kAxpb, kClamp, kSoftmaxCols, kSumAll, kMeanAll, kMeanCols,
    kConcatRows, kSliceRows, kKhatriRaoCols, kBceLogits, kCeLogits,
  };

  struct Node {
    Op op;
    std::vector<std::int32_t> in;
    Eigen::Index rows = 0, cols = 0;
    double a = 0.0, b = 0.0;
    bool trans_a = false, trans_b = false;
    Eigen::Index first_row = 0;
    std::string name;  // param/input name
    Mat value;
    Mat grad;
    bool evaluated = false;
  };

  Var push(Node n);
  const Node& node(Var v) const;
  Var unary(Op op, Var a);
  void check_same_shape(const char* what, Var a, Var b) const;
  void forward_node(Node& n, const std::map<std::string, Mat>& inputs);
  void backward_node(Node& n);
  [[noreturn]] void fail(const Node& n, const std::string& msg) const;

  ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::map<std::string, Var> outputs_;
  std::map<std::string, Mat> input_grads_;
  bool evaluated_ = false;
};

/// Max relative error between tape gradients and central finite differences
/// over the parameters in the bound store. Denominator per entry is
/// max(|analytic|, |numeric|, 1e-8). `max_entries_per_param` == 0 checks
/// every entry; otherwise a deterministic evenly-strided subset.
double grad_check(Tape& tape, ParamStore& store, const std::map<std::string, Mat>& inputs,
                  const std::string& seed_output, double h,
                  Eigen::Index max_entries_per_param = 0);

}  // namespace mlc
