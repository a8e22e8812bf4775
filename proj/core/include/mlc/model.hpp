#pragma once

#include <map>
#include <string>
#include <vector>

#include "mlc/conditioning.hpp"
#include "mlc/dataset.hpp"
#include "mlc/graph.hpp"

namespace mlc {

struct GaussianParams {
  Vec mu;
  Vec logvar;
};

/// z = mu + exp(logvar/2) * eps.
Vec reparameterize(const GaussianParams& g, const Vec& eps);

/// Closed-form KL( N(mu, diag(exp(logvar))) || N(m, I) ):
/// 0.5 * sum_j (exp(logvar_j) + (mu_j - m_j)^2 - 1 - logvar_j).
double kl_class_prior(const GaussianParams& g, const Vec& m);

/// softmax((logits + g)/tau) with g = -log(-log u); u in (0,1)^D, tau > 0.
Vec gumbel_softmax(const Vec& logits, double tau, const Vec& u);

enum class ModelMode { kMlc, kLc, kCvae };

std::string to_string(ModelMode m);
ModelMode model_mode_from_string(const std::string& s);

struct ModelConfig {
  ModelMode mode = ModelMode::kMlc;
  CondConfig cond;
  Eigen::Index latent_dim = 16;
  std::vector<Eigen::Index> widths = {512, 256};
  double beta = 1.0;
  double logvar_clamp = 10.0;
  /// Index of the attribute whose labels are never observed (-1 = fully
  /// supervised). Training then infers it with a second encoder and a
  /// Gumbel-Softmax relaxation.
  Eigen::Index unlabeled_attr = -1;
  double gumbel_tau = 0.5;
  double entropy_weight = 0.1;
};

struct ElboBreakdown {
  double loss = 0.0;
  double bce = 0.0;
  double ce = 0.0;
  double kl = 0.0;
  double entropy_bonus = 0.0;
};

struct EpochMetrics {
  ElboBreakdown mean;
  Eigen::Index batches = 0;
  Eigen::Index samples = 0;
};

/// MLC-VAE with MLP encoder/decoder, per-attribute affine label decoders,
/// and a class-conditional prior N(M(y), I). Mode kLc fixes M to the linear
/// form; mode kCvae is the standard cVAE baseline (standard-normal prior,
/// joint one-hot concatenated to encoder and decoder inputs, no label
/// decoders).
class MlcVaeModel {
 public:
  MlcVaeModel(AttributeSpec spec, Eigen::Index image_h, Eigen::Index image_w,
              Eigen::Index image_c, ModelConfig cfg, std::uint64_t seed);

  const AttributeSpec& attribute_spec() const { return spec_; }
  const ModelConfig& config() const { return cfg_; }
  const Conditioning& conditioning() const { return cond_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  Eigen::Index pixel_dim() const { return h_ * w_ * c_; }
  Eigen::Index image_height() const { return h_; }
  Eigen::Index image_width() const { return w_; }
  Eigen::Index image_channels() const { return c_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index epoch() const { return epoch_; }
  void set_epoch(Eigen::Index e) { epoch_ = e; }

  /// Records the full training objective for a batch of width B onto the
  /// tape. Declared inputs: "x" (P x B), "y<i>" (D_i x B) for each observed
  /// attribute, "eps" (d x B), and "gumbel" (D_u x B) when an attribute is
  /// unlabeled. Marked outputs: "loss", "bce", "ce", "kl", "entropy".
  void build_elbo_tape(Tape& tape, Eigen::Index batch) const;

  /// Deterministic input map for the given samples; noise drawn from `noise`.
  std::map<std::string, Mat> make_batch_inputs(const LabeledDataset& ds,
                                               const std::vector<Eigen::Index>& idx,
                                               Rng& noise) const;

  ElboBreakdown elbo_loss(const LabeledDataset& ds, const std::vector<Eigen::Index>& idx,
                          Rng& noise) const;

  /// One pass of minibatch Adam over the dataset.
  EpochMetrics train_epoch(const LabeledDataset& ds, Eigen::Index batch_size,
                           const AdamConfig& opt);

  // Pure inference paths (no tape). These agree with the tape forward pass
  // to machine precision; a test pins that.
  GaussianParams encode(const Vec& x, const std::vector<Vec>& labels) const;
  Mat decode_image(const Mat& z) const;                      // P x B, values in (0,1)
  Mat decode_image_cvae(const Mat& z, const LabelCombo& combo) const;
  std::vector<Mat> decode_labels(const Mat& z) const;        // logits per attribute
  /// Class probabilities of the unlabeled attribute given an image.
  Vec infer_unlabeled(const Vec& x) const;

  /// Prior mean for a combination (zero vector in cVAE mode).
  Vec class_mean(const LabelCombo& combo) const;

  /// n decoded samples of z ~ N(M(combo), I); columns are images.
  Mat sample_combo(const LabelCombo& combo, Eigen::Index n, Rng& rng) const;
  /// The eps = 0 image for a combination.
  Vec class_mode_image(const LabelCombo& combo) const;

  /// Encode with source labels, shift the posterior mean by
  /// M(tgt) - M(src), decode. In cVAE mode the shift is replaced by
  /// decoding with the target joint one-hot.
  Vec transfer(const Vec& x, const LabelCombo& y_src, const LabelCombo& y_tgt) const;

  /// S images decoded along the segment M(a) -> M(b), t in {0 .. 1}.
  Mat interpolate(const LabelCombo& a, const LabelCombo& b, Eigen::Index steps) const;

  /// One-hot label columns for every attribute (used by encode/tape paths).
  std::vector<Vec> onehots(const LabelCombo& combo) const;

  bool attribute_observed(Eigen::Index attr) const { return attr != cfg_.unlabeled_attr; }

 private:
  void init_params(std::uint64_t seed);
  Mat encoder_hidden(const Mat& input) const;
  Mat infer_logits(const Mat& x) const;
  Mat joint_onehots(const std::vector<LabelCombo>& combos) const;

  AttributeSpec spec_;
  Eigen::Index h_ = 0, w_ = 0, c_ = 1;
  ModelConfig cfg_;
  Conditioning cond_;
  ParamStore store_;
  Rng shuffle_rng_;
  Rng noise_rng_;
  std::uint64_t seed_ = 0;
  Eigen::Index epoch_ = 0;
};

}  // namespace mlc
