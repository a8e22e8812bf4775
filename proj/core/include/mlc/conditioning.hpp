#pragma once

#include <string>
#include <vector>

#include "mlc/graph.hpp"
#include "mlc/tensor.hpp"

namespace mlc {

struct Attribute {
  std::string name;
  std::vector<std::string> classes;

  Eigen::Index cardinality() const { return static_cast<Eigen::Index>(classes.size()); }
};

/// Ordered attribute list; attribute names unique, every cardinality >= 2.
class AttributeSpec {
 public:
  AttributeSpec() = default;
  explicit AttributeSpec(std::vector<Attribute> attrs);

  Eigen::Index count() const { return static_cast<Eigen::Index>(attrs_.size()); }
  const Attribute& at(Eigen::Index i) const { return attrs_[static_cast<std::size_t>(i)]; }
  const std::vector<Attribute>& attributes() const { return attrs_; }
  Eigen::Index cardinality(Eigen::Index i) const { return at(i).cardinality(); }

  Eigen::Index index_of(const std::string& name) const;

  /// Total number of attribute combinations, prod D_i.
  Eigen::Index joint_size() const;

 private:
  std::vector<Attribute> attrs_;
};

/// One class index per attribute, 1-based (j_i in 1..D_i).
struct LabelCombo {
  std::vector<Eigen::Index> idx;

  static LabelCombo from_zero_based(const std::vector<Eigen::Index>& zero);
  Eigen::Index one_based(Eigen::Index i) const { return idx[static_cast<std::size_t>(i)]; }
  Eigen::Index zero_based(Eigen::Index i) const { return idx[static_cast<std::size_t>(i)] - 1; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(idx.size()); }

  void validate(const AttributeSpec& spec) const;

  /// Flat 0-based joint-class index, first attribute fastest.
  Eigen::Index joint_index(const AttributeSpec& spec) const;

  /// "2,orange" against class names.
  static LabelCombo parse(const std::string& text, const AttributeSpec& spec);
  std::string to_string(const AttributeSpec& spec) const;

  bool operator==(const LabelCombo& o) const { return idx == o.idx; }
};

/// Basis vector e_j of length d, j 1-based.
Vec one_hot(Eigen::Index j, Eigen::Index d);

enum class CondVariant { kLinear, kFullTable, kCp, kTucker, kGeneral };

std::string to_string(CondVariant v);
CondVariant cond_variant_from_string(const std::string& s);

struct CondConfig {
  CondVariant variant = CondVariant::kTucker;
  Eigen::Index cp_rank = 16;
  /// Base Tucker rank; per-mode ranks are clipped to d (latent mode) and
  /// 4 * D_i (attribute modes).
  Eigen::Index tucker_rank = 16;
  /// General variant: store interaction tensors in CP or Tucker form.
  bool general_uses_tucker = true;
  /// General variant: highest interaction order to materialize. 0 means all
  /// orders up to N; 2 keeps only the pairwise terms.
  Eigen::Index interaction_order_cap = 0;
};

/// The class-mean function M(y_1..y_N): linear per-attribute maps plus
/// multiplicative interaction terms held in factorized form. Parameters are
/// registered in a ParamStore under a fixed prefix so the same definition
/// serves the training graph, pure evaluation, and checkpoints.
class Conditioning {
 public:
  Conditioning() = default;
  Conditioning(AttributeSpec spec, CondConfig cfg, Eigen::Index latent_dim,
               std::string prefix = "cond");

  /// Creates and initializes every parameter this variant needs.
  void init_params(ParamStore& store, Rng& rng) const;

  /// M evaluated on a batch of (possibly soft) label columns, one Var per
  /// attribute of shape D_i x B. Output d x B.
  Tape::Var mean_node(Tape& tape, const std::vector<Tape::Var>& labels) const;

  /// M for a single combination; pure in the store values.
  Vec mean(const ParamStore& store, const LabelCombo& combo) const;

  /// M on explicit label vectors (soft vectors allowed; M is multilinear).
  Vec mean(const ParamStore& store, const std::vector<Vec>& labels) const;

  /// Reconstructs the dense interaction tensor W^[S] for an attribute subset
  /// (0-based attribute indices, ascending), shape [d, D_{s1}, D_{s2}, ...].
  /// Oracle hook: mean() must equal linear terms plus this tensor's fibers.
  DenseTensor interaction_tensor(const ParamStore& store, const std::vector<Eigen::Index>& subset) const;

  /// Attribute subsets carrying interaction terms under this variant/cap.
  std::vector<std::vector<Eigen::Index>> interaction_subsets() const;

  const AttributeSpec& attribute_spec() const { return spec_; }
  const CondConfig& config() const { return cfg_; }
  Eigen::Index latent_dim() const { return d_; }
  const std::string& prefix() const { return prefix_; }

  Eigen::Index tucker_rank_latent() const;
  Eigen::Index tucker_rank_attr(Eigen::Index attr) const;

 private:
  std::string pname(const std::string& leaf) const { return prefix_ + "." + leaf; }
  std::string subset_tag(const std::vector<Eigen::Index>& subset) const;

  AttributeSpec spec_;
  CondConfig cfg_;
  Eigen::Index d_ = 0;
  std::string prefix_ = "cond";
};

/// Spec'd two-attribute mean functions; throw ContractError unless the
/// conditioning was built with the matching variant.
Vec mean_linear(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2);
Vec mean_full(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2);
Vec mean_cp(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2);
Vec mean_tucker(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2);
Vec mean_general(const Conditioning& c, const ParamStore& s, const std::vector<Vec>& ys);

}  // namespace mlc
