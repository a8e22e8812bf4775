#include "mlc/conditioning.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mlc {

AttributeSpec::AttributeSpec(std::vector<Attribute> attrs) : attrs_(std::move(attrs)) {
  if (attrs_.empty()) throw ContractError("AttributeSpec: need at least one attribute");
  std::set<std::string> seen;
  for (const auto& a : attrs_) {
    if (a.cardinality() < 2)
      throw ContractError("AttributeSpec: attribute '" + a.name + "' needs cardinality >= 2");
    if (!seen.insert(a.name).second)
      throw ContractError("AttributeSpec: duplicate attribute name '" + a.name + "'");
  }
}

Eigen::Index AttributeSpec::index_of(const std::string& name) const {
  for (Eigen::Index i = 0; i < count(); ++i)
    if (attrs_[static_cast<std::size_t>(i)].name == name) return i;
  throw LabelError("AttributeSpec: unknown attribute '" + name + "'");
}

Eigen::Index AttributeSpec::joint_size() const {
  Eigen::Index n = 1;
  for (const auto& a : attrs_) n *= a.cardinality();
  return n;
}

LabelCombo LabelCombo::from_zero_based(const std::vector<Eigen::Index>& zero) {
  LabelCombo c;
  c.idx.reserve(zero.size());
  for (const auto j : zero) c.idx.push_back(j + 1);
  return c;
}

void LabelCombo::validate(const AttributeSpec& spec) const {
  if (size() != spec.count())
    throw LabelError("LabelCombo: " + std::to_string(size()) + " indices for " +
                     std::to_string(spec.count()) + " attributes");
  for (Eigen::Index i = 0; i < size(); ++i)
    if (one_based(i) < 1 || one_based(i) > spec.cardinality(i))
      throw LabelError("LabelCombo: index " + std::to_string(one_based(i)) + " out of 1.." +
                       std::to_string(spec.cardinality(i)) + " for attribute '" + spec.at(i).name + "'");
}

Eigen::Index LabelCombo::joint_index(const AttributeSpec& spec) const {
  validate(spec);
  Eigen::Index flat = 0, stride = 1;
  for (Eigen::Index i = 0; i < size(); ++i) {
    flat += zero_based(i) * stride;
    stride *= spec.cardinality(i);
  }
  return flat;
}

LabelCombo LabelCombo::parse(const std::string& text, const AttributeSpec& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (const char ch : text) {
    if (ch == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (static_cast<Eigen::Index>(parts.size()) != spec.count())
    throw LabelError("combo '" + text + "': expected " + std::to_string(spec.count()) +
                     " comma-separated class names");
  LabelCombo combo;
  for (Eigen::Index i = 0; i < spec.count(); ++i) {
    const auto& classes = spec.at(i).classes;
    const auto it = std::find(classes.begin(), classes.end(), parts[static_cast<std::size_t>(i)]);
    if (it == classes.end())
      throw LabelError("combo '" + text + "': '" + parts[static_cast<std::size_t>(i)] +
                       "' is not a class of attribute '" + spec.at(i).name + "'");
    combo.idx.push_back(1 + static_cast<Eigen::Index>(it - classes.begin()));
  }
  return combo;
}

std::string LabelCombo::to_string(const AttributeSpec& spec) const {
  validate(spec);
  std::string out;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (i) out += ",";
    out += spec.at(i).classes[static_cast<std::size_t>(zero_based(i))];
  }
  return out;
}

Vec one_hot(Eigen::Index j, Eigen::Index d) {
  if (j < 1 || j > d)
    throw LabelError("one_hot: index " + std::to_string(j) + " out of 1.." + std::to_string(d));
  Vec v = Vec::Zero(d);
  v(j - 1) = 1.0;
  return v;
}

std::string to_string(CondVariant v) {
  switch (v) {
    case CondVariant::kLinear: return "linear";
    case CondVariant::kFullTable: return "full";
    case CondVariant::kCp: return "cp";
    case CondVariant::kTucker: return "tucker";
    case CondVariant::kGeneral: return "general";
  }
  return "?";
}

CondVariant cond_variant_from_string(const std::string& s) {
  if (s == "linear") return CondVariant::kLinear;
  if (s == "full") return CondVariant::kFullTable;
  if (s == "cp") return CondVariant::kCp;
  if (s == "tucker") return CondVariant::kTucker;
  if (s == "general") return CondVariant::kGeneral;
  throw ParseError("unknown conditioning variant '" + s + "'");
}

Conditioning::Conditioning(AttributeSpec spec, CondConfig cfg, Eigen::Index latent_dim,
                           std::string prefix)
    : spec_(std::move(spec)), cfg_(cfg), d_(latent_dim), prefix_(std::move(prefix)) {
  if (d_ < 1) throw ContractError("Conditioning: latent dim must be >= 1");
  const bool pair_only = cfg_.variant == CondVariant::kFullTable ||
                         cfg_.variant == CondVariant::kCp || cfg_.variant == CondVariant::kTucker;
  if (pair_only && spec_.count() != 2)
    throw ContractError("Conditioning: variant '" + mlc::to_string(cfg_.variant) +
                        "' is defined for exactly 2 attributes, got " + std::to_string(spec_.count()));
}

Eigen::Index Conditioning::tucker_rank_latent() const { return std::min(cfg_.tucker_rank, d_); }

Eigen::Index Conditioning::tucker_rank_attr(Eigen::Index attr) const {
  return std::min(cfg_.tucker_rank, 4 * spec_.cardinality(attr));
}

std::string Conditioning::subset_tag(const std::vector<Eigen::Index>& subset) const {
  if (cfg_.variant == CondVariant::kCp) return "cp";
  if (cfg_.variant == CondVariant::kTucker) return "tk";
  std::ostringstream os;
  os << "w";
  for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? "_" : "") << (subset[i] + 1);
  return os.str();
}

std::vector<std::vector<Eigen::Index>> Conditioning::interaction_subsets() const {
  std::vector<std::vector<Eigen::Index>> out;
  const Eigen::Index n = spec_.count();
  switch (cfg_.variant) {
    case CondVariant::kLinear:
      return out;
    case CondVariant::kFullTable:
    case CondVariant::kCp:
    case CondVariant::kTucker:
      out.push_back({0, 1});
      return out;
    case CondVariant::kGeneral: {
      const Eigen::Index cap =
          cfg_.interaction_order_cap == 0 ? n : std::min(cfg_.interaction_order_cap, n);
      // All ascending index subsets of size 2..cap, ordered by size then lexicographically.
      for (Eigen::Index size = 2; size <= cap; ++size) {
        std::vector<Eigen::Index> pick(static_cast<std::size_t>(size));
        for (Eigen::Index i = 0; i < size; ++i) pick[static_cast<std::size_t>(i)] = i;
        while (true) {
          out.push_back(pick);
          Eigen::Index t = size - 1;
          while (t >= 0 && pick[static_cast<std::size_t>(t)] == n - size + t) --t;
          if (t < 0) break;
          ++pick[static_cast<std::size_t>(t)];
          for (Eigen::Index u = t + 1; u < size; ++u)
            pick[static_cast<std::size_t>(u)] = pick[static_cast<std::size_t>(u - 1)] + 1;
        }
      }
      return out;
    }
  }
  return out;
}

void Conditioning::init_params(ParamStore& store, Rng& rng) const {
  constexpr double kCondStd = 0.02;
  for (Eigen::Index i = 0; i < spec_.count(); ++i)
    store.add(pname("W" + std::to_string(i + 1)),
              normal_init(d_, spec_.cardinality(i), kCondStd, rng));

  if (cfg_.variant == CondVariant::kLinear) return;

  if (cfg_.variant == CondVariant::kFullTable) {
    store.add(pname("table"),
              normal_init(d_, spec_.cardinality(0) * spec_.cardinality(1), kCondStd, rng));
    return;
  }

  const bool tucker_form =
      cfg_.variant == CondVariant::kTucker ||
      (cfg_.variant == CondVariant::kGeneral && cfg_.general_uses_tucker);
  for (const auto& subset : interaction_subsets()) {
    const std::string tag = subset_tag(subset);
    if (tucker_form) {
      const Eigen::Index r0 = tucker_rank_latent();
      Eigen::Index core_cols = 1;
      store.add(pname(tag + ".U0"), normal_init(d_, r0, kCondStd, rng));
      for (const auto attr : subset) {
        const Eigen::Index rk = tucker_rank_attr(attr);
        store.add(pname(tag + ".U" + std::to_string(attr + 1)),
                  normal_init(spec_.cardinality(attr), rk, kCondStd, rng));
        core_cols *= rk;
      }
      store.add(pname(tag + ".G"), normal_init(r0, core_cols, kCondStd, rng));
    } else {
      store.add(pname(tag + ".U0"), normal_init(d_, cfg_.cp_rank, kCondStd, rng));
      for (const auto attr : subset)
        store.add(pname(tag + ".U" + std::to_string(attr + 1)),
                  normal_init(spec_.cardinality(attr), cfg_.cp_rank, kCondStd, rng));
    }
  }
}

Tape::Var Conditioning::mean_node(Tape& tape, const std::vector<Tape::Var>& labels) const {
  if (static_cast<Eigen::Index>(labels.size()) != spec_.count())
    throw ContractError("Conditioning: " + std::to_string(labels.size()) + " label vars for " +
                        std::to_string(spec_.count()) + " attributes");
  Tape::Var m = tape.matmul(tape.param(pname("W1")), labels[0]);
  for (Eigen::Index i = 1; i < spec_.count(); ++i)
    m = tape.add(m, tape.matmul(tape.param(pname("W" + std::to_string(i + 1))),
                                labels[static_cast<std::size_t>(i)]));

  if (cfg_.variant == CondVariant::kLinear) return m;

  if (cfg_.variant == CondVariant::kFullTable) {
    // (y2 kr y1) selects column (j2-1)*D1 + j1 of the unfolded table.
    Tape::Var joint = tape.khatri_rao_cols(labels[1], labels[0]);
    return tape.add(m, tape.matmul(tape.param(pname("table")), joint));
  }

  const bool tucker_form =
      cfg_.variant == CondVariant::kTucker ||
      (cfg_.variant == CondVariant::kGeneral && cfg_.general_uses_tucker);
  for (const auto& subset : interaction_subsets()) {
    const std::string tag = subset_tag(subset);
    std::vector<Tape::Var> proj;
    for (const auto attr : subset)
      proj.push_back(tape.matmul(tape.param(pname(tag + ".U" + std::to_string(attr + 1))),
                                 labels[static_cast<std::size_t>(attr)], /*trans_a=*/true));
    Tape::Var term;
    if (tucker_form) {
      // Khatri-Rao chain with the first subset attribute's index fastest,
      // matching the core's mode-1 unfolding column order.
      Tape::Var kr = proj[0];
      for (std::size_t t = 1; t < proj.size(); ++t) kr = tape.khatri_rao_cols(proj[t], kr);
      term = tape.matmul(tape.param(pname(tag + ".G")), kr);
    } else {
      term = proj[0];
      for (std::size_t t = 1; t < proj.size(); ++t) term = tape.mul(term, proj[t]);
    }
    m = tape.add(m, tape.matmul(tape.param(pname(tag + ".U0")), term));
  }
  return m;
}

Vec Conditioning::mean(const ParamStore& store, const std::vector<Vec>& labels) const {
  if (static_cast<Eigen::Index>(labels.size()) != spec_.count())
    throw ContractError("Conditioning: " + std::to_string(labels.size()) + " label vectors for " +
                        std::to_string(spec_.count()) + " attributes");
  for (Eigen::Index i = 0; i < spec_.count(); ++i)
    if (labels[static_cast<std::size_t>(i)].size() != spec_.cardinality(i))
      throw DimensionError("Conditioning: label " + std::to_string(i + 1) + " has length " +
                           std::to_string(labels[static_cast<std::size_t>(i)].size()) +
                           ", expected " + std::to_string(spec_.cardinality(i)));

  Vec m = Vec::Zero(d_);
  for (Eigen::Index i = 0; i < spec_.count(); ++i)
    m += store.value(pname("W" + std::to_string(i + 1))) * labels[static_cast<std::size_t>(i)];

  if (cfg_.variant == CondVariant::kLinear) return m;

  if (cfg_.variant == CondVariant::kFullTable) {
    const Vec joint = kronecker(labels[1], labels[0]);
    return m + store.value(pname("table")) * joint;
  }

  const bool tucker_form =
      cfg_.variant == CondVariant::kTucker ||
      (cfg_.variant == CondVariant::kGeneral && cfg_.general_uses_tucker);
  for (const auto& subset : interaction_subsets()) {
    const std::string tag = subset_tag(subset);
    std::vector<Vec> proj;
    for (const auto attr : subset)
      proj.push_back(store.value(pname(tag + ".U" + std::to_string(attr + 1))).transpose() *
                     labels[static_cast<std::size_t>(attr)]);
    Vec term;
    if (tucker_form) {
      Vec kr = proj[0];
      for (std::size_t t = 1; t < proj.size(); ++t) kr = Vec(kronecker(proj[t], kr));
      term = store.value(pname(tag + ".G")) * kr;
    } else {
      term = proj[0];
      for (std::size_t t = 1; t < proj.size(); ++t) term = term.cwiseProduct(proj[t]);
    }
    m += store.value(pname(tag + ".U0")) * term;
  }
  return m;
}

Vec Conditioning::mean(const ParamStore& store, const LabelCombo& combo) const {
  combo.validate(spec_);
  std::vector<Vec> labels;
  for (Eigen::Index i = 0; i < spec_.count(); ++i)
    labels.push_back(one_hot(combo.one_based(i), spec_.cardinality(i)));
  return mean(store, labels);
}

DenseTensor Conditioning::interaction_tensor(const ParamStore& store,
                                             const std::vector<Eigen::Index>& subset) const {
  const auto subsets = interaction_subsets();
  if (std::find(subsets.begin(), subsets.end(), subset) == subsets.end())
    throw ContractError("Conditioning: no interaction term for the requested subset");
  const std::string tag = subset_tag(subset);

  if (cfg_.variant == CondVariant::kFullTable) {
    std::vector<Eigen::Index> shape{d_, spec_.cardinality(0), spec_.cardinality(1)};
    return mode_k_fold(store.value(pname("table")), 1, shape);
  }

  const bool tucker_form =
      cfg_.variant == CondVariant::kTucker ||
      (cfg_.variant == CondVariant::kGeneral && cfg_.general_uses_tucker);
  if (tucker_form) {
    TuckerFactors f;
    std::vector<Eigen::Index> core_shape{tucker_rank_latent()};
    f.factors.push_back(store.value(pname(tag + ".U0")));
    for (const auto attr : subset) {
      core_shape.push_back(tucker_rank_attr(attr));
      f.factors.push_back(store.value(pname(tag + ".U" + std::to_string(attr + 1))));
    }
    f.core = mode_k_fold(store.value(pname(tag + ".G")), 1, core_shape);
    return tucker_reconstruct(f);
  }
  CPFactors f;
  f.rank = cfg_.cp_rank;
  f.factors.push_back(store.value(pname(tag + ".U0")));
  for (const auto attr : subset)
    f.factors.push_back(store.value(pname(tag + ".U" + std::to_string(attr + 1))));
  return cp_reconstruct(f);
}

namespace {

void require_variant(const Conditioning& c, CondVariant v, const char* op) {
  if (c.config().variant != v)
    throw ContractError(std::string(op) + ": conditioning variant is '" +
                        to_string(c.config().variant) + "', expected '" + to_string(v) + "'");
}

}  // namespace

Vec mean_linear(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2) {
  require_variant(c, CondVariant::kLinear, "mean_linear");
  return c.mean(s, std::vector<Vec>{y1, y2});
}

Vec mean_full(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2) {
  require_variant(c, CondVariant::kFullTable, "mean_full");
  return c.mean(s, std::vector<Vec>{y1, y2});
}

Vec mean_cp(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2) {
  require_variant(c, CondVariant::kCp, "mean_cp");
  return c.mean(s, std::vector<Vec>{y1, y2});
}

Vec mean_tucker(const Conditioning& c, const ParamStore& s, const Vec& y1, const Vec& y2) {
  require_variant(c, CondVariant::kTucker, "mean_tucker");
  return c.mean(s, std::vector<Vec>{y1, y2});
}

Vec mean_general(const Conditioning& c, const ParamStore& s, const std::vector<Vec>& ys) {
  require_variant(c, CondVariant::kGeneral, "mean_general");
  return c.mean(s, ys);
}

}  // namespace mlc
