#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlc/conditioning.hpp"
#include "mlc/rng.hpp"
#include "mlc/tensor.hpp"

namespace mlc {

/// Raw grayscale image stack as parsed from IDX files.
struct RawImageSet {
  Eigen::Index count = 0;
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<std::uint8_t> pixels;  // count*height*width, row-major per image
  std::vector<std::uint8_t> labels;  // optional, length count when present
};

/// Decoded IDX payload: unsigned-byte data of the declared dimensions.
struct IdxArray {
  std::vector<Eigen::Index> dims;
  std::vector<std::uint8_t> data;
};

/// Parses the IDX container (two zero bytes, dtype byte 0x08, dimension
/// count, big-endian 32-bit extents, payload). Throws ParseError with the
/// offending byte offset on malformed input.
IdxArray parse_idx(const std::uint8_t* bytes, std::size_t size);
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);

/// Magic 0x00000803 image stacks.
RawImageSet to_image_set(const IdxArray& a);
/// Magic 0x00000801 label arrays.
std::vector<std::uint8_t> to_label_array(const IdxArray& a);

std::vector<std::uint8_t> write_idx_images(const RawImageSet& set);
std::vector<std::uint8_t> write_idx_labels(const std::vector<std::uint8_t>& labels);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

struct PaletteColor {
  std::string name;
  std::array<std::uint8_t, 3> rgb;
};

/// Benchmark palettes; RGB values chosen for maximally separable histograms.
std::vector<PaletteColor> palette_colored3();   // orange, purple, green
std::vector<PaletteColor> palette_mixedup2();   // red, blue
std::vector<PaletteColor> palette_twocolor();   // green, orange

/// Colorizes one grayscale image: out channel c = (pixel/255)*(rgb[c]/255),
/// channel-fastest layout. Black background stays black.
std::vector<double> colorize(const std::uint8_t* gray, Eigen::Index pixel_count,
                             Eigen::Index color_index, const std::vector<PaletteColor>& palette);

/// 3x3 grayscale dilation (max filter), borders clamped.
std::vector<std::uint8_t> thicken(const std::uint8_t* gray, Eigen::Index h, Eigen::Index w);

/// Labeled image collection. Pixels are stored as grayscale bytes plus a
/// per-sample palette index; f64 images in [0,1] are materialized on access,
/// so a 60k-image corpus stays tens of MB. Layout of a materialized image is
/// (row*W + col)*C + channel.
class LabeledDataset {
 public:
  AttributeSpec spec;
  Eigen::Index height = 0, width = 0, channels = 1;
  std::vector<std::uint8_t> gray;                  // count*height*width
  std::vector<std::vector<Eigen::Index>> labels;   // [attr][sample], 0-based
  std::vector<Eigen::Index> pixel_color;           // palette index per sample (channels==3)
  std::vector<PaletteColor> palette;

  Eigen::Index count() const;
  Eigen::Index pixel_dim() const { return height * width * channels; }

  Vec image(Eigen::Index i) const;
  Mat images(const std::vector<Eigen::Index>& idx) const;
  /// One-hot label matrix D_attr x |idx|.
  Mat label_onehots(Eigen::Index attr, const std::vector<Eigen::Index>& idx) const;
  LabelCombo combo(Eigen::Index i) const;

  LabeledDataset select(const std::vector<Eigen::Index>& idx) const;

  void validate() const;
};

struct HoldoutSplit {
  LabeledDataset train;
  std::vector<LabelCombo> heldout_combos;
  LabeledDataset eval_seen;
  LabeledDataset eval_unseen;
};

/// Exact partition of ds into train (combo not held out) and eval_unseen
/// (combo held out); eval_seen is filled by callers that have a test split.
HoldoutSplit split_holdout(const LabeledDataset& ds, const std::vector<LabelCombo>& combos);

/// Seeded random minibatch index sequence; final partial batch kept.
std::vector<std::vector<Eigen::Index>> make_batches(Eigen::Index count, Eigen::Index batch_size,
                                                    Rng& rng);

/// Flips the color label of odd digits in place (pixels untouched); even
/// digits keep their labels. Applying twice restores the original labels.
void make_mixed_up(LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Benchmark construction

enum class Protocol { kColored3, kTwoColor, kMixedUp, kThreeAttr, kTwoColorUnlabeled };

Protocol protocol_from_string(const std::string& s);
std::string to_string(Protocol p);

struct BenchmarkOptions {
  Protocol protocol = Protocol::kColored3;
  Eigen::Index n_train = 10000;        // 0 = all source images
  std::uint64_t seed = 17;
  std::vector<std::string> holdout;    // combo strings, e.g. "2,orange"
  std::vector<PaletteColor> palette_override;
};

struct Benchmark {
  LabeledDataset train_full;  // pre-holdout training set
  LabeledDataset test;        // held-out real images (classifier sanity)
  std::vector<LabelCombo> holdout;
  HoldoutSplit split;         // holdout applied to train_full; eval_seen from test
};

/// Loads the standard IDX file quartet from a directory
/// (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-...).
struct RawSplits {
  RawImageSet train;
  RawImageSet test;
};
RawSplits load_idx_dir(const std::string& dir);

/// Builds a benchmark from raw MNIST-format splits; deterministic in
/// (bytes, options). Color assignment is a seeded uniform draw per image,
/// independent of the digit, made before any relabeling.
Benchmark build_benchmark(const RawSplits& raw, const BenchmarkOptions& opts);

/// Convenience: load_idx_dir + build_benchmark.
Benchmark build_benchmark(const std::string& data_dir, const BenchmarkOptions& opts);

/// Materializes a benchmark to a directory as IDX files (grayscale images,
/// one label file per attribute, pixel-color file) plus a plain-text
/// manifest; loadable with load_prepared.
void write_prepared(const std::string& dir, const Benchmark& b);
Benchmark load_prepared(const std::string& dir);

}  // namespace mlc
