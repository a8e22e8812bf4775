#include "mlc/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mlc {

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(const std::uint8_t* bytes, std::size_t size) {
  if (size < 4) throw ParseError("idx: header truncated at byte offset " + std::to_string(size));
  if (bytes[0] != 0 || bytes[1] != 0)
    throw ParseError("idx: bad magic at byte offset " + std::to_string(bytes[0] == 0 ? 1 : 0));
  if (bytes[2] != 0x08)
    throw ParseError("idx: unsupported dtype 0x" + std::to_string(bytes[2]) +
                     " at byte offset 2 (only unsigned byte 0x08 supported)");
  const unsigned ndims = bytes[3];
  if (ndims != 1 && ndims != 3)
    throw ParseError("idx: bad magic at byte offset 3: dimension count " + std::to_string(ndims) +
                     " (expected 1 for labels or 3 for images)");
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndims);
  if (size < header) throw ParseError("idx: header truncated at byte offset " + std::to_string(size));

  IdxArray a;
  std::size_t total = 1;
  for (unsigned d = 0; d < ndims; ++d) {
    const std::uint32_t extent = read_be32(bytes + 4 + 4 * d);
    if (extent == 0)
      throw ParseError("idx: zero extent at byte offset " + std::to_string(4 + 4 * d));
    a.dims.push_back(static_cast<Eigen::Index>(extent));
    total *= extent;
  }
  if (size != header + total)
    throw ParseError("idx: payload of " + std::to_string(size - header) + " bytes at offset " +
                     std::to_string(header) + ", expected " + std::to_string(total));
  a.data.assign(bytes + header, bytes + size);
  return a;
}

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
  return parse_idx(bytes.data(), bytes.size());
}

RawImageSet to_image_set(const IdxArray& a) {
  if (a.dims.size() != 3)
    throw ParseError("idx: expected a 3-D image stack, got " + std::to_string(a.dims.size()) +
                     " dims");
  RawImageSet s;
  s.count = a.dims[0];
  s.height = a.dims[1];
  s.width = a.dims[2];
  s.pixels = a.data;
  return s;
}

std::vector<std::uint8_t> to_label_array(const IdxArray& a) {
  if (a.dims.size() != 1)
    throw ParseError("idx: expected a 1-D label array, got " + std::to_string(a.dims.size()) +
                     " dims");
  return a.data;
}

std::vector<std::uint8_t> write_idx_images(const RawImageSet& set) {
  std::vector<std::uint8_t> out{0, 0, 0x08, 3};
  append_be32(out, static_cast<std::uint32_t>(set.count));
  append_be32(out, static_cast<std::uint32_t>(set.height));
  append_be32(out, static_cast<std::uint32_t>(set.width));
  out.insert(out.end(), set.pixels.begin(), set.pixels.end());
  return out;
}

std::vector<std::uint8_t> write_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out{0, 0, 0x08, 1};
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open '" + path + "'");
  f.seekg(0, std::ios::end);
  const auto n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw FileError("failed reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FileError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FileError("failed writing '" + path + "'");
}

std::vector<PaletteColor> palette_colored3() {
  return {{"orange", {255, 165, 0}}, {"purple", {128, 0, 128}}, {"green", {0, 200, 0}}};
}

std::vector<PaletteColor> palette_mixedup2() {
  return {{"red", {220, 30, 30}}, {"blue", {40, 60, 220}}};
}

std::vector<PaletteColor> palette_twocolor() {
  return {{"green", {0, 200, 0}}, {"orange", {255, 165, 0}}};
}

std::vector<double> colorize(const std::uint8_t* gray, Eigen::Index pixel_count,
                             Eigen::Index color_index, const std::vector<PaletteColor>& palette) {
  if (color_index < 0 || color_index >= static_cast<Eigen::Index>(palette.size()))
    throw LabelError("colorize: color index " + std::to_string(color_index) + " outside palette of " +
                     std::to_string(palette.size()));
  const auto& rgb = palette[static_cast<std::size_t>(color_index)].rgb;
  std::vector<double> out(static_cast<std::size_t>(pixel_count) * 3);
  for (Eigen::Index p = 0; p < pixel_count; ++p) {
    const double g = static_cast<double>(gray[p]) / 255.0;
    for (int c = 0; c < 3; ++c)
      out[static_cast<std::size_t>(p * 3 + c)] = g * (static_cast<double>(rgb[static_cast<std::size_t>(c)]) / 255.0);
  }
  return out;
}

std::vector<std::uint8_t> thicken(const std::uint8_t* gray, Eigen::Index h, Eigen::Index w) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(h * w));
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      std::uint8_t m = 0;
      for (Eigen::Index dr = -1; dr <= 1; ++dr)
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          const Eigen::Index rr = std::clamp<Eigen::Index>(r + dr, 0, h - 1);
          const Eigen::Index cc = std::clamp<Eigen::Index>(c + dc, 0, w - 1);
          m = std::max(m, gray[rr * w + cc]);
        }
      out[static_cast<std::size_t>(r * w + c)] = m;
    }
  return out;
}

Eigen::Index LabeledDataset::count() const {
  return labels.empty() ? 0 : static_cast<Eigen::Index>(labels.front().size());
}

Vec LabeledDataset::image(Eigen::Index i) const {
  const Eigen::Index hw = height * width;
  const std::uint8_t* g = gray.data() + i * hw;
  if (channels == 3) {
    const auto px = colorize(g, hw, pixel_color[static_cast<std::size_t>(i)], palette);
    return Eigen::Map<const Vec>(px.data(), static_cast<Eigen::Index>(px.size()));
  }
  Vec v(hw);
  for (Eigen::Index p = 0; p < hw; ++p) v(p) = static_cast<double>(g[p]) / 255.0;
  return v;
}

Mat LabeledDataset::images(const std::vector<Eigen::Index>& idx) const {
  Mat out(pixel_dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) out.col(static_cast<Eigen::Index>(b)) = image(idx[b]);
  return out;
}

Mat LabeledDataset::label_onehots(Eigen::Index attr, const std::vector<Eigen::Index>& idx) const {
  const Eigen::Index d = spec.cardinality(attr);
  Mat out = Mat::Zero(d, static_cast<Eigen::Index>(idx.size()));
  const auto& lab = labels[static_cast<std::size_t>(attr)];
  for (std::size_t b = 0; b < idx.size(); ++b)
    out(lab[static_cast<std::size_t>(idx[b])], static_cast<Eigen::Index>(b)) = 1.0;
  return out;
}

LabelCombo LabeledDataset::combo(Eigen::Index i) const {
  std::vector<Eigen::Index> zero;
  zero.reserve(labels.size());
  for (const auto& lab : labels) zero.push_back(lab[static_cast<std::size_t>(i)]);
  return LabelCombo::from_zero_based(zero);
}

LabeledDataset LabeledDataset::select(const std::vector<Eigen::Index>& idx) const {
  LabeledDataset out;
  out.spec = spec;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.palette = palette;
  const Eigen::Index hw = height * width;
  out.gray.reserve(idx.size() * static_cast<std::size_t>(hw));
  for (const auto i : idx)
    out.gray.insert(out.gray.end(), gray.begin() + i * hw, gray.begin() + (i + 1) * hw);
  out.labels.resize(labels.size());
  for (std::size_t a = 0; a < labels.size(); ++a) {
    out.labels[a].reserve(idx.size());
    for (const auto i : idx) out.labels[a].push_back(labels[a][static_cast<std::size_t>(i)]);
  }
  if (!pixel_color.empty()) {
    out.pixel_color.reserve(idx.size());
    for (const auto i : idx) out.pixel_color.push_back(pixel_color[static_cast<std::size_t>(i)]);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != spec.count())
    throw DataError("dataset: " + std::to_string(labels.size()) + " label arrays for " +
                    std::to_string(spec.count()) + " attributes");
  const Eigen::Index n = count();
  if (static_cast<Eigen::Index>(gray.size()) != n * height * width)
    throw DataError("dataset: pixel byte count mismatch");
  for (Eigen::Index a = 0; a < spec.count(); ++a) {
    if (static_cast<Eigen::Index>(labels[static_cast<std::size_t>(a)].size()) != n)
      throw DataError("dataset: label array length mismatch for '" + spec.at(a).name + "'");
    for (const auto v : labels[static_cast<std::size_t>(a)])
      if (v < 0 || v >= spec.cardinality(a))
        throw DataError("dataset: label " + std::to_string(v) + " outside cardinality of '" +
                        spec.at(a).name + "'");
  }
  if (channels == 3 && static_cast<Eigen::Index>(pixel_color.size()) != n)
    throw DataError("dataset: pixel_color length mismatch");
}

HoldoutSplit split_holdout(const LabeledDataset& ds, const std::vector<LabelCombo>& combos) {
  for (const auto& c : combos) c.validate(ds.spec);
  std::vector<Eigen::Index> keep, removed;
  for (Eigen::Index i = 0; i < ds.count(); ++i) {
    const LabelCombo c = ds.combo(i);
    const bool held = std::find(combos.begin(), combos.end(), c) != combos.end();
    (held ? removed : keep).push_back(i);
  }
  HoldoutSplit split;
  split.heldout_combos = combos;
  split.train = ds.select(keep);
  split.eval_unseen = ds.select(removed);
  split.eval_seen = ds.select({});
  return split;
}

std::vector<std::vector<Eigen::Index>> make_batches(Eigen::Index count, Eigen::Index batch_size,
                                                    Rng& rng) {
  if (batch_size < 1) throw ContractError("make_batches: batch size must be >= 1");
  if (count < 1) throw DataError("make_batches: empty dataset");
  const auto perm = rng.permutation(static_cast<std::size_t>(count));
  std::vector<std::vector<Eigen::Index>> batches;
  for (Eigen::Index start = 0; start < count; start += batch_size) {
    const Eigen::Index end = std::min(count, start + batch_size);
    std::vector<Eigen::Index> b;
    b.reserve(static_cast<std::size_t>(end - start));
    for (Eigen::Index i = start; i < end; ++i)
      b.push_back(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
    batches.push_back(std::move(b));
  }
  return batches;
}

void make_mixed_up(LabeledDataset& ds) {
  const Eigen::Index digit = ds.spec.index_of("digit");
  const Eigen::Index color = ds.spec.index_of("color");
  if (ds.spec.cardinality(color) != 2)
    throw ContractError("make_mixed_up: color attribute has " +
                        std::to_string(ds.spec.cardinality(color)) + " classes, expected 2");
  auto& col = ds.labels[static_cast<std::size_t>(color)];
  const auto& dig = ds.labels[static_cast<std::size_t>(digit)];
  for (std::size_t i = 0; i < col.size(); ++i)
    if (dig[i] % 2 == 1) col[i] = 1 - col[i];
}

// ---------------------------------------------------------------------------

Protocol protocol_from_string(const std::string& s) {
  if (s == "colored3") return Protocol::kColored3;
  if (s == "twocolor") return Protocol::kTwoColor;
  if (s == "mixedup") return Protocol::kMixedUp;
  if (s == "threeattr") return Protocol::kThreeAttr;
  if (s == "twocolor_unlabeled") return Protocol::kTwoColorUnlabeled;
  throw ParseError("unknown protocol '" + s + "'");
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::kColored3: return "colored3";
    case Protocol::kTwoColor: return "twocolor";
    case Protocol::kMixedUp: return "mixedup";
    case Protocol::kThreeAttr: return "threeattr";
    case Protocol::kTwoColorUnlabeled: return "twocolor_unlabeled";
  }
  return "?";
}

RawSplits load_idx_dir(const std::string& dir) {
  const auto load = [&](const std::string& images, const std::string& labels) {
    const std::string ip = dir + "/" + images;
    const std::string lp = dir + "/" + labels;
    if (!std::filesystem::exists(ip)) throw FileError("missing dataset file '" + ip + "'");
    if (!std::filesystem::exists(lp)) throw FileError("missing dataset file '" + lp + "'");
    RawImageSet set = to_image_set(parse_idx(read_file(ip)));
    set.labels = to_label_array(parse_idx(read_file(lp)));
    if (static_cast<Eigen::Index>(set.labels.size()) != set.count)
      throw DataError("dataset '" + dir + "': " + std::to_string(set.labels.size()) +
                      " labels for " + std::to_string(set.count) + " images");
    return set;
  };
  RawSplits raw;
  raw.train = load("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
  raw.test = load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
  return raw;
}

namespace {

std::vector<std::string> digit_class_names() {
  std::vector<std::string> names;
  for (int d = 0; d <= 9; ++d) names.push_back(std::to_string(d));
  return names;
}

std::vector<PaletteColor> protocol_palette(Protocol p) {
  switch (p) {
    case Protocol::kColored3:
    case Protocol::kThreeAttr: return palette_colored3();
    case Protocol::kMixedUp: return palette_mixedup2();
    case Protocol::kTwoColor:
    case Protocol::kTwoColorUnlabeled: return palette_twocolor();
  }
  return {};
}

LabeledDataset assemble(const RawImageSet& src, const std::vector<Eigen::Index>& pick,
                        Protocol protocol, const std::vector<PaletteColor>& palette, Rng& rng) {
  LabeledDataset ds;
  ds.height = src.height;
  ds.width = src.width;
  ds.channels = 3;
  ds.palette = palette;

  std::vector<Attribute> attrs;
  attrs.push_back({"digit", digit_class_names()});
  std::vector<std::string> color_names;
  for (const auto& c : palette) color_names.push_back(c.name);
  attrs.push_back({"color", color_names});
  if (protocol == Protocol::kThreeAttr) attrs.push_back({"thickness", {"thin", "thick"}});
  ds.spec = AttributeSpec(attrs);

  const Eigen::Index hw = src.height * src.width;
  ds.labels.resize(attrs.size());
  for (const auto i : pick) {
    const std::uint8_t* g = src.pixels.data() + i * hw;
    ds.labels[0].push_back(static_cast<Eigen::Index>(src.labels[static_cast<std::size_t>(i)]));
    const Eigen::Index color = static_cast<Eigen::Index>(rng.below(palette.size()));
    ds.labels[1].push_back(color);
    ds.pixel_color.push_back(color);
    if (protocol == Protocol::kThreeAttr) {
      const Eigen::Index thick = static_cast<Eigen::Index>(rng.below(2));
      ds.labels[2].push_back(thick);
      if (thick == 1) {
        const auto dilated = thicken(g, src.height, src.width);
        ds.gray.insert(ds.gray.end(), dilated.begin(), dilated.end());
        continue;
      }
    }
    ds.gray.insert(ds.gray.end(), g, g + hw);
  }
  if (protocol == Protocol::kMixedUp) make_mixed_up(ds);
  ds.validate();
  return ds;
}

}  // namespace

Benchmark build_benchmark(const RawSplits& raw, const BenchmarkOptions& opts) {
  if (raw.train.count == 0 || raw.test.count == 0) throw DataError("build_benchmark: empty source split");
  const auto palette =
      opts.palette_override.empty() ? protocol_palette(opts.protocol) : opts.palette_override;

  Rng root(opts.seed);
  Rng subset_rng = root.fork("subset");
  Rng train_rng = root.fork("train-colors");
  Rng test_rng = root.fork("test-colors");

  std::vector<Eigen::Index> pick;
  if (opts.n_train > 0 && opts.n_train < raw.train.count) {
    const auto perm = subset_rng.permutation(static_cast<std::size_t>(raw.train.count));
    pick.assign(perm.begin(), perm.begin() + opts.n_train);
    std::sort(pick.begin(), pick.end());
  } else {
    for (Eigen::Index i = 0; i < raw.train.count; ++i) pick.push_back(i);
  }
  std::vector<Eigen::Index> all_test;
  for (Eigen::Index i = 0; i < raw.test.count; ++i) all_test.push_back(i);

  Benchmark b;
  b.train_full = assemble(raw.train, pick, opts.protocol, palette, train_rng);
  b.test = assemble(raw.test, all_test, opts.protocol, palette, test_rng);

  for (const auto& text : opts.holdout)
    b.holdout.push_back(LabelCombo::parse(text, b.train_full.spec));
  b.split = split_holdout(b.train_full, b.holdout);

  // Real seen-combination images come from the test split.
  std::vector<Eigen::Index> seen_idx;
  for (Eigen::Index i = 0; i < b.test.count(); ++i) {
    const LabelCombo c = b.test.combo(i);
    if (std::find(b.holdout.begin(), b.holdout.end(), c) == b.holdout.end()) seen_idx.push_back(i);
  }
  b.split.eval_seen = b.test.select(seen_idx);
  return b;
}

Benchmark build_benchmark(const std::string& data_dir, const BenchmarkOptions& opts) {
  return build_benchmark(load_idx_dir(data_dir), opts);
}

// ---------------------------------------------------------------------------
// Prepared-directory round trip

namespace {

void write_split(const std::string& dir, const std::string& stem, const LabeledDataset& ds) {
  RawImageSet imgs;
  imgs.count = ds.count();
  imgs.height = ds.height;
  imgs.width = ds.width;
  imgs.pixels = ds.gray;
  write_file(dir + "/" + stem + "-images-idx3-ubyte", write_idx_images(imgs));
  for (Eigen::Index a = 0; a < ds.spec.count(); ++a) {
    std::vector<std::uint8_t> lab;
    for (const auto v : ds.labels[static_cast<std::size_t>(a)])
      lab.push_back(static_cast<std::uint8_t>(v));
    write_file(dir + "/" + stem + "-labels-" + ds.spec.at(a).name + "-idx1-ubyte",
               write_idx_labels(lab));
  }
  if (!ds.pixel_color.empty()) {
    std::vector<std::uint8_t> lab;
    for (const auto v : ds.pixel_color) lab.push_back(static_cast<std::uint8_t>(v));
    write_file(dir + "/" + stem + "-labels-pixelcolor-idx1-ubyte", write_idx_labels(lab));
  }
}

LabeledDataset read_split(const std::string& dir, const std::string& stem, const AttributeSpec& spec,
                          const std::vector<PaletteColor>& palette) {
  LabeledDataset ds;
  ds.spec = spec;
  ds.palette = palette;
  ds.channels = 3;
  const RawImageSet imgs =
      to_image_set(parse_idx(read_file(dir + "/" + stem + "-images-idx3-ubyte")));
  ds.height = imgs.height;
  ds.width = imgs.width;
  ds.gray = imgs.pixels;
  for (Eigen::Index a = 0; a < spec.count(); ++a) {
    const auto lab = to_label_array(
        parse_idx(read_file(dir + "/" + stem + "-labels-" + spec.at(a).name + "-idx1-ubyte")));
    ds.labels.emplace_back(lab.begin(), lab.end());
  }
  const auto pc =
      to_label_array(parse_idx(read_file(dir + "/" + stem + "-labels-pixelcolor-idx1-ubyte")));
  ds.pixel_color.assign(pc.begin(), pc.end());
  ds.validate();
  return ds;
}

}  // namespace

void write_prepared(const std::string& dir, const Benchmark& b) {
  std::filesystem::create_directories(dir);
  std::ostringstream man;
  man << "MLCVAE-DATASET 1\n";
  man << "image " << b.train_full.height << " " << b.train_full.width << " "
      << b.train_full.channels << "\n";
  for (const auto& a : b.train_full.spec.attributes()) {
    man << "attr " << a.name;
    for (const auto& c : a.classes) man << " " << c;
    man << "\n";
  }
  for (const auto& c : b.train_full.palette)
    man << "palette " << c.name << " " << static_cast<int>(c.rgb[0]) << " "
        << static_cast<int>(c.rgb[1]) << " " << static_cast<int>(c.rgb[2]) << "\n";
  for (const auto& h : b.holdout) man << "holdout " << h.to_string(b.train_full.spec) << "\n";
  const std::string text = man.str();
  write_file(dir + "/manifest.txt", std::vector<std::uint8_t>(text.begin(), text.end()));
  write_split(dir, "train", b.train_full);
  write_split(dir, "test", b.test);
}

Benchmark load_prepared(const std::string& dir) {
  const auto bytes = read_file(dir + "/manifest.txt");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(in, line) || line != "MLCVAE-DATASET 1")
    throw ParseError("prepared dataset '" + dir + "': bad manifest header");

  std::vector<Attribute> attrs;
  std::vector<PaletteColor> palette;
  std::vector<std::string> holdout;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "image") {
      continue;  // dims come from the IDX files
    } else if (key == "attr") {
      Attribute a;
      ls >> a.name;
      std::string c;
      while (ls >> c) a.classes.push_back(c);
      attrs.push_back(std::move(a));
    } else if (key == "palette") {
      PaletteColor c;
      int r, g, bch;
      ls >> c.name >> r >> g >> bch;
      c.rgb = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
               static_cast<std::uint8_t>(bch)};
      palette.push_back(std::move(c));
    } else if (key == "holdout") {
      std::string rest;
      std::getline(ls, rest);
      while (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());
      holdout.push_back(rest);
    } else if (!key.empty()) {
      throw ParseError("prepared dataset '" + dir + "': unknown manifest key '" + key + "'");
    }
  }

  Benchmark b;
  const AttributeSpec spec(attrs);
  b.train_full = read_split(dir, "train", spec, palette);
  b.test = read_split(dir, "test", spec, palette);
  for (const auto& h : holdout) b.holdout.push_back(LabelCombo::parse(h, spec));
  b.split = split_holdout(b.train_full, b.holdout);
  std::vector<Eigen::Index> seen_idx;
  for (Eigen::Index i = 0; i < b.test.count(); ++i) {
    const LabelCombo c = b.test.combo(i);
    if (std::find(b.holdout.begin(), b.holdout.end(), c) == b.holdout.end()) seen_idx.push_back(i);
  }
  b.split.eval_seen = b.test.select(seen_idx);
  return b;
}

}  // namespace mlc
