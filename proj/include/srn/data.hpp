#ifndef SRN_DATA_HPP_
#define SRN_DATA_HPP_

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "srn/binary_io.hpp"
#include "srn/tensor.hpp"

namespace srn {

/// One labeled image. Glyph centers are ground truth kept for analysis only;
/// training and evaluation never read them. centers[l] = (y, x) when
/// targets[l] == 1, (-1, -1) otherwise.
struct Sample {
  Tensorf image;
  std::vector<std::uint8_t> targets;
  std::vector<std::array<float, 2>> centers;
};

/// In-memory dataset: samples stored train split first, then val, then test.
struct Dataset {
  int height = 0, width = 0, channels = 0, num_labels = 0;
  int n_train = 0, n_val = 0, n_test = 0;
  std::vector<Sample> samples;

  int total() const { return n_train + n_val + n_test; }

  int split_begin(const std::string& split) const {
    if (split == "train") return 0;
    if (split == "val") return n_train;
    if (split == "test") return n_train + n_val;
    throw ConfigError("unknown split: " + split);
  }
  int split_count(const std::string& split) const {
    if (split == "train") return n_train;
    if (split == "val") return n_val;
    if (split == "test") return n_test;
    throw ConfigError("unknown split: " + split);
  }

  void validate() const {
    if (static_cast<int>(samples.size()) != total())
      throw DataError("dataset: sample count " + std::to_string(samples.size()) +
                      " does not match splits " + std::to_string(total()));
    const std::vector<int> img_shape = {height, width, channels};
    for (const auto& s : samples) {
      if (s.image.shape() != img_shape)
        throw DataError("dataset: sample image shape " + shape_str(s.image.shape()) +
                        " != " + shape_str(img_shape));
      if (static_cast<int>(s.targets.size()) != num_labels ||
          static_cast<int>(s.centers.size()) != num_labels)
        throw DataError("dataset: target/center arity mismatch");
    }
  }
};

constexpr char kDatasetMagic[9] = "SRNDSET1";

inline void save_dataset(std::ostream& os, const Dataset& d) {
  d.validate();
  write_magic(os, kDatasetMagic);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(d.total()));
  write_u32(os, static_cast<std::uint32_t>(d.height));
  write_u32(os, static_cast<std::uint32_t>(d.width));
  write_u32(os, static_cast<std::uint32_t>(d.channels));
  write_u32(os, static_cast<std::uint32_t>(d.num_labels));
  write_u32(os, static_cast<std::uint32_t>(d.n_train));
  write_u32(os, static_cast<std::uint32_t>(d.n_val));
  write_u32(os, static_cast<std::uint32_t>(d.n_test));
  for (const auto& s : d.samples) {
    write_f32_block(os, s.image.data(), static_cast<std::size_t>(s.image.size()));
    for (std::uint8_t t : s.targets) os.put(static_cast<char>(t));
    for (const auto& c : s.centers) {
      write_f32(os, c[0]);
      write_f32(os, c[1]);
    }
  }
}

inline void save_dataset_file(const std::string& path, const Dataset& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write dataset: " + path);
  save_dataset(os, d);
  if (!os) throw DataError("dataset write failed: " + path);
}

inline Dataset load_dataset(std::istream& is, const std::string& what) {
  expect_magic(is, kDatasetMagic, what);
  const std::uint32_t version = read_u32(is);
  if (version != 1)
    throw DataError(what + ": unsupported dataset version " + std::to_string(version));
  Dataset d;
  const std::uint32_t n = read_u32(is);
  d.height = static_cast<int>(read_u32(is));
  d.width = static_cast<int>(read_u32(is));
  d.channels = static_cast<int>(read_u32(is));
  d.num_labels = static_cast<int>(read_u32(is));
  d.n_train = static_cast<int>(read_u32(is));
  d.n_val = static_cast<int>(read_u32(is));
  d.n_test = static_cast<int>(read_u32(is));
  if (d.total() != static_cast<int>(n))
    throw DataError(what + ": split sizes do not sum to sample count");
  d.samples.resize(n);
  for (auto& s : d.samples) {
    s.image = Tensorf({d.height, d.width, d.channels});
    read_f32_block(is, s.image.data(), static_cast<std::size_t>(s.image.size()));
    s.targets.resize(static_cast<std::size_t>(d.num_labels));
    for (auto& t : s.targets) {
      const int ch = is.get();
      if (ch < 0) throw DataError(what + ": truncated targets");
      if (ch != 0 && ch != 1) throw DataError(what + ": non-binary target byte");
      t = static_cast<std::uint8_t>(ch);
    }
    s.centers.resize(static_cast<std::size_t>(d.num_labels));
    for (auto& c : s.centers) {
      c[0] = read_f32(is);
      c[1] = read_f32(is);
    }
  }
  d.validate();
  return d;
}

inline Dataset load_dataset_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset: " + path);
  return load_dataset(is, path);
}

/// Targets of one sample as a scalar tensor.
template <typename Scalar>
Tensor<Scalar> targets_tensor(const Sample& s) {
  Tensor<Scalar> t({static_cast<int>(s.targets.size())});
  for (std::size_t i = 0; i < s.targets.size(); ++i)
    t[static_cast<int>(i)] = static_cast<Scalar>(s.targets[i]);
  return t;
}

}  // namespace srn

#endif  // SRN_DATA_HPP_
