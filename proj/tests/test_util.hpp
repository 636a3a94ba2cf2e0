#ifndef SRN_TESTS_TEST_UTIL_HPP_
#define SRN_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn::test {

template <typename Scalar>
Tensor<Scalar> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double stddev = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev);
  for (int i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(normal(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> uniform_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor<Scalar> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (int i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(u(rng));
  return t;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename Scalar>
bool bit_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

/// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("srn_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace srn::test

#endif  // SRN_TESTS_TEST_UTIL_HPP_
