#ifndef SRN_TENSOR_HPP_
#define SRN_TENSOR_HPP_

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace srn {

// Error hierarchy. The CLI maps these to distinct exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed configuration (world spec, model config, train config, flags).
struct ConfigError : Error {
  using Error::Error;
};
// Malformed or incompatible data files (datasets, checkpoints, reports).
struct DataError : Error {
  using Error::Error;
};
// Shape/dimension violations detected while composing or running ops.
struct ShapeError : Error {
  using Error::Error;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

/// Dense row-major tensor of real values.
///
/// Axis convention used throughout: spatial maps are (H, W, C) with C
/// fastest-varying, so the flat offset of (i, j, c) is (i*W + j)*C + c.
/// Convolution weights are (Cout, KH, KW, Cin/groups), vectors are (N).
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("Tensor: non-positive dimension in " + shape_str(shape_));
    }
    data_ = Storage::Zero(count(shape_));
  }

  Tensor(std::vector<int> shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor constant(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor ones(std::vector<int> shape) { return constant(std::move(shape), Scalar(1)); }

  static Tensor from(std::vector<int> shape, std::vector<Scalar> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = Eigen::Map<const Storage>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (t.data_.size() != count(t.shape_))
      throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                       " values for shape " + shape_str(t.shape_));
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Eigen view of the flat storage, for expression-style elementwise math.
  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator[](int i) { return data_[i]; }
  Scalar operator[](int i) const { return data_[i]; }

  Scalar& operator()(int i) {
    assert(rank() == 1);
    return data_[i];
  }
  Scalar operator()(int i) const {
    assert(rank() == 1);
    return data_[i];
  }
  Scalar& operator()(int i, int j) {
    assert(rank() == 2);
    return data_[i * shape_[1] + j];
  }
  Scalar operator()(int i, int j) const {
    assert(rank() == 2);
    return data_[i * shape_[1] + j];
  }
  Scalar& operator()(int i, int j, int k) {
    assert(rank() == 3);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Scalar operator()(int i, int j, int k) const {
    assert(rank() == 3);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Scalar& operator()(int i, int j, int k, int l) {
    assert(rank() == 4);
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  Scalar operator()(int i, int j, int k, int l) const {
    assert(rank() == 4);
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(Scalar v) { data_.setConstant(v); }
  void set_zero() { data_.setZero(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Reinterprets the storage under a new shape with the same element count.
  Tensor reshaped(std::vector<int> new_shape) const {
    if (count(new_shape) != data_.size())
      throw ShapeError("Tensor::reshaped: " + shape_str(shape_) + " -> " + shape_str(new_shape));
    return Tensor(std::move(new_shape), data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.assign(shape_, data_.template cast<Other>());
    return out;
  }

  void assign(std::vector<int> shape, Eigen::Array<Scalar, Eigen::Dynamic, 1> data) {
    shape_ = std::move(shape);
    data_ = std::move(data);
  }

  bool all_finite() const {
    for (Eigen::Index i = 0; i < data_.size(); ++i)
      if (!std::isfinite(static_cast<double>(data_[i]))) return false;
    return true;
  }

  static Eigen::Index count(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int d : shape) n *= d;
    return n;
  }

 private:
  std::vector<int> shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace srn

#endif  // SRN_TENSOR_HPP_
