#ifndef IGEN_TENSOR_HPP_
#define IGEN_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "igen/error.hpp"

namespace igen {

// Dense row-major f64 tensor. Deliberately small: shape bookkeeping plus a
// flat buffer; the math lives in the kernels that consume it.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor from(std::vector<double> values);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t extent(int64_t d) const { return shape_[static_cast<size_t>(d)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at2(int64_t r, int64_t c) {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
  }
  double at2(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
  }

  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(double v);
  Tensor clone() const { return *this; }

  // Elementwise in-place helpers for schedule/sampler arithmetic.
  Tensor& add(const Tensor& other);
  Tensor& sub(const Tensor& other);
  Tensor& scale(double s);
  Tensor& axpy(double a, const Tensor& x);  // this += a * x

  double dot(const Tensor& other) const;
  double max_abs() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);

// Throws NumericError naming `what` if any element is NaN/Inf.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace igen

#endif  // IGEN_TENSOR_HPP_
