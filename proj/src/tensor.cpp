#include "igen/tensor.hpp"

#include <cmath>
#include <cstring>

namespace igen {

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int64_t e : shape_) {
    if (e < 0) throw NumericError("negative tensor extent");
    n *= e;
  }
  data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::from(std::vector<double> values) {
  Tensor t;
  t.shape_ = {static_cast<int64_t>(values.size())};
  t.data_ = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

Tensor& Tensor::add(const Tensor& other) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::sub(const Tensor& other) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::scale(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Tensor& Tensor::axpy(double a, const Tensor& x) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  return *this;
}

double Tensor::dot(const Tensor& other) const {
  double s = 0.0;
  for (size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
  return s;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace igen
