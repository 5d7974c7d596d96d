// Dense row-major f64 tensor (rank 1 or 2). Carrier type for all model state.
#ifndef PHX_TENSOR_H
#define PHX_TENSOR_H

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace phx {

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int64_t n) { return Tensor(std::vector<int64_t>{n}); }
  static Tensor zeros(int64_t r, int64_t c) {
    return Tensor(std::vector<int64_t>{r, c});
  }
  static Tensor vec(std::initializer_list<double> v) {
    Tensor t = zeros(static_cast<int64_t>(v.size()));
    int64_t i = 0;
    for (double x : v) t.data_[i++] = x;
    return t;
  }
  static Tensor mat(int64_t r, int64_t c, std::initializer_list<double> v) {
    if (static_cast<int64_t>(v.size()) != r * c)
      throw std::invalid_argument("Tensor::mat: wrong element count");
    Tensor t = zeros(r, c);
    int64_t i = 0;
    for (double x : v) t.data_[i++] = x;
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int64_t cols() const { return rank() == 2 ? shape_[1] : 1; }
  const std::vector<int64_t>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double& operator()(int64_t i) { return data_[i]; }
  double operator()(int64_t i) const { return data_[i]; }
  double& operator()(int64_t i, int64_t j) { return data_[i * cols() + j]; }
  double operator()(int64_t i, int64_t j) const { return data_[i * cols() + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int64_t d : shape_) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
  }

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

// Throws if any entry is NaN/Inf. Called at op and file boundaries.
void ensure_finite(const Tensor& t, const std::string& where);
void ensure_finite(double v, const std::string& where);

std::string shape_str(const Tensor& t);

}  // namespace phx

#endif
