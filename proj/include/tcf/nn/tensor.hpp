#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tcf::nn {

// Dense double-precision tensor, row-major. Small and eager by design: the
// model sizes here are desk-scale and double precision is required by the
// finite-difference gradient tests.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<long> dims) : dims_(std::move(dims)), data_(checked_numel(dims_), 0.0) {}
    Tensor(std::vector<long> dims, std::vector<double> data);

    static Tensor zeros(std::vector<long> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<long> dims, double v);
    static Tensor scalar(double v) { return full({1}, v); }

    const std::vector<long>& dims() const { return dims_; }
    long dim(std::size_t i) const { return dims_[i]; }
    std::size_t rank() const { return dims_.size(); }
    long numel() const { return static_cast<long>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
    bool all_finite() const;
    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    std::string shape_str() const;

  private:
    static std::size_t checked_numel(const std::vector<long>& dims);
    std::vector<long> dims_;
    std::vector<double> data_;
};

}  // namespace tcf::nn
