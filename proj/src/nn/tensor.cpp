#include "tcf/nn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tcf/error.hpp"

namespace tcf::nn {

Tensor::Tensor(std::vector<long> dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != checked_numel(dims_))
        throw ValidationError("tensor data size " + std::to_string(data_.size()) + " != shape " + shape_str());
}

Tensor Tensor::full(std::vector<long> dims, double v) {
    Tensor t(std::move(dims));
    t.fill(v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream oss;
    oss << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) oss << (i ? "," : "") << dims_[i];
    oss << ']';
    return oss.str();
}

std::size_t Tensor::checked_numel(const std::vector<long>& dims) {
    std::size_t n = 1;
    for (long d : dims) {
        if (d < 0) throw ValidationError("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace tcf::nn
