#include "ccnn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ccnn {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor shape has non-positive dimension " +
                                        std::to_string(d));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    const std::size_t expected = shape_product(shape_);
    if (data_.size() != expected) {
        throw std::invalid_argument(
            "tensor data length " + std::to_string(data_.size()) +
            " does not match shape " + shape_to_string(shape_));
    }
    if (!all_finite()) {
        throw std::invalid_argument("tensor contains non-finite values");
    }
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

std::string Tensor::shape_string() const { return shape_to_string(shape_); }

void require_shape(const Tensor& t, const std::vector<int>& expected,
                   const std::string& what) {
    if (t.shape() != expected) {
        throw std::invalid_argument(what + ": expected shape " +
                                    shape_to_string(expected) + ", got " +
                                    t.shape_string());
    }
}

} // namespace ccnn
