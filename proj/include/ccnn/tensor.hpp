#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ccnn {

// Dense row-major array of 64-bit floats with an explicit shape.
// Construction enforces product(shape) == data.size() and rejects
// non-finite values; every dimension must be positive.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::size_t size() const { return data_.size(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double v);

    std::string shape_string() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Trainable value with an accumulated gradient of the same shape.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(std::vector<int> shape)
        : value(shape), grad(std::move(shape)) {}
    explicit Param(Tensor v) : value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

std::size_t shape_product(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Throws std::invalid_argument carrying both shapes when they differ.
void require_shape(const Tensor& t, const std::vector<int>& expected,
                   const std::string& what);

} // namespace ccnn
