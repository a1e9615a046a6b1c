#include "mtlprune/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "mtlprune/error.hpp"

namespace mtlprune {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void require_same_shape(const Shape& a, const Shape& b, const std::string& what) {
    if (a != b) {
        throw ShapeError(what + ": shape " + shape_to_string(a) + " does not match " +
                         shape_to_string(b));
    }
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_to_string(shape_));
    }
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw ShapeError("tensor of shape " + shape_to_string(shape_) + " cannot hold " +
                         std::to_string(data_.size()) + " elements");
    }
}

template <typename Real>
std::size_t Tensor<Real>::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape_));
    }
    return shape_[axis];
}

template <typename Real>
Real& Tensor<Real>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

template <typename Real>
const Real& Tensor<Real>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

template <typename Real>
void Tensor<Real>::fill(Real value) {
    std::fill(data_.begin(), data_.end(), value);
}

template <typename Real>
Tensor<Real>& Tensor<Real>::operator+=(const Tensor& other) {
    require_same_shape(shape_, other.shape_, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

template <typename Real>
Tensor<Real>& Tensor<Real>::operator*=(Real scale) {
    for (auto& v : data_) v *= scale;
    return *this;
}

template <typename Real>
Tensor<Real> Tensor<Real>::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

template <typename Real>
bool Tensor<Real>::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mtlprune
