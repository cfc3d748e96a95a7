#include "advkd/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "advkd/error.hpp"

namespace advkd {

namespace {
size_t checked_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ConfigError("tensor extent must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0f);
}

Tensor::Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data) {
    if (checked_numel(shape) != data.size())
        throw ConfigError("tensor data size does not match shape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

float& Tensor::at(int n, int c, int h, int w) {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}
float Tensor::at(int n, int c, int h, int w) const {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}
float& Tensor::at(int c, int h, int w) {
    return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
}
float Tensor::at(int c, int h, int w) const {
    return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
}
float& Tensor::at(int n, int d) {
    return data_[static_cast<size_t>(n) * shape_[1] + d];
}
float Tensor::at(int n, int d) const {
    return data_[static_cast<size_t>(n) * shape_[1] + d];
}

void Tensor::fill(float v) {
    std::fill(data_.begin(), data_.end(), v);
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (checked_numel(shape) != data_.size())
        throw ConfigError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(what) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

void add_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    float* pa = a.data();
    const float* pb = b.data();
    for (size_t i = 0; i < a.numel(); ++i) pa[i] += pb[i];
}

void sub_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    float* pa = a.data();
    const float* pb = b.data();
    for (size_t i = 0; i < a.numel(); ++i) pa[i] -= pb[i];
}

void scale_inplace(Tensor& a, float s) {
    float* pa = a.data();
    for (size_t i = 0; i < a.numel(); ++i) pa[i] *= s;
}

void axpy_inplace(Tensor& a, float s, const Tensor& b) {
    require_same_shape(a, b, "axpy");
    float* pa = a.data();
    const float* pb = b.data();
    for (size_t i = 0; i < a.numel(); ++i) pa[i] += s * pb[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

Tensor scaled(const Tensor& a, float s) {
    Tensor out = a;
    scale_inplace(out, s);
    return out;
}

float mean_all(const Tensor& a) {
    if (a.numel() == 0) throw ConfigError("mean of empty tensor");
    double acc = 0.0;
    const float* p = a.data();
    for (size_t i = 0; i < a.numel(); ++i) acc += p[i];
    return static_cast<float>(acc / static_cast<double>(a.numel()));
}

float mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    const float* pa = a.data();
    const float* pb = b.data();
    for (size_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        acc += d * d;
    }
    return static_cast<float>(acc / static_cast<double>(a.numel()));
}

bool has_nonfinite(const Tensor& a) {
    const float* p = a.data();
    for (size_t i = 0; i < a.numel(); ++i)
        if (!std::isfinite(p[i])) return true;
    return false;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.numel() * sizeof(float)) == 0;
}

}  // namespace advkd
