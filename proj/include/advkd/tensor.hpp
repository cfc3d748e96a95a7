#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace advkd {

/// Dense row-major float32 tensor. Images are (C,H,W), batches (N,C,H,W),
/// matrices (N,D). Rank and extents are dynamic.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::initializer_list<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float value);
    static Tensor from_data(std::vector<int> shape, std::vector<float> data);

    bool defined() const { return !shape_.empty(); }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    size_t numel() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float& operator[](size_t i) { return data_[i]; }
    float operator[](size_t i) const { return data_[i]; }

    // (n,c,h,w) indexing for rank-4, (c,h,w) for rank-3, (n,d) for rank-2.
    float& at(int n, int c, int h, int w);
    float at(int n, int c, int h, int w) const;
    float& at(int c, int h, int w);
    float at(int c, int h, int w) const;
    float& at(int n, int d);
    float at(int n, int d) const;

    void fill(float v);
    void zero() { fill(0.0f); }

    /// Same data reinterpreted under a new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// Elementwise helpers shared across modules. All require matching shapes.
void add_inplace(Tensor& a, const Tensor& b);            // a += b
void sub_inplace(Tensor& a, const Tensor& b);            // a -= b
void scale_inplace(Tensor& a, float s);                  // a *= s
void axpy_inplace(Tensor& a, float s, const Tensor& b);  // a += s*b
Tensor add(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, float s);
float mean_all(const Tensor& a);
float mse(const Tensor& a, const Tensor& b);
bool has_nonfinite(const Tensor& a);
bool bitwise_equal(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace advkd
