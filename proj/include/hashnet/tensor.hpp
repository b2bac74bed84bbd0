#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "hashnet/error.hpp"

namespace hashnet {

/// Dense row-major tensor of 64-bit reals.
///
/// Feature maps are stored [channels, height, width] per image; batched
/// tensors prepend a batch extent. All extents are at least 1 and the flat
/// data length always equals the product of the extents. There is no
/// implicit broadcasting beyond the scalar variants below: shape mismatches
/// throw.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return {data_.data(), data_.size()}; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    // Unchecked row-major element access.
    double& operator()(std::size_t i0) { return data_[i0]; }
    double operator()(std::size_t i0) const { return data_[i0]; }
    double& operator()(std::size_t i0, std::size_t i1) {
        return data_[i0 * shape_[1] + i1];
    }
    double operator()(std::size_t i0, std::size_t i1) const {
        return data_[i0 * shape_[1] + i1];
    }
    double& operator()(std::size_t i0, std::size_t i1, std::size_t i2) {
        return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
    }
    double operator()(std::size_t i0, std::size_t i1, std::size_t i2) const {
        return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
    }
    double& operator()(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }
    double operator()(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }

    /// Same data reinterpreted under a new shape with equal element count.
    Tensor reshaped(std::vector<std::size_t> new_shape) const;

    Tensor& operator+=(const Tensor& rhs);
    Tensor& operator-=(const Tensor& rhs);
    Tensor& scale(double s);
    void fill(double value);

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);

/// Standard product of two rank-2 tensors; inner extents must agree.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Filter-bank geometry of a convolution: N output channels, M input
/// channels and a square kernel extent. Depthwise banks carry one kernel
/// per input channel (N == M).
struct Shape4 {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel = 0;

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Binary tensor format used by checkpoints: extent count and extents as
/// little-endian 64-bit unsigned integers, then the data as little-endian
/// 32-bit floats.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

/// Little-endian integer plumbing shared by the binary file formats.
/// read_u64_le throws on a short read.
void write_u64_le(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64_le(std::istream& in);

/// Round to the nearest value representable in 32-bit float. Stored
/// parameters are kept on this grid so checkpoints round-trip bit-exactly.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
void quantize_f32(Tensor& t);

} // namespace hashnet
