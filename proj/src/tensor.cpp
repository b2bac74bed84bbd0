#include "hashnet/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace hashnet {

namespace {

std::size_t checked_element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw Error("tensor shape must have at least one extent");
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw Error("tensor extents must be >= 1");
        }
        n *= e;
    }
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
    }
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_element_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_element_count(shape_) != data_.size()) {
        throw Error("tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw Error("tensor axis " + std::to_string(axis) + " out of range for rank " +
                    std::to_string(shape_.size()));
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_element_count(new_shape) != data_.size()) {
        throw Error("reshape to " + shape_str(new_shape) + " changes element count of " +
                    shape_str(shape_));
    }
    return Tensor(std::move(new_shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& rhs) {
    require_same_shape(*this, rhs, "sub");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

Tensor& Tensor::scale(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r += b;
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r -= b;
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
    return r;
}

Tensor add(const Tensor& a, double s) {
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += s;
    return r;
}

Tensor sub(const Tensor& a, double s) { return add(a, -s); }

Tensor mul(const Tensor& a, double s) {
    Tensor r = a;
    r.scale(s);
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw Error("matmul requires rank-2 tensors");
    }
    const std::size_t rows = a.extent(0), inner = a.extent(1);
    const std::size_t cols = b.extent(1);
    if (b.extent(0) != inner) {
        throw Error("matmul inner extents disagree: " + std::to_string(inner) + " vs " +
                    std::to_string(b.extent(0)));
    }
    Tensor c({rows, cols});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = pa[i * inner + k];
            if (aik == 0.0) continue;
            const double* brow = pb + k * cols;
            double* crow = pc + i * cols;
            for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw Error("truncated tensor header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

namespace {

void write_f32_le(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error("truncated tensor data");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

} // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    write_u64_le(out, t.rank());
    for (std::size_t a = 0; a < t.rank(); ++a) write_u64_le(out, t.extent(a));
    for (std::size_t i = 0; i < t.size(); ++i) {
        write_f32_le(out, static_cast<float>(t[i]));
    }
}

Tensor read_tensor(std::istream& in) {
    const std::uint64_t rank = read_u64_le(in);
    if (rank == 0 || rank > 8) {
        throw Error("tensor rank " + std::to_string(rank) + " out of range");
    }
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (std::uint64_t a = 0; a < rank; ++a) {
        const std::uint64_t e = read_u64_le(in);
        if (e == 0 || e > (std::uint64_t{1} << 32)) {
            throw Error("tensor extent out of range");
        }
        shape[a] = static_cast<std::size_t>(e);
        count *= shape[a];
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(read_f32_le(in));
    }
    return Tensor(std::move(shape), std::move(data));
}

void quantize_f32(Tensor& t) {
    double* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = to_f32(p[i]);
}

} // namespace hashnet
