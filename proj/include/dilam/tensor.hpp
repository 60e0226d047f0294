#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dilam/common.hpp"

namespace dilam {

/// Dense n-dimensional array, contiguous row-major storage.
template <typename T>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), fill);
    }

    static TensorT from(std::vector<int> shape, std::vector<T> data) {
        if (count(shape) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    T& at4(int n, int c, int h, int w) {
        return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at4(int n, int c, int h, int w) const {
        return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    T& at2(int n, int m) { return data_[static_cast<size_t>(int64_t(n) * shape_[1] + m)]; }
    const T& at2(int n, int m) const { return data_[static_cast<size_t>(int64_t(n) * shape_[1] + m)]; }

    void fill(T v) { data_.assign(data_.size(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    std::string shape_str() const { return shape_str(shape_); }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ']';
        return os.str();
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    /// NaN/Inf is an error condition, not a state we carry forward.
    void check_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string("non-finite values in ") + what);
    }

  private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

/// Named model parameter; backward accumulates into `grad` iff `trainable`.
template <typename T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
    bool trainable = true;

    ParameterT() = default;
    ParameterT(std::string n, TensorT<T> v) : name(std::move(n)), value(std::move(v)) {
        grad = TensorT<T>(value.shape());
    }
};

using Parameter = ParameterT<float>;

}  // namespace dilam
