#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "resp/common.hpp"

namespace resp {

// Dense row-major float64 tensor. Rank 2 (batch, features) and rank 3
// (batch, time, channels) cover every network in this project; scalars are
// rank-1 tensors of size 1.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(numel(), fill);
    }
    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }
    static Tensor from(std::vector<int> s, std::vector<double> values) {
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(values);
        if (t.data.size() != t.numel()) throw ShapeError("tensor data does not match shape");
        return t;
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return shape.empty() ? 0 : n;
    }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double& at3(int b, int t, int c) {
        return data[(static_cast<std::size_t>(b) * dim(1) + t) * dim(2) + c];
    }
    double at3(int b, int t, int c) const {
        return data[(static_cast<std::size_t>(b) * dim(1) + t) * dim(2) + c];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

}  // namespace resp
