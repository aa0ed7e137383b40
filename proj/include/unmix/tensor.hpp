#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "unmix/errors.hpp"

namespace unmix {

// Dense row-major n-dimensional array of doubles. The currency of all
// network math in this toolkit. Kept deliberately small: shape + flat data.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                                 " does not match shape product " + std::to_string(count(shape)));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(count(t.shape), 0.0);
        return t;
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(count(t.shape), v);
        return t;
    }

    static Tensor vec(std::vector<double> d) {
        Tensor t;
        t.shape = {d.size()};
        t.data = std::move(d);
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    // Rows/cols of a 2-d tensor; a 1-d tensor is treated as a single row.
    std::size_t rows() const { return rank() >= 2 ? shape[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? shape[1] : (rank() == 1 ? shape[0] : 0); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at2(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at2(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

}  // namespace unmix
