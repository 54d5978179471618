#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asbu/errors.hpp"

namespace asbu {

/// Dense rank-4 shape in (batch, channels, height, width) order.
struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Shape4&) const = default;

    std::int64_t count() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    std::string str() const;
};

/// Dense rank-4 tensor, row-major in (batch, channel, row, column) order.
/// Values are doubles; an optional gradient buffer of identical shape can be
/// attached and accumulated into.
struct Tensor {
    Shape4 shape;
    std::vector<double> v;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    Tensor(int n, int c, int h, int w, double fill = 0.0);
    Tensor(Shape4 s, double fill = 0.0);
    static Tensor from_values(Shape4 s, std::vector<double> values);

    std::int64_t size() const { return shape.count(); }

    std::int64_t offset(int b, int c, int y, int x) const {
        return ((static_cast<std::int64_t>(b) * shape.c + c) * shape.h + y) * shape.w + x;
    }

    // Unchecked fast access for inner loops.
    double& e(int b, int c, int y, int x) { return v[offset(b, c, y, x)]; }
    double e(int b, int c, int y, int x) const { return v[offset(b, c, y, x)]; }

    // Bounds-checked element read.
    double at(int b, int c, int y, int x) const;

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    /// Allocates the gradient buffer (zeros) if absent.
    std::vector<double>& ensure_grad();
    void clear_grad();
};

Tensor new_tensor(Shape4 shape, double fill);

/// grad += g elementwise; the buffer is allocated as zeros when absent.
void accumulate_grad(Tensor& t, const Tensor& g);

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace asbu
