#include "asbu/tensor.hpp"

#include <sstream>

namespace asbu {

std::string Shape4::str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

static void validate_shape(const Shape4& s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
        throw ShapeError("tensor dimensions must all be >= 1, got " + s.str());
    }
}

Tensor::Tensor(int n, int c, int h, int w, double fill) : Tensor(Shape4{n, c, h, w}, fill) {}

Tensor::Tensor(Shape4 s, double fill) : shape(s) {
    validate_shape(s);
    v.assign(static_cast<std::size_t>(s.count()), fill);
}

Tensor Tensor::from_values(Shape4 s, std::vector<double> values) {
    validate_shape(s);
    if (static_cast<std::int64_t>(values.size()) != s.count()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + s.str());
    }
    Tensor t;
    t.shape = s;
    t.v = std::move(values);
    return t;
}

double Tensor::at(int b, int c, int y, int x) const {
    if (b < 0 || b >= shape.n || c < 0 || c >= shape.c || y < 0 || y >= shape.h || x < 0 ||
        x >= shape.w) {
        throw IndexError("index (" + std::to_string(b) + "," + std::to_string(c) + "," +
                         std::to_string(y) + "," + std::to_string(x) + ") out of range for " +
                         shape.str());
    }
    return v[static_cast<std::size_t>(offset(b, c, y, x))];
}

std::vector<double>& Tensor::ensure_grad() {
    if (!grad) {
        grad.emplace(v.size(), 0.0);
    }
    return *grad;
}

void Tensor::clear_grad() {
    if (grad) {
        std::fill(grad->begin(), grad->end(), 0.0);
    }
}

Tensor new_tensor(Shape4 shape, double fill) { return Tensor(shape, fill); }

void accumulate_grad(Tensor& t, const Tensor& g) {
    if (!(t.shape == g.shape)) {
        throw ShapeError("gradient shape " + g.shape.str() + " does not match tensor shape " +
                         t.shape.str());
    }
    auto& buf = t.ensure_grad();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        buf[i] += g.v[i];
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!(a.shape == b.shape)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape.str() + " vs " +
                         b.shape.str());
    }
}

}  // namespace asbu
