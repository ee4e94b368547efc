#pragma once
// Dense 2-D float64 tensor and hand-written forward/backward pairs for every
// layer primitive used by the models. No autodiff tape: each backward is an
// explicit function of the forward caches, and each is grad-checked on its
// own in the test suite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/rng.hpp"

namespace kglm {

struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor(std::initializer_list<std::initializer_list<double>> init) {
        rows = init.size();
        cols = rows ? init.begin()->size() : 0;
        data.reserve(rows * cols);
        for (const auto& row : init) {
            if (row.size() != cols) throw ShapeError("ragged initializer");
            data.insert(data.end(), row.begin(), row.end());
        }
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.rows, t.cols); }

inline Tensor randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
    Tensor t(rows, cols);
    for (double& v : t.data) v = stddev * rng.next_gaussian();
    return t;
}

inline bool all_finite(const Tensor& t) {
    return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// ---- elementwise ----

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

inline void accumulate(Tensor& into, const Tensor& grad) {
    require_same_shape(into, grad, "accumulate");
    for (std::size_t i = 0; i < into.size(); ++i) into.data[i] += grad.data[i];
}

// Adds row vector v (1×n) to every row of x. Backward for v is the column
// sum of the output gradient.
inline Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (v.rows != 1 || v.cols != x.cols)
        throw ShapeError("add_rowvec: vector " + v.shape_str() + " vs matrix " + x.shape_str());
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) += v.at(0, j);
    return out;
}

inline Tensor colsum(const Tensor& x) {
    Tensor out(1, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out.at(0, j) += x.at(i, j);
    return out;
}

inline Tensor transpose(const Tensor& x) {
    Tensor out(x.cols, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
    return out;
}

// ---- matmul ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dims disagree " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t l = 0; l < a.cols; ++l) {
            double av = a.at(i, l);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out.at(i, j) += av * b.at(l, j);
        }
    }
    return out;
}

// c = a·b; returns (dc/da, dc/db) contracted with upstream dc.
inline Tensor matmul_grad_a(const Tensor& dc, const Tensor& b) { return matmul(dc, transpose(b)); }
inline Tensor matmul_grad_b(const Tensor& a, const Tensor& dc) { return matmul(transpose(a), dc); }

// ---- softmax ----

inline Tensor softmax_rows(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, x.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

// dx = y ∘ (dy − rowdot(dy, y))
inline Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y) {
    require_same_shape(dy, y, "softmax_backward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) dot += dy.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < y.cols; ++j) dx.at(i, j) = y.at(i, j) * (dy.at(i, j) - dot);
    }
    return dx;
}

// ---- layer norm (per row, no affine) ----

struct LayerNormCache {
    Tensor xhat;                  // normalized output, also the forward result
    std::vector<double> inv_std;  // per row
};

inline LayerNormCache layer_norm(const Tensor& x, double eps = 1e-5) {
    LayerNormCache c;
    c.xhat = x;
    c.inv_std.resize(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += x.at(i, j);
        mean /= static_cast<double>(x.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(x.cols);
        double r = 1.0 / std::sqrt(var + eps);
        c.inv_std[i] = r;
        for (std::size_t j = 0; j < x.cols; ++j) c.xhat.at(i, j) = (x.at(i, j) - mean) * r;
    }
    return c;
}

// dx = r · (dy − mean(dy) − x̂ · mean(dy ∘ x̂)), per row
inline Tensor layer_norm_backward(const Tensor& dy, const LayerNormCache& cache) {
    const Tensor& xh = cache.xhat;
    require_same_shape(dy, xh, "layer_norm_backward");
    Tensor dx = dy;
    double n = static_cast<double>(xh.cols);
    for (std::size_t i = 0; i < xh.rows; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < xh.cols; ++j) {
            m1 += dy.at(i, j);
            m2 += dy.at(i, j) * xh.at(i, j);
        }
        m1 /= n;
        m2 /= n;
        for (std::size_t j = 0; j < xh.cols; ++j)
            dx.at(i, j) = cache.inv_std[i] * (dy.at(i, j) - m1 - xh.at(i, j) * m2);
    }
    return dx;
}

// ---- GELU (exact erf form) ----

inline Tensor gelu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    return out;
}

inline Tensor gelu_backward(const Tensor& dy, const Tensor& x) {
    require_same_shape(dy, x, "gelu_backward");
    Tensor dx = dy;
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x.data[i];
        double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
        double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        dx.data[i] = dy.data[i] * (cdf + v * pdf);
    }
    return dx;
}

// ---- cross entropy ----

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor dlogits;  // zero rows at ignored positions
};

// Mean over non-ignored positions of −log softmax(logits)[t, target_t],
// computed in log-sum-exp form. A negative target ignores that row (its
// gradient is exactly zero).
inline CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<std::int64_t>& targets) {
    if (targets.size() != logits.rows)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(logits.rows) + " rows");
    CrossEntropyResult res;
    res.dlogits = zeros_like(logits);
    std::size_t counted = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (targets[i] < 0) continue;
        auto t = static_cast<std::size_t>(targets[i]);
        if (t >= logits.cols)
            throw Error("cross_entropy: target " + std::to_string(t) + " out of range for vocab " +
                        std::to_string(logits.cols));
        ++counted;
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(logits.at(i, j) - mx);
        double lse = mx + std::log(sum);
        res.loss += lse - logits.at(i, t);
        for (std::size_t j = 0; j < logits.cols; ++j)
            res.dlogits.at(i, j) = std::exp(logits.at(i, j) - lse);
        res.dlogits.at(i, t) -= 1.0;
    }
    if (counted == 0) throw Error("cross_entropy: no scored positions");
    res.loss /= static_cast<double>(counted);
    double inv = 1.0 / static_cast<double>(counted);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (targets[i] < 0) continue;
        for (std::size_t j = 0; j < logits.cols; ++j) res.dlogits.at(i, j) *= inv;
    }
    return res;
}

// ---- row assembly ----

inline Tensor vstack(const std::vector<Tensor>& parts) {
    std::size_t rows = 0, cols = 0;
    for (const Tensor& p : parts) {
        if (p.rows == 0) continue;
        if (cols == 0) cols = p.cols;
        if (p.cols != cols) throw ShapeError("vstack: column mismatch");
        rows += p.rows;
    }
    Tensor out(rows, cols);
    std::size_t r = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * cols));
        r += p.rows;
    }
    return out;
}

inline Tensor take_rows(const Tensor& x, std::size_t from, std::size_t count) {
    if (from + count > x.rows) throw ShapeError("take_rows: range out of bounds");
    Tensor out(count, x.cols);
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(from * x.cols),
              x.data.begin() + static_cast<std::ptrdiff_t>((from + count) * x.cols), out.data.begin());
    return out;
}

}  // namespace kglm
