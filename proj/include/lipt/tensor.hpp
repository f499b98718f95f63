#pragma once

// Row-major double tensors and the dense kernels the encoder is built from:
// GEMM variants, layer norm, GELU, and masked row softmax. Single-threaded
// with fixed reduction order, so results are reproducible bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lipt/common.hpp"

namespace lipt {

struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        v.assign(numel_of(shape), 0.0);
    }
    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }

    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t numel() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    size_t dim(size_t i) const { return shape.at(i); }
};

// C (+)= A(M,K) * B(K,N)
inline void gemm(const double* A, const double* B, double* C,
                 size_t M, size_t K, size_t N, bool accumulate) {
    for (size_t i = 0; i < M; ++i) {
        double* c = C + i * N;
        if (!accumulate)
            for (size_t j = 0; j < N; ++j) c[j] = 0.0;
        const double* a = A + i * K;
        for (size_t k = 0; k < K; ++k) {
            const double av = a[k];
            const double* b = B + k * N;
            for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C (+)= A(M,K) * B(N,K)^T
inline void gemm_nt(const double* A, const double* B, double* C,
                    size_t M, size_t K, size_t N, bool accumulate) {
    for (size_t i = 0; i < M; ++i) {
        const double* a = A + i * K;
        double* c = C + i * N;
        for (size_t j = 0; j < N; ++j) {
            const double* b = B + j * K;
            double acc = accumulate ? c[j] : 0.0;
            for (size_t k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] = acc;
        }
    }
}

// C(K,N) (+)= A(M,K)^T * B(M,N)
inline void gemm_tn(const double* A, const double* B, double* C,
                    size_t M, size_t K, size_t N, bool accumulate) {
    if (!accumulate)
        for (size_t i = 0; i < K * N; ++i) C[i] = 0.0;
    for (size_t m = 0; m < M; ++m) {
        const double* a = A + m * K;
        const double* b = B + m * N;
        for (size_t k = 0; k < K; ++k) {
            const double av = a[k];
            double* c = C + k * N;
            for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

inline void add_bias(double* X, const double* bias, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        double* x = X + r * cols;
        for (size_t c = 0; c < cols; ++c) x[c] += bias[c];
    }
}

inline void bias_grad(const double* dY, double* dbias, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double* d = dY + r * cols;
        for (size_t c = 0; c < cols; ++c) dbias[c] += d[c];
    }
}

constexpr double kLayerNormEps = 1e-12;

// y = (x - mean) / sqrt(var + eps) * gamma + beta, per row.
inline void layer_norm_forward(const double* X, const double* gamma, const double* beta,
                               double* Y, double* mean, double* rstd,
                               size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double* x = X + r * cols;
        double* y = Y + r * cols;
        double mu = 0.0;
        for (size_t c = 0; c < cols; ++c) mu += x[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (size_t c = 0; c < cols; ++c) {
            const double d = x[c] - mu;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
        mean[r] = mu;
        rstd[r] = rs;
        for (size_t c = 0; c < cols; ++c) y[c] = (x[c] - mu) * rs * gamma[c] + beta[c];
    }
}

inline void layer_norm_backward(const double* dY, const double* X, const double* gamma,
                                const double* mean, const double* rstd,
                                double* dX, double* dgamma, double* dbeta,
                                size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) {
        const double* dy = dY + r * cols;
        const double* x = X + r * cols;
        double* dx = dX + r * cols;
        const double mu = mean[r];
        const double rs = rstd[r];

        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (size_t c = 0; c < cols; ++c) {
            const double xhat = (x[c] - mu) * rs;
            const double dxhat = dy[c] * gamma[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dgamma[c] += dy[c] * xhat;
            dbeta[c] += dy[c];
        }
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (size_t c = 0; c < cols; ++c) {
            const double xhat = (x[c] - mu) * rs;
            const double dxhat = dy[c] * gamma[c];
            dx[c] = rs * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
        }
    }
}

// Exact GELU: x * Phi(x).
inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double gelu_grad(double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double Phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    return Phi + x * phi;
}

inline void gelu_forward(const double* X, double* Y, size_t n) {
    for (size_t i = 0; i < n; ++i) Y[i] = gelu(X[i]);
}

inline void gelu_backward(const double* X, const double* dY, double* dX, size_t n) {
    for (size_t i = 0; i < n; ++i) dX[i] = dY[i] * gelu_grad(X[i]);
}

inline bool all_finite(const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

} // namespace lipt
