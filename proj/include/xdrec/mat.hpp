#pragma once

#include <cassert>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace xdrec {

// Dense row-major matrix of doubles. All model math runs in double so the
// finite-difference gradient checks have headroom.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
    void zero() { std::memset(a.data(), 0, a.size() * sizeof(double)); }
    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<size_t>(r) * c, 0.0);
    }
};

// Non-owning view into a flat parameter buffer.
struct MatView {
    double* p = nullptr;
    int rows = 0;
    int cols = 0;

    double* row(int i) const { return p + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) const { return p[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return static_cast<size_t>(rows) * cols; }
};

struct ConstMatView {
    const double* p = nullptr;
    int rows = 0;
    int cols = 0;

    const double* row(int i) const { return p + static_cast<size_t>(i) * cols; }
    double at(int i, int j) const { return p[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return static_cast<size_t>(rows) * cols; }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C = A * B  (A: n x k, B: k x m). Accumulates over k in the inner loop per
// output row so the compiler can vectorize along m.
inline void matmul(const double* A, int n, int k, const double* B, int m, double* C) {
    std::memset(C, 0, static_cast<size_t>(n) * m * sizeof(double));
    for (int i = 0; i < n; ++i) {
        const double* arow = A + static_cast<size_t>(i) * k;
        double* crow = C + static_cast<size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = B + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C = A * B^T  (A: n x k, B: m x k).
inline void matmul_nt(const double* A, int n, int k, const double* B, int m, double* C) {
    for (int i = 0; i < n; ++i) {
        const double* arow = A + static_cast<size_t>(i) * k;
        double* crow = C + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) crow[j] = dot(arow, B + static_cast<size_t>(j) * k, k);
    }
}

// C += A^T * B  (A: n x k, B: n x m, C: k x m). Used for weight gradients.
inline void matmul_tn_acc(const double* A, int n, int k, const double* B, int m, double* C) {
    for (int i = 0; i < n; ++i) {
        const double* arow = A + static_cast<size_t>(i) * k;
        const double* brow = B + static_cast<size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            double* crow = C + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// Flat parameter storage with a named-tensor registry; keeps the optimizer,
// gradient mirrors, serialization and brute-force parameter sweeps trivial.
struct TensorSpec {
    std::string name;
    size_t off = 0;
    int rows = 0;
    int cols = 0;
};

struct ParamStore {
    std::vector<double> w;
    std::vector<TensorSpec> specs;

    size_t add(const std::string& name, int rows, int cols) {
        size_t off = w.size();
        specs.push_back({name, off, rows, cols});
        w.resize(off + static_cast<size_t>(rows) * cols, 0.0);
        return off;
    }
    MatView view(size_t off, int rows, int cols) {
        return MatView{w.data() + off, rows, cols};
    }
    ConstMatView view(size_t off, int rows, int cols) const {
        return ConstMatView{w.data() + off, rows, cols};
    }
    const TensorSpec* find(const std::string& name) const {
        for (const auto& s : specs)
            if (s.name == name) return &s;
        return nullptr;
    }
};

}  // namespace xdrec
