#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace aegis {

template <typename S>
using Vec = std::vector<S>;

/// Dense row-major matrix. Deliberately minimal: the sequence kernels in this
/// project are handwritten loops and only need contiguous storage plus row
/// indexing.
template <typename S>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<S> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, S(0)) {}

    S* operator[](int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const S* operator[](int r) const { return a.data() + static_cast<size_t>(r) * cols; }
    S& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    S at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), S(0)); }

    bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

// y = M x
template <typename S>
void matvec(const Mat<S>& m, const S* x, S* y) {
    for (int r = 0; r < m.rows; ++r) {
        S acc = S(0);
        const S* row = m[r];
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

// y += M^T x  (x has m.rows entries, y has m.cols entries)
template <typename S>
void matvec_t_add(const Mat<S>& m, const S* x, S* y) {
    for (int r = 0; r < m.rows; ++r) {
        const S* row = m[r];
        const S xr = x[r];
        for (int c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
    }
}

// M += u v^T
template <typename S>
void add_outer(Mat<S>& m, const S* u, const S* v) {
    for (int r = 0; r < m.rows; ++r) {
        S* row = m[r];
        const S ur = u[r];
        for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
    }
}

template <typename S>
S dot(const S* x, const S* y, int n) {
    S acc = S(0);
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <typename S>
S norm2(const S* x, int n) {
    S acc = S(0);
    for (int i = 0; i < n; ++i) acc += x[i] * x[i];
    return std::sqrt(acc);
}

template <typename S>
bool all_finite(const S* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

} // namespace aegis
