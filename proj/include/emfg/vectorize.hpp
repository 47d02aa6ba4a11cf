#pragma once

#include "emfg/types.hpp"

namespace emfg {

/// Row-stack vectorization: rvect([[a,b],[c,d]]) = (a, b, c, d).
inline Vec rvect(const Mat& b) {
    Vec out(b.size());
    Index k = 0;
    for (Index i = 0; i < b.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j) out[k++] = b(i, j);
    return out;
}

/// Column-stack vectorization: cvect([[a,b],[c,d]]) = (a, c, b, d)'.
inline Vec cvect(const Mat& b) {
    Vec out(b.size());
    Index k = 0;
    for (Index j = 0; j < b.cols(); ++j)
        for (Index i = 0; i < b.rows(); ++i) out[k++] = b(i, j);
    return out;
}

/// Inverse of rvect for a known shape.
inline Mat unrvect(const Vec& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw DimensionMismatch("unrvect: size mismatch");
    Mat out(rows, cols);
    Index k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = v[k++];
    return out;
}

/// Kronecker product.
inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace emfg
