/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/numlin.hpp
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef FAR_NUMLIN_HPP_
#define FAR_NUMLIN_HPP_

#include "far/core.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace far {

/// Thin SVD factors: q = left * singular_values.asDiagonal() * right^T.
struct SvdFactors {
    Matrix left;            ///< orthonormal columns
    Vector singular_values; ///< nonincreasing, nonnegative
    Matrix right;           ///< orthonormal columns
};

/**
 * Thin SVD with a fixed sign convention: in every left singular vector the
 * entry of largest magnitude is nonnegative (ties broken by lowest index).
 * The convention makes factors reproducible and serializable.
 */
inline SvdFactors thin_svd(const Matrix& q) {
    require(all_finite(q), "thin_svd: input contains non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(q, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    for (Index j = 0; j < f.left.cols(); ++j) {
        Index imax = 0;
        double amax = -1.0;
        for (Index i = 0; i < f.left.rows(); ++i) {
            const double a = std::abs(f.left(i, j));
            if (a > amax) {
                amax = a;
                imax = i;
            }
        }
        if (f.left(imax, j) < 0.0) {
            f.left.col(j) = -f.left.col(j);
            f.right.col(j) = -f.right.col(j);
        }
    }
    return f;
}

/// Sum of singular values; computed without the factor matrices.
inline double nuclear_norm(const Matrix& q) {
    require(all_finite(q), "nuclear_norm: input contains non-finite entries");
    return Eigen::JacobiSVD<Matrix>(q).singularValues().sum();
}

/// Element-wise soft thresholding: sgn(q) * max(|q| - tau, 0).
inline double shrink(double q, double tau) {
    require(tau >= 0.0, "shrink: negative threshold");
    const double a = std::abs(q) - tau;
    return a > 0.0 ? (q > 0.0 ? a : -a) : 0.0;
}

inline Vector shrink(const Vector& q, double tau) {
    require(tau >= 0.0, "shrink: negative threshold");
    Vector out(q.size());
    for (Index i = 0; i < q.size(); ++i) out[i] = shrink(q[i], tau);
    return out;
}

inline Matrix shrink(const Matrix& q, double tau) {
    require(tau >= 0.0, "shrink: negative threshold");
    Matrix out(q.rows(), q.cols());
    for (Index j = 0; j < q.cols(); ++j)
        for (Index i = 0; i < q.rows(); ++i) out(i, j) = shrink(q(i, j), tau);
    return out;
}

/// Singular value thresholding, the proximal operator of tau * ||.||_*.
inline Matrix svt(const Matrix& q, double tau) {
    require(tau >= 0.0, "svt: negative threshold");
    const SvdFactors f = thin_svd(q);
    const Vector s = shrink(f.singular_values, tau);
    return f.left * s.asDiagonal() * f.right.transpose();
}

struct PcaResult {
    Vector mean;
    Matrix basis;    ///< orthonormal columns, ordered by explained variance
    bool truncated;  ///< true if k exceeded the numerical rank of the data
};

/**
 * PCA of column samples (f x N). Keeps at most k components; if the data rank
 * is lower the basis is truncated and the flag is set, so the orthonormality
 * invariant holds exactly.
 */
inline PcaResult pca(const Matrix& samples, Index k) {
    const Index f = samples.rows();
    const Index n = samples.cols();
    require(n >= 2, "pca: need at least 2 samples");
    require(k >= 0 && k <= std::min(f, n), "pca: k exceeds min(f, N)");
    PcaResult r;
    r.mean = samples.rowwise().mean();
    Matrix centered = samples.colwise() - r.mean;
    const SvdFactors svd = thin_svd(centered);
    // numerical rank relative to the largest singular value
    const double sigma0 = svd.singular_values.size() ? svd.singular_values[0] : 0.0;
    Index rank = 0;
    for (Index i = 0; i < svd.singular_values.size(); ++i)
        if (svd.singular_values[i] > 1e-12 * std::max(1.0, sigma0)) ++rank;
    const Index kept = std::min(k, rank);
    r.truncated = kept < k;
    r.basis = svd.left.leftCols(kept);
    return r;
}

} // namespace far

#endif /* FAR_NUMLIN_HPP_ */
