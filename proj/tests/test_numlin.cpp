/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: tests/test_numlin.cpp
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
#include "far/numlin.hpp"
#include "far/synth.hpp"

#include "doctest.h"

#include <algorithm>
#include <vector>

namespace {

far::Matrix random_matrix(far::Rng& rng, far::Index rows, far::Index cols) {
    far::Matrix m(rows, cols);
    for (far::Index j = 0; j < cols; ++j)
        for (far::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
    return m;
}

// Independent singular-value oracle: one-sided Jacobi rotations applied to the
// columns of a working copy until all pairs are orthogonal; the singular values
// are the final column norms. No shared code with thin_svd.
std::vector<double> jacobi_singular_values(far::Matrix a) {
    const far::Index n = a.cols();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (far::Index p = 0; p < n - 1; ++p) {
            for (far::Index q = p + 1; q < n; ++q) {
                const double apq = a.col(p).dot(a.col(q));
                const double app = a.col(p).squaredNorm();
                const double aqq = a.col(q).squaredNorm();
                off = std::max(off, std::abs(apq) / std::max(1e-300, std::sqrt(app * aqq)));
                if (std::abs(apq) < 1e-15 * std::sqrt(app * aqq)) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                const far::Vector cp = a.col(p), cq = a.col(q);
                a.col(p) = c * cp - s * cq;
                a.col(q) = s * cp + c * cq;
            }
        }
        if (off < 1e-14) break;
    }
    std::vector<double> sv;
    for (far::Index j = 0; j < n; ++j) sv.push_back(a.col(j).norm());
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

} // namespace

TEST_CASE("thin_svd reconstructs and orders singular values") {
    far::Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const far::Matrix q = random_matrix(rng, 12, 8);
        const far::SvdFactors f = far::thin_svd(q);
        const far::Matrix rec =
            f.left * f.singular_values.asDiagonal() * f.right.transpose();
        CHECK((rec - q).norm() < 1e-10 * q.norm());
        for (far::Index i = 1; i < f.singular_values.size(); ++i)
            CHECK(f.singular_values[i] <= f.singular_values[i - 1] + 1e-14);
        CHECK(f.singular_values.minCoeff() >= 0.0);
        // orthonormal factors
        CHECK((f.left.transpose() * f.left -
               far::Matrix::Identity(f.left.cols(), f.left.cols()))
                  .norm() < 1e-10);
        CHECK((f.right.transpose() * f.right -
               far::Matrix::Identity(f.right.cols(), f.right.cols()))
                  .norm() < 1e-10);
    }
}

TEST_CASE("thin_svd singular values match the Jacobi-rotation oracle") {
    far::Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const far::Matrix q = random_matrix(rng, 15, 6);
        const far::Vector sv = far::thin_svd(q).singular_values;
        const std::vector<double> oracle = jacobi_singular_values(q);
        REQUIRE(sv.size() == far::Index(oracle.size()));
        for (far::Index i = 0; i < sv.size(); ++i)
            CHECK(std::abs(sv[i] - oracle[std::size_t(i)]) < 1e-9 * std::max(1.0, oracle[0]));
    }
}

TEST_CASE("thin_svd sign convention is deterministic and reconstruction-safe") {
    far::Rng rng(13);
    const far::Matrix q = random_matrix(rng, 10, 10);
    const far::SvdFactors f1 = far::thin_svd(q);
    const far::SvdFactors f2 = far::thin_svd(q);
    CHECK((f1.left - f2.left).norm() == 0.0);
    CHECK((f1.right - f2.right).norm() == 0.0);
    for (far::Index j = 0; j < f1.left.cols(); ++j) {
        far::Index imax = 0;
        for (far::Index i = 0; i < f1.left.rows(); ++i)
            if (std::abs(f1.left(i, j)) > std::abs(f1.left(imax, j))) imax = i;
        CHECK(f1.left(imax, j) >= 0.0);
    }
}

TEST_CASE("thin_svd rejects non-finite input") {
    far::Matrix q = far::Matrix::Zero(3, 3);
    q(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(far::thin_svd(q), far::Error);
}

TEST_CASE("shrink matches the sign * max(|q| - tau, 0) definition") {
    CHECK(far::shrink(3.0, 1.0) == doctest::Approx(2.0));
    CHECK(far::shrink(-3.0, 1.0) == doctest::Approx(-2.0));
    CHECK(far::shrink(0.5, 1.0) == 0.0);
    CHECK(far::shrink(-0.5, 1.0) == 0.0);
    CHECK(far::shrink(1.0, 1.0) == 0.0);
    CHECK(far::shrink(2.5, 0.0) == doctest::Approx(2.5));
    CHECK_THROWS_AS(far::shrink(1.0, -0.1), far::Error);
}

TEST_CASE("shrink solves the scalar proximal problem (grid oracle)") {
    // argmin_z tau*|z| + 0.5*(z - q)^2 over a fine grid
    for (double q : {-2.7, -1.0, -0.3, 0.0, 0.4, 1.0, 3.2}) {
        for (double tau : {0.0, 0.25, 1.0, 2.0}) {
            double best = 0.0, best_obj = 1e300;
            for (double z = -5.0; z <= 5.0; z += 1e-4) {
                const double obj = tau * std::abs(z) + 0.5 * (z - q) * (z - q);
                if (obj < best_obj) {
                    best_obj = obj;
                    best = z;
                }
            }
            CHECK(far::shrink(q, tau) == doctest::Approx(best).epsilon(1e-3));
        }
    }
}

TEST_CASE("shrink is nonexpansive (property)") {
    far::Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const double tau = rng.uniform(0.0, 2.0);
        const double a = rng.uniform(-5.0, 5.0);
        const double b = rng.uniform(-5.0, 5.0);
        CHECK(std::abs(far::shrink(a, tau) - far::shrink(b, tau)) <=
              std::abs(a - b) + 1e-12);
    }
}

TEST_CASE("svt minimizes the nuclear proximal objective (sampling oracle)") {
    far::Rng rng(19);
    for (int trial = 0; trial < 3; ++trial) {
        const far::Matrix q = random_matrix(rng, 6, 5);
        for (double tau : {0.1, 1.0, 3.0}) {
            const far::Matrix candidate = far::svt(q, tau);
            CHECK(far::prox_objective_oracle(far::ProxKind::nuclear, candidate, q, tau, 200,
                                             1e-3, 101 + std::uint64_t(trial)));
            CHECK(far::prox_objective_oracle(far::ProxKind::nuclear, candidate, q, tau, 200,
                                             0.5, 202 + std::uint64_t(trial)));
        }
    }
}

TEST_CASE("element-wise shrink minimizes the l1 proximal objective (sampling oracle)") {
    far::Rng rng(23);
    const far::Matrix q = random_matrix(rng, 6, 5);
    for (double tau : {0.1, 1.0}) {
        const far::Matrix candidate = far::shrink(q, tau);
        CHECK(far::prox_objective_oracle(far::ProxKind::l1, candidate, q, tau, 200, 1e-3));
        CHECK(far::prox_objective_oracle(far::ProxKind::l1, candidate, q, tau, 200, 0.5));
    }
}

TEST_CASE("svt is nonexpansive in Frobenius norm (property)") {
    far::Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const far::Matrix a = random_matrix(rng, 7, 4);
        const far::Matrix b = random_matrix(rng, 7, 4);
        const double tau = rng.uniform(0.0, 2.0);
        CHECK((far::svt(a, tau) - far::svt(b, tau)).norm() <= (a - b).norm() + 1e-10);
    }
}

TEST_CASE("svt thresholds a known diagonal exactly") {
    far::Matrix q = far::Matrix::Zero(4, 4);
    q(0, 0) = 5.0;
    q(1, 1) = 2.0;
    q(2, 2) = 0.5;
    const far::Matrix out = far::svt(q, 1.0);
    CHECK(out(0, 0) == doctest::Approx(4.0));
    CHECK(out(1, 1) == doctest::Approx(1.0));
    CHECK(std::abs(out(2, 2)) < 1e-12);
    CHECK(std::abs(out(3, 3)) < 1e-12);
}

TEST_CASE("pca matches the covariance eigendecomposition oracle") {
    far::Rng rng(31);
    const far::Index f = 20, n = 12, k = 5;
    const far::Matrix samples = random_matrix(rng, f, n);
    const far::PcaResult r = far::pca(samples, k);

    // oracle: eigenvectors of the scatter matrix of the centered samples
    const far::Vector mean = samples.rowwise().mean();
    const far::Matrix centered = samples.colwise() - mean;
    const far::Matrix scatter = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<far::Matrix> eig(scatter);

    CHECK((r.mean - mean).norm() < 1e-12);
    CHECK(r.basis.cols() == k);
    CHECK_FALSE(r.truncated);
    CHECK((r.basis.transpose() * r.basis - far::Matrix::Identity(k, k)).norm() < 1e-10);
    for (far::Index j = 0; j < k; ++j) {
        // j-th component spans the (f-1-j)-th eigenvector, up to sign
        const far::Vector expect = eig.eigenvectors().col(f - 1 - j);
        const double dot = std::abs(expect.dot(r.basis.col(j)));
        CHECK(dot == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("pca truncates at the numerical rank and reports it") {
    far::Rng rng(37);
    // rank-2 data: every sample is a combination of two fixed directions
    const far::Matrix dirs = random_matrix(rng, 30, 2);
    far::Matrix samples(30, 10);
    for (far::Index j = 0; j < 10; ++j)
        samples.col(j) = dirs * far::Vector{{rng.gaussian(), rng.gaussian()}};
    const far::PcaResult r = far::pca(samples, 6);
    CHECK(r.truncated);
    CHECK(r.basis.cols() <= 2);
    CHECK((r.basis.transpose() * r.basis -
           far::Matrix::Identity(r.basis.cols(), r.basis.cols()))
              .norm() < 1e-10);
}

TEST_CASE("pca input validation") {
    CHECK_THROWS_AS(far::pca(far::Matrix::Zero(4, 1), 1), far::Error);
    CHECK_THROWS_AS(far::pca(far::Matrix::Zero(4, 3), 5), far::Error);
    CHECK_THROWS_AS(far::pca(far::Matrix::Zero(4, 3), -1), far::Error);
}

TEST_CASE("rng streams are deterministic and distribution sanity holds") {
    far::Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    far::Rng c(99);
    double mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mean += u;
    }
    CHECK(mean / n == doctest::Approx(0.5).epsilon(0.02));
    far::Rng d(7);
    double gsum = 0.0, gsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = d.gaussian();
        gsum += g;
        gsq += g * g;
    }
    CHECK(std::abs(gsum / n) < 0.05);
    CHECK(gsq / n == doctest::Approx(1.0).epsilon(0.05));
    far::Rng e(5);
    for (int i = 0; i < 1000; ++i) CHECK(e.below(7) < 7);
}
