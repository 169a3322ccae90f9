/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/solver.hpp
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

#ifndef FAR_SOLVER_HPP_
#define FAR_SOLVER_HPP_

#include "far/subspace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <optional>
#include <sstream>
#include <vector>

namespace far {

struct SolverConfig {
    double lambda = 0.3;
    double rho = 1.1;
    double mu0 = 1e-6;
    double mu_max = 1e10;
    double eps1 = 1e-3;
    double eps2 = 1e-5;
    double eps3 = 1e-7;
    Index max_inner = 500;
    Index max_outer = 30;
    /// Adds the projected multiplier term a/mu to the warp-increment solve.
    /// Off by default: the plain least-squares form is used.
    bool dp_multiplier_term = false;

    void validate() const {
        require(lambda > 0, "SolverConfig: lambda must be positive");
        require(rho > 1, "SolverConfig: rho must exceed 1");
        require(mu0 > 0 && mu_max > 0, "SolverConfig: mu bounds must be positive");
        require(eps1 > 0 && eps2 > 0 && eps3 > 0, "SolverConfig: tolerances must be positive");
        require(max_inner > 0 && max_outer > 0, "SolverConfig: iteration caps must be positive");
    }
};

/// One diagnostic row per inner iteration.
struct TraceRow {
    Index outer;
    Index inner;
    double mu;
    double objective; ///< ||L||_* + lambda * ||e||_1
    double h1_rel;
    double h2_rel;
    double de_rel;
    double dL_rel;
};

struct InnerState {
    Matrix L;   ///< m x n
    Vector e;   ///< length f
    Vector c;   ///< length k
    Vector dp;  ///< length v_p
    Vector a;   ///< length f, multiplier for h1
    Matrix B;   ///< m x n, multiplier for h2
    double mu = 0.0;
    Index t = 0;
    bool converged = false;
    bool aborted = false;
    std::vector<double> objective_trace;
    std::vector<double> h1_trace;
    std::vector<double> h2_trace;
    std::vector<TraceRow> rows;
};

struct FitResult {
    WarpParams p_final;
    Matrix L;
    Vector e;
    Vector c;
    std::vector<std::uint8_t> mask; ///< warp validity at the final pose
    bool converged_inner = false;   ///< last inner run converged
    bool converged_outer = false;
    Index outer_iterations = 0;
    std::vector<double> outer_objective; ///< per outer iteration
    std::vector<TraceRow> trace;
};

/// Thrown when an inner iterate turns non-finite; carries the partial state
/// and its diagnostic trace.
struct SolverAbort : Error {
    InnerState state;
    SolverAbort(const std::string& what, InnerState s)
        : Error(what), state(std::move(s)) {}
};

/// Thrown by the warp-increment solve when the projected Gram matrix is
/// numerically singular; carries the condition estimate.
struct IllConditionedGram : Error {
    double condition;
    explicit IllConditionedGram(double cond)
        : Error("update_dp: projected Gram matrix ill-conditioned (cond ~ " +
                std::to_string(cond) + ")"),
          condition(cond) {}
};

namespace detail {

inline Matrix reshape_to(const Vector& v, Index rows, Index cols) {
    require(v.size() == rows * cols, "reshape: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Vector flatten(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

} // namespace detail

/// h1 = x + J*dp - U*c - e, the linearized data constraint residual.
inline Vector residual_h1(const Vector& x, const Matrix& jac, const Vector& dp,
                          const Matrix& u, const Vector& c, const Vector& e) {
    require(jac.rows() == x.size() && u.rows() == x.size() && e.size() == x.size(),
            "residual_h1: row dimension mismatch");
    require(jac.cols() == dp.size() && u.cols() == c.size(),
            "residual_h1: column dimension mismatch");
    return x + jac * dp - u * c - e;
}

/// h2 = L - reshape(U*c), the reconstruction consistency residual.
inline Matrix residual_h2(const Matrix& L, const Matrix& u, const Vector& c) {
    require(u.rows() == L.size(), "residual_h2: dimension mismatch");
    require(u.cols() == c.size(), "residual_h2: coefficient length mismatch");
    return L - detail::reshape_to(u * c, L.rows(), L.cols());
}

/// L-update: singular value thresholding of reshape(U*c) - B/mu at 1/mu.
inline Matrix update_L(const Matrix& u, const Vector& c, const Matrix& B, double mu) {
    require(mu > 0, "update_L: mu must be positive");
    require(u.rows() == B.size() && u.cols() == c.size(), "update_L: dimension mismatch");
    const Matrix m = detail::reshape_to(u * c, B.rows(), B.cols()) - B / mu;
    return svt(m, 1.0 / mu);
}

/// c-update, closed form of the quadratic subproblem:
/// c = (U^T a + U^T vec(B)) / (2 mu) + (U^T xhat + U^T vec(L)) / 2,
/// with xhat = x + J*dp - e.
inline Vector update_c(const Vector& x, const Matrix& jac, const Vector& dp,
                       const Vector& e, const Matrix& L, const Vector& a,
                       const Matrix& B, double mu, const Matrix& u) {
    require(mu > 0, "update_c: mu must be positive");
    require(jac.rows() == x.size() && u.rows() == x.size() && e.size() == x.size() &&
                a.size() == x.size(),
            "update_c: row dimension mismatch");
    require(jac.cols() == dp.size(), "update_c: dp length mismatch");
    require(u.rows() == L.size() && u.rows() == B.size(), "update_c: frame size mismatch");
    const Vector xhat = x + jac * dp - e;
    return (u.transpose() * (a + detail::flatten(B))) / (2.0 * mu) +
           (u.transpose() * (xhat + detail::flatten(L))) / 2.0;
}

/// Warp-increment update: dp = -(Jt~ J~)^{-1} J~^T (x - e), with J~ the
/// Jacobian projected into the orthogonal complement of span(U). The Gram
/// matrix is formed as J^T J - (U^T J)^T (U^T J).
inline Vector update_dp(const Matrix& jac, const Matrix& u, const Vector& x,
                        const Vector& e) {
    require(jac.rows() == x.size() && e.size() == x.size(), "update_dp: dimension mismatch");
    const Matrix utj = u.transpose() * jac;
    const Matrix gram = jac.transpose() * jac - utj.transpose() * utj;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& ev = eig.eigenvalues();
    const double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) throw IllConditionedGram(lo > 0.0 ? hi / lo : 1e300);
    const Vector r = x - e;
    const Vector rhs = jac.transpose() * r - utj.transpose() * (u.transpose() * r);
    return -Eigen::LDLT<Matrix>(gram).solve(rhs);
}

/// e-update: element-wise shrinkage at lambda/mu of x + J*dp - U*c + a/mu,
/// using the latest dp and c iterates.
inline Vector update_e(const Vector& x, const Matrix& jac, const Vector& dp,
                       const Matrix& u, const Vector& c, const Vector& a, double mu,
                       double lambda) {
    require(mu > 0, "update_e: mu must be positive");
    require(jac.rows() == x.size() && u.rows() == x.size() && a.size() == x.size(),
            "update_e: dimension mismatch");
    return shrink(Vector(x + jac * dp - u * c + a / mu), lambda / mu);
}

/// Dual ascent: a' = a + mu*h1, B' = B + mu*h2.
inline std::pair<Vector, Matrix> update_multipliers(const Vector& a, const Matrix& B,
                                                    double mu, const Vector& h1,
                                                    const Matrix& h2) {
    require(mu > 0, "update_multipliers: mu must be positive");
    return {a + mu * h1, B + mu * h2};
}

/**
 * Inner ADMM loop of the alignment problem: alternates the L, c, dp, e
 * closed-form updates, then dual ascent and the penalty schedule
 * mu <- min(rho*mu, mu_max). Terminates when both the iterate-change and the
 * residual criteria hold (relative to ||x||), or at max_inner.
 *
 * When freeze_dp is set the warp increment stays at zero (used by the
 * frontalization pass). The dp solve also freezes for an iteration if the
 * projected Gram matrix is ill-conditioned.
 */
inline InnerState inner_solve(const Vector& x, const std::vector<std::uint8_t>& mask,
                              const Matrix& jac, const AppearanceBasis& basis,
                              const SolverConfig& cfg, Index outer_index = 0,
                              bool freeze_dp = false) {
    cfg.validate();
    const Index f = x.size();
    require(Index(mask.size()) == f, "inner_solve: mask length mismatch");
    require(basis.u.rows() == f, "inner_solve: basis frame mismatch");
    require(jac.rows() == f, "inner_solve: Jacobian row mismatch");
    const double xnorm = x.norm();
    require(xnorm > 0, "inner_solve: zero input texture");
    const Index rows = basis.frame.rows, cols = basis.frame.cols;

    InnerState s;
    s.L = Matrix::Zero(rows, cols);
    s.e = Vector::Zero(f);
    s.c = Vector::Zero(basis.k);
    s.dp = Vector::Zero(jac.cols());
    s.a = Vector::Zero(f);
    s.B = Matrix::Zero(rows, cols);
    s.mu = cfg.mu0;

    for (s.t = 0; s.t < cfg.max_inner; ++s.t) {
        const Matrix L_prev = s.L;
        const Vector e_prev = s.e;

        s.L = update_L(basis.u, s.c, s.B, s.mu);
        s.c = update_c(x, jac, s.dp, s.e, s.L, s.a, s.B, s.mu, basis.u);
        if (!freeze_dp) {
            try {
                s.dp = update_dp(jac, basis.u, x, s.e);
            } catch (const IllConditionedGram&) {
                // keep the previous increment for this iteration
            }
        }
        s.e = update_e(x, jac, s.dp, basis.u, s.c, s.a, s.mu, cfg.lambda);

        const Vector h1 = residual_h1(x, jac, s.dp, basis.u, s.c, s.e);
        const Matrix h2 = residual_h2(s.L, basis.u, s.c);
        std::tie(s.a, s.B) = update_multipliers(s.a, s.B, s.mu, h1, h2);
        const double mu_used = s.mu;
        s.mu = std::min(cfg.rho * s.mu, cfg.mu_max);

        const double h1_rel = h1.norm() / xnorm;
        const double h2_rel = h2.norm() / xnorm;
        const double de_rel = (s.e - e_prev).norm() / xnorm;
        const double dL_rel = (s.L - L_prev).norm() / xnorm;
        const double objective =
            nuclear_norm(s.L) + cfg.lambda * s.e.lpNorm<1>();

        s.objective_trace.push_back(objective);
        s.h1_trace.push_back(h1_rel);
        s.h2_trace.push_back(h2_rel);
        s.rows.push_back({outer_index, s.t, mu_used, objective, h1_rel, h2_rel, de_rel, dL_rel});

        if (!s.L.allFinite() || !s.e.allFinite() || !s.c.allFinite() || !s.dp.allFinite()) {
            s.aborted = true;
            ++s.t;
            break;
        }
        if (std::max(de_rel, dL_rel) <= cfg.eps2 && std::max(h1_rel, h2_rel) <= cfg.eps3) {
            s.converged = true;
            ++s.t;
            break;
        }
    }
    if (s.aborted)
        throw SolverAbort("inner_solve: non-finite iterate at t=" + std::to_string(s.t), s);
    return s;
}

/**
 * Outer alignment loop: warp and normalize the image at the current
 * parameters, rebuild the steepest-descent Jacobian, run the inner solve, and
 * apply p <- p + dp. Stops when the objective ||L||_* + lambda*||e||_1
 * changes by less than eps1 (relative, with max(1, .) scaling) between
 * successive outer iterations.
 */
inline FitResult fit(const Matrix& image, const Shape& init_shape, const ShapeModel& model,
                     const Triangulation& tri, const AppearanceBasis& basis,
                     const SolverConfig& cfg, const WarpField* field_in = nullptr) {
    cfg.validate();
    require(basis.frame.rows == model.frame.rows && basis.frame.cols == model.frame.cols,
            "fit: basis and model frame mismatch");
    WarpField local_field;
    if (!field_in) {
        local_field = build_warp_field(model.mean_shape, tri, model.frame);
        field_in = &local_field;
    }
    const WarpField& field = *field_in;

    WarpParams p = params_from_shape(model, init_shape);
    require(p.p.allFinite(), "fit: initial shape projects to non-finite parameters");

    FitResult result;
    double phi_prev = 0.0;
    for (Index outer = 0; outer < cfg.max_outer; ++outer) {
        const Shape shape = shape_from_params(model, p);
        const WarpedTexture w = warp_texture(image, shape, model, tri, field);
        const Matrix jac = steepest_descent_images(image, shape, model, tri, field);
        const InnerState inner = inner_solve(w.x, w.mask, jac, basis, cfg, outer);

        p.p += inner.dp;
        result.outer_iterations = outer + 1;
        result.converged_inner = inner.converged;
        result.L = inner.L;
        result.e = inner.e;
        result.c = inner.c;
        result.mask = w.mask;
        result.trace.insert(result.trace.end(), inner.rows.begin(), inner.rows.end());
        const double phi =
            nuclear_norm(inner.L) + cfg.lambda * inner.e.lpNorm<1>();
        result.outer_objective.push_back(phi);
        if (outer > 0 && std::abs(phi - phi_prev) < cfg.eps1 * std::max(1.0, phi_prev)) {
            result.converged_outer = true;
            break;
        }
        phi_prev = phi;
    }
    result.p_final = p;
    return result;
}

struct FrontalResult {
    Matrix frontal;   ///< final low-rank texture cropped to the unmasked bounding box
    Index crop_row0 = 0;
    Index crop_col0 = 0;
    FitResult fit;
};

/**
 * Frontalization: runs the full fit, then one extra outer pass with the warp
 * increment frozen, and crops the reconstructed low-rank texture to the
 * bounding box of unmasked pixels.
 */
inline FrontalResult frontalize(const Matrix& image, const Shape& init_shape,
                                const ShapeModel& model, const Triangulation& tri,
                                const AppearanceBasis& basis, const SolverConfig& cfg) {
    const WarpField field = build_warp_field(model.mean_shape, tri, model.frame);
    FrontalResult out;
    out.fit = fit(image, init_shape, model, tri, basis, cfg, &field);

    const Shape shape = shape_from_params(model, out.fit.p_final);
    const WarpedTexture w = warp_texture(image, shape, model, tri, field);
    const Matrix jac = steepest_descent_images(image, shape, model, tri, field);
    const InnerState inner = inner_solve(w.x, w.mask, jac, basis, cfg,
                                         out.fit.outer_iterations, /*freeze_dp=*/true);
    out.fit.L = inner.L;
    out.fit.e = inner.e;
    out.fit.c = inner.c;
    out.fit.mask = w.mask;
    out.fit.converged_inner = inner.converged;
    out.fit.trace.insert(out.fit.trace.end(), inner.rows.begin(), inner.rows.end());

    // crop to the bounding box of unmasked pixels
    const Index rows = basis.frame.rows, cols = basis.frame.cols;
    Index r0 = rows, r1 = -1, c0 = cols, c1 = -1;
    for (Index x = 0; x < cols; ++x)
        for (Index y = 0; y < rows; ++y)
            if (w.mask[std::size_t(pixel_index(basis.frame, x, y))]) {
                r0 = std::min(r0, y);
                r1 = std::max(r1, y);
                c0 = std::min(c0, x);
                c1 = std::max(c1, x);
            }
    require(r1 >= r0 && c1 >= c0, "frontalize: empty mask");
    out.frontal = inner.L.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1);
    out.crop_row0 = r0;
    out.crop_col0 = c0;
    return out;
}

/// Diagnostic trace in CSV form (one row per inner iteration).
inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "outer,inner,mu,objective,h1_rel,h2_rel,de_rel,dL_rel\n";
    out.precision(17);
    for (const TraceRow& r : trace)
        out << r.outer << ',' << r.inner << ',' << r.mu << ',' << r.objective << ','
            << r.h1_rel << ',' << r.h2_rel << ',' << r.de_rel << ',' << r.dL_rel << '\n';
    return out.str();
}

} // namespace far

#endif /* FAR_SOLVER_HPP_ */
