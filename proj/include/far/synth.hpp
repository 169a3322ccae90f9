/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/synth.hpp
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

#ifndef FAR_SYNTH_HPP_
#define FAR_SYNTH_HPP_

#include "far/solver.hpp"

#include <vector>

namespace far {

namespace detail {

/// Separable Gaussian blur with replicated borders.
inline Matrix gaussian_blur(const Matrix& in, double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    Vector kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
    kernel /= kernel.sum();
    const Index rows = in.rows(), cols = in.cols();
    Matrix tmp(rows, cols), out(rows, cols);
    for (Index y = 0; y < rows; ++y)
        for (Index x = 0; x < cols; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * in(y, clamp_index(x + i, cols));
            tmp(y, x) = acc;
        }
    for (Index y = 0; y < rows; ++y)
        for (Index x = 0; x < cols; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp(clamp_index(y + i, rows), x);
            out(y, x) = acc;
        }
    return out;
}

/// Fixed bilaterally symmetric base pattern, values within [0.25, 0.75].
inline Matrix symmetric_mean_pattern(FrameDims frame) {
    const double cx = (frame.cols - 1) / 2.0;
    const double cy = (frame.rows - 1) / 2.0;
    const double s = std::min(double(frame.rows), double(frame.cols));
    Matrix m(frame.rows, frame.cols);
    for (Index y = 0; y < frame.rows; ++y)
        for (Index x = 0; x < frame.cols; ++x) {
            const double dx = std::abs(double(x) - cx) / s;
            const double dy = (double(y) - cy) / s;
            double v = 0.5;
            v += 0.15 * std::exp(-((dx - 0.22) * (dx - 0.22) + (dy + 0.15) * (dy + 0.15)) / 0.01);
            v -= 0.12 * std::exp(-(dx * dx + (dy - 0.2) * (dy - 0.2)) / 0.02);
            v += 0.10 * std::cos(6.0 * dy) * std::exp(-dx * dx / 0.08);
            m(y, x) = std::min(0.75, std::max(0.25, v));
        }
    return m;
}

} // namespace detail

/**
 * Band-limited random textures: each is the fixed symmetric base pattern plus
 * a random combination of `subspace_dim` smooth latent components. Amplitudes
 * are bounded so the values stay inside [0, 1] without clipping, keeping the
 * texture matrix rank exactly subspace_dim + 1.
 */
inline std::vector<Matrix> gen_textures(std::uint64_t seed, FrameDims frame, Index count,
                                        Index subspace_dim) {
    require(subspace_dim >= 1 && subspace_dim <= count,
            "gen_textures: subspace_dim must be in [1, count]");
    Rng rng(seed);
    const Matrix mean = detail::symmetric_mean_pattern(frame);
    const double sigma = std::min(double(frame.rows), double(frame.cols)) / 10.0;
    std::vector<Matrix> components;
    components.reserve(std::size_t(subspace_dim));
    for (Index d = 0; d < subspace_dim; ++d) {
        Matrix noise(frame.rows, frame.cols);
        for (Index y = 0; y < frame.rows; ++y)
            for (Index x = 0; x < frame.cols; ++x) noise(y, x) = rng.gaussian();
        Matrix comp = detail::gaussian_blur(noise, sigma);
        comp /= comp.cwiseAbs().maxCoeff();
        components.push_back(comp);
    }
    const double amp = 0.25 / double(subspace_dim);
    std::vector<Matrix> out;
    out.reserve(std::size_t(count));
    for (Index i = 0; i < count; ++i) {
        Matrix t = mean;
        for (Index d = 0; d < subspace_dim; ++d)
            t += rng.uniform(-amp, amp) * components[std::size_t(d)];
        out.push_back(t.cwiseMax(0.0).cwiseMin(1.0));
    }
    return out;
}

/// Canonical symmetric face-like landmark layout: 12 boundary points on an
/// ellipse plus 6 interior points (eyes, nose, mouth).
inline Shape canonical_landmarks() {
    Shape s;
    for (int i = 0; i < 12; ++i) {
        const double th = 2.0 * M_PI * double(i) / 12.0;
        s.points.push_back({std::cos(th), 1.25 * std::sin(th)});
    }
    s.points.push_back({-0.45, -0.35}); // left eye
    s.points.push_back({0.45, -0.35});  // right eye
    s.points.push_back({0.0, 0.05});    // nose
    s.points.push_back({-0.35, 0.55});  // mouth corners
    s.points.push_back({0.35, 0.55});
    s.points.push_back({0.0, 0.72});    // lower lip
    return s;
}

/// Training shapes for the statistical shape model: the canonical layout
/// deformed by a few smooth modes plus small jitter and a random similarity.
inline std::vector<Shape> gen_training_shapes(std::uint64_t seed, Index count) {
    Rng rng(seed);
    const Shape base = canonical_landmarks();
    std::vector<Shape> shapes;
    shapes.reserve(std::size_t(count));
    for (Index n = 0; n < count; ++n) {
        const double width = rng.uniform(-0.08, 0.08);     // face width
        const double eyes = rng.uniform(-0.05, 0.05);      // eye distance
        const double mouth = rng.uniform(-0.06, 0.06);     // mouth height
        Shape s = base;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            auto& p = s.points[i];
            p.x() *= 1.0 + width;
            if (i == 12 || i == 13) p.x() *= 1.0 + eyes;
            if (i >= 15) p.y() += mouth;
            p.x() += 0.01 * rng.gaussian();
            p.y() += 0.01 * rng.gaussian();
        }
        // random similarity; removed again by Procrustes during model building
        const double th = rng.uniform(-0.3, 0.3);
        const double sc = std::exp(rng.uniform(-0.2, 0.2));
        const Eigen::Vector2d t{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (auto& p : s.points) {
            const Eigen::Vector2d q = p;
            p.x() = sc * (std::cos(th) * q.x() - std::sin(th) * q.y()) + t.x();
            p.y() = sc * (std::sin(th) * q.x() + std::cos(th) * q.y()) + t.y();
        }
        shapes.push_back(s);
    }
    return shapes;
}

/// A synthetic fitting instance with full ground truth.
struct SynthInstance {
    Matrix image;
    Shape gt_shape;
    WarpParams gt_params;
    Vector gt_coeffs;
    std::vector<Index> gt_error_support; ///< pixel indices, idx = x*rows + y
    std::uint64_t seed = 0;
};

/**
 * Draws in-span appearance coefficients, renders the clean texture under a
 * ground-truth similarity perturbation of the mean shape, and corrupts a
 * random pixel subset with spikes of +-spike_mag. All ground truth is
 * recorded; regeneration from the same arguments is bit-exact.
 */
inline SynthInstance gen_instance(const AppearanceBasis& basis, const ShapeModel& model,
                                  const Triangulation& tri, std::uint64_t seed,
                                  Eigen::Vector2d translation_px, double rotation_deg,
                                  double scale_pct, double sparsity, double spike_mag) {
    require(sparsity >= 0.0 && sparsity < 1.0, "gen_instance: sparsity must be in [0, 1)");
    SynthInstance inst;
    inst.seed = seed;

    // in-span coefficients from a generated texture projected onto the basis
    const Matrix tex = gen_textures(seed, basis.frame, 1, std::min<Index>(8, basis.k))[0];
    inst.gt_coeffs = basis.u.transpose() * detail::flatten(tex);
    const Matrix clean =
        detail::reshape_to(basis.u * inst.gt_coeffs, basis.frame.rows, basis.frame.cols);

    // ground-truth similarity perturbation of the mean shape
    const double th = rotation_deg * M_PI / 180.0;
    const double sc = 1.0 + scale_pct / 100.0;
    const Eigen::Vector2d center{(model.frame.cols - 1) / 2.0, (model.frame.rows - 1) / 2.0};
    Shape target;
    target.points.reserve(model.mean_shape.points.size());
    for (const auto& p : model.mean_shape.points) {
        const Eigen::Vector2d d = p - center;
        target.points.push_back(
            center + translation_px +
            sc * Eigen::Vector2d{std::cos(th) * d.x() - std::sin(th) * d.y(),
                                 std::sin(th) * d.x() + std::cos(th) * d.y()});
    }
    inst.gt_params = params_from_shape(model, target);
    inst.gt_shape = shape_from_params(model, inst.gt_params);

    inst.image = render_texture(clean, model, tri, inst.gt_shape, model.frame.rows,
                                model.frame.cols);

    const Index f = model.frame.pixels();
    const Index spikes = Index(sparsity * double(f));
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::uint8_t> used(std::size_t(f), 0);
    for (Index n = 0; n < spikes; ++n) {
        Index idx;
        do {
            idx = Index(rng.below(std::uint64_t(f)));
        } while (used[std::size_t(idx)]);
        used[std::size_t(idx)] = 1;
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const Index x = idx / model.frame.rows;
        const Index y = idx % model.frame.rows;
        inst.image(y, x) += sign * spike_mag;
        inst.gt_error_support.push_back(idx);
    }
    std::sort(inst.gt_error_support.begin(), inst.gt_error_support.end());
    return inst;
}

/**
 * Brute-force proximal-minimizer check: true iff the candidate's proximal
 * objective is no larger than that of every random perturbation at the given
 * radius. Verifies SVT and shrinkage outputs independently of their
 * closed forms.
 */
enum class ProxKind { nuclear, l1 };

inline bool prox_objective_oracle(ProxKind kind, const Matrix& candidate, const Matrix& q,
                                  double tau, Index perturbations, double radius,
                                  std::uint64_t seed = 12345) {
    require(radius > 0.0, "prox_objective_oracle: radius must be positive");
    auto objective = [&](const Matrix& m) {
        const double fit = 0.5 * (m - q).squaredNorm();
        if (kind == ProxKind::nuclear)
            return tau * nuclear_norm(m) + fit;
        return tau * m.cwiseAbs().sum() + fit;
    };
    const double base = objective(candidate);
    Rng rng(seed);
    Matrix dir(candidate.rows(), candidate.cols());
    for (Index n = 0; n < perturbations; ++n) {
        for (Index j = 0; j < dir.cols(); ++j)
            for (Index i = 0; i < dir.rows(); ++i) dir(i, j) = rng.gaussian();
        dir *= radius / dir.norm();
        if (objective(candidate + dir) < base) return false;
    }
    return true;
}

/// Everything the synthetic pipeline needs, derived from one seed.
struct SynthWorld {
    ShapeModel model;
    Triangulation tri;
    WarpField field;
    AppearanceBasis basis;
};

/// Builds shape model, triangulation, and appearance basis from seeded
/// synthetic training data on the given frame.
inline SynthWorld make_synth_world(std::uint64_t seed, FrameDims frame, Index k,
                                   Index n_shapes = 24, Index n_textures = 40,
                                   Index latent_dim = 8, Index n_s = 4) {
    SynthWorld w;
    w.model = build_shape_model(gen_training_shapes(seed, n_shapes), n_s, frame);
    w.tri = delaunay(w.model.mean_shape);
    w.field = build_warp_field(w.model.mean_shape, w.tri, frame);
    const std::vector<Matrix> textures = gen_textures(seed + 1, frame, n_textures, latent_dim);
    std::vector<TrainingPair> pairs;
    pairs.reserve(textures.size());
    for (const Matrix& t : textures) pairs.push_back({t, w.model.mean_shape});
    w.basis = build_basis(pairs, w.model, w.tri, k);
    return w;
}

} // namespace far

#endif /* FAR_SYNTH_HPP_ */
