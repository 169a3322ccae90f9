/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/warp.hpp
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

#ifndef FAR_WARP_HPP_
#define FAR_WARP_HPP_

#include "far/triangulation.hpp"

#include <cstdint>
#include <vector>

namespace far {

namespace detail {

/// Catmull-Rom weights for the 4-tap stencil at fractional offset t in [0, 1).
inline void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

inline void catmull_rom_dweights(double t, double w[4]) {
    const double t2 = t * t;
    w[0] = -1.5 * t2 + 2.0 * t - 0.5;
    w[1] = 4.5 * t2 - 5.0 * t;
    w[2] = -4.5 * t2 + 4.0 * t + 0.5;
    w[3] = 1.5 * t2 - t;
}

inline Index clamp_index(Index i, Index n) { return std::min(std::max(i, Index(0)), n - 1); }

} // namespace detail

/**
 * C1 image sampler at a continuous position (x, y), with value and analytic
 * gradient. Catmull-Rom interpolation reproduces grid values exactly and its
 * continuous gradient is what makes the steepest-descent images agree with
 * finite differences of the sampled warp.
 */
struct SampledPoint {
    double value;
    double dx;
    double dy;
};

inline SampledPoint sample_image(const Matrix& image, double x, double y) {
    const Index rows = image.rows(), cols = image.cols();
    const Index ix = Index(std::floor(x));
    const Index iy = Index(std::floor(y));
    const double tx = x - double(ix);
    const double ty = y - double(iy);
    double wx[4], wy[4], dwx[4], dwy[4];
    detail::catmull_rom_weights(tx, wx);
    detail::catmull_rom_weights(ty, wy);
    detail::catmull_rom_dweights(tx, dwx);
    detail::catmull_rom_dweights(ty, dwy);
    double v = 0.0, gx = 0.0, gy = 0.0;
    for (int j = 0; j < 4; ++j) {
        const Index yy = detail::clamp_index(iy - 1 + j, rows);
        double row_v = 0.0, row_d = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Index xx = detail::clamp_index(ix - 1 + i, cols);
            const double f = image(yy, xx);
            row_v += wx[i] * f;
            row_d += dwx[i] * f;
        }
        v += wy[j] * row_v;
        gx += wy[j] * row_d;
        gy += dwy[j] * row_v;
    }
    return {v, gx, gy};
}

/// Min-max scaling to [0, 1]; a (near-)constant image maps to zeros.
inline Matrix normalize_intensity(const Matrix& image) {
    require(all_finite(image), "normalize_intensity: non-finite input");
    const double lo = image.minCoeff();
    const double hi = image.maxCoeff();
    if (hi - lo < 1e-12) return Matrix::Zero(image.rows(), image.cols());
    return (image.array() - lo) / (hi - lo);
}

/// Warped shape-free texture plus its validity mask (length f each).
struct WarpedTexture {
    Vector x;                   ///< masked pixels are zero
    std::vector<std::uint8_t> mask;
};

/**
 * Piecewise-affine warp of `image` into the reference frame: each unmasked
 * frame pixel is mapped through its triangle's affine map (mean_shape ->
 * src_shape) and sampled from the min-max normalized image. Pixels outside
 * the shape hull or sampling outside the image are masked and set to zero.
 */
inline WarpedTexture warp_texture(const Matrix& image, const Shape& src_shape,
                                  const ShapeModel& model, const Triangulation& tri,
                                  const WarpField& field) {
    require(src_shape.size() == model.num_points(), "warp_texture: point count mismatch");
    require(all_finite(image), "warp_texture: non-finite image");
    const Matrix norm = normalize_intensity(image);
    const Index f = field.pixels();
    WarpedTexture out;
    out.x = Vector::Zero(f);
    out.mask.assign(std::size_t(f), 0);
    for (Index i = 0; i < f; ++i) {
        if (!field.valid(i)) continue;
        const auto& tr = tri.triangles[std::size_t(field.triangle[std::size_t(i)])];
        const Eigen::Vector3d& b = field.bary[std::size_t(i)];
        const Eigen::Vector2d s = b[0] * src_shape.points[tr[0]] +
                                  b[1] * src_shape.points[tr[1]] +
                                  b[2] * src_shape.points[tr[2]];
        if (s.x() < 0.0 || s.x() > double(image.cols() - 1) || s.y() < 0.0 ||
            s.y() > double(image.rows() - 1))
            continue; // source outside the image: masked
        out.x[i] = sample_image(norm, s.x(), s.y()).value;
        out.mask[std::size_t(i)] = 1;
    }
    return out;
}

inline WarpedTexture warp_texture(const Matrix& image, const Shape& src_shape,
                                  const ShapeModel& model, const Triangulation& tri) {
    return warp_texture(image, src_shape, model, tri,
                        build_warp_field(model.mean_shape, tri, model.frame));
}

/// Central-difference gradients with replicated borders, intensity per pixel.
inline std::pair<Matrix, Matrix> image_gradients(const Matrix& image) {
    require(all_finite(image), "image_gradients: non-finite input");
    const Index rows = image.rows(), cols = image.cols();
    Matrix gx(rows, cols), gy(rows, cols);
    for (Index y = 0; y < rows; ++y) {
        for (Index x = 0; x < cols; ++x) {
            const Index xl = detail::clamp_index(x - 1, cols);
            const Index xr = detail::clamp_index(x + 1, cols);
            const Index yu = detail::clamp_index(y - 1, rows);
            const Index yd = detail::clamp_index(y + 1, rows);
            gx(y, x) = (image(y, xr) - image(y, xl)) / 2.0;
            gy(y, x) = (image(yd, x) - image(yu, x)) / 2.0;
        }
    }
    return {gx, gy};
}

/**
 * Steepest-descent images J (f x v_p): the exact derivative of the warped
 * texture with respect to the warp parameters at the current shape. Column j
 * is the sampled image gradient at the source point dotted with the
 * barycentric interpolation of the shape-basis displacement for direction j.
 * Masked pixels contribute zero rows.
 */
inline Matrix steepest_descent_images(const Matrix& image, const Shape& src_shape,
                                      const ShapeModel& model, const Triangulation& tri,
                                      const WarpField& field) {
    require(src_shape.size() == model.num_points(),
            "steepest_descent_images: point count mismatch");
    const Matrix norm = normalize_intensity(image);
    const Index f = field.pixels();
    const Index vp = model.num_params();
    Matrix jac = Matrix::Zero(f, vp);
    for (Index i = 0; i < f; ++i) {
        if (!field.valid(i)) continue;
        const auto& tr = tri.triangles[std::size_t(field.triangle[std::size_t(i)])];
        const Eigen::Vector3d& b = field.bary[std::size_t(i)];
        const Eigen::Vector2d s = b[0] * src_shape.points[tr[0]] +
                                  b[1] * src_shape.points[tr[1]] +
                                  b[2] * src_shape.points[tr[2]];
        if (s.x() < 0.0 || s.x() > double(image.cols() - 1) || s.y() < 0.0 ||
            s.y() > double(image.rows() - 1))
            continue;
        const SampledPoint g = sample_image(norm, s.x(), s.y());
        for (Index j = 0; j < vp; ++j) {
            double dwx = 0.0, dwy = 0.0;
            for (int vtx = 0; vtx < 3; ++vtx) {
                dwx += b[vtx] * model.basis(2 * tr[std::size_t(vtx)], j);
                dwy += b[vtx] * model.basis(2 * tr[std::size_t(vtx)] + 1, j);
            }
            jac(i, j) = g.dx * dwx + g.dy * dwy;
        }
    }
    return jac;
}

inline Matrix steepest_descent_images(const Matrix& image, const Shape& src_shape,
                                      const ShapeModel& model, const Triangulation& tri) {
    return steepest_descent_images(image, src_shape, model, tri,
                                   build_warp_field(model.mean_shape, tri, model.frame));
}

/**
 * Renders a reference-frame texture into an image under a target landmark
 * placement (the inverse of warp_texture's direction). Used by the synthetic
 * harness; pixels outside the target hull are zero.
 */
inline Matrix render_texture(const Matrix& texture, const ShapeModel& model,
                             const Triangulation& tri, const Shape& dst_shape,
                             Index out_rows, Index out_cols) {
    require(dst_shape.size() == model.num_points(), "render_texture: point count mismatch");
    Matrix out = Matrix::Zero(out_rows, out_cols);
    for (Index y = 0; y < out_rows; ++y) {
        for (Index x = 0; x < out_cols; ++x) {
            const Eigen::Vector2d p{double(x), double(y)};
            for (const auto& tr : tri.triangles) {
                const Eigen::Vector3d b =
                    barycentric(dst_shape.points[tr[0]], dst_shape.points[tr[1]],
                                dst_shape.points[tr[2]], p);
                if (b[0] < -1e-9 || b[1] < -1e-9 || b[2] < -1e-9) continue;
                const Eigen::Vector2d s = b[0] * model.mean_shape.points[tr[0]] +
                                          b[1] * model.mean_shape.points[tr[1]] +
                                          b[2] * model.mean_shape.points[tr[2]];
                if (s.x() >= 0.0 && s.x() <= double(texture.cols() - 1) && s.y() >= 0.0 &&
                    s.y() <= double(texture.rows() - 1))
                    out(y, x) = sample_image(texture, s.x(), s.y()).value;
                break;
            }
        }
    }
    return out;
}

} // namespace far

#endif /* FAR_WARP_HPP_ */
