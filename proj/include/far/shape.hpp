/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/shape.hpp
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

#ifndef FAR_SHAPE_HPP_
#define FAR_SHAPE_HPP_

#include "far/core.hpp"
#include "far/numlin.hpp"

#include <vector>

namespace far {

/// An ordered landmark configuration in image pixel coordinates.
struct Shape {
    std::vector<Eigen::Vector2d> points;

    Index size() const { return Index(points.size()); }

    /// Interleaved (x0, y0, x1, y1, ...) vector of length 2v.
    Vector to_vector() const {
        Vector v(2 * size());
        for (Index i = 0; i < size(); ++i) {
            v[2 * i] = points[i].x();
            v[2 * i + 1] = points[i].y();
        }
        return v;
    }

    static Shape from_vector(const Vector& v) {
        require(v.size() % 2 == 0, "Shape::from_vector: odd length");
        Shape s;
        s.points.resize(v.size() / 2);
        for (Index i = 0; i < Index(s.points.size()); ++i)
            s.points[i] = {v[2 * i], v[2 * i + 1]};
        return s;
    }

    Eigen::Vector2d centroid() const {
        Eigen::Vector2d c{0, 0};
        for (const auto& p : points) c += p;
        return c / double(size());
    }
};

struct FrameDims {
    Index rows = 0; ///< m (image height)
    Index cols = 0; ///< n (image width)
    Index pixels() const { return rows * cols; }
};

/// Warp parameter vector p: 4 similarity coefficients then n_s deformation ones.
struct WarpParams {
    Vector p;
};

/// Statistical shape model: mean landmarks in the reference frame plus an
/// orthonormal joint basis of 4 similarity directions and n_s PCA deformation
/// directions.
struct ShapeModel {
    Shape mean_shape;
    Matrix basis; ///< 2v x (4 + n_s), orthonormal columns
    FrameDims frame;

    Index num_points() const { return mean_shape.size(); }
    Index num_params() const { return basis.cols(); }
};

/// Similarity (translation, rotation, uniform scale) removal by classic
/// Procrustes alignment of `shape` onto `target`.
inline Shape procrustes_align(const Shape& shape, const Shape& target) {
    require(shape.size() == target.size(), "procrustes_align: point count mismatch");
    const Eigen::Vector2d cs = shape.centroid();
    const Eigen::Vector2d ct = target.centroid();
    double sxx = 0, sxy = 0, norm2 = 0;
    for (Index i = 0; i < shape.size(); ++i) {
        const Eigen::Vector2d a = shape.points[i] - cs;
        const Eigen::Vector2d b = target.points[i] - ct;
        sxx += a.x() * b.x() + a.y() * b.y();
        sxy += a.x() * b.y() - a.y() * b.x();
        norm2 += a.squaredNorm();
    }
    require(norm2 > 0.0, "procrustes_align: degenerate shape");
    const double a = sxx / norm2; // scale*cos
    const double b = sxy / norm2; // scale*sin
    Shape out;
    out.points.resize(shape.points.size());
    for (Index i = 0; i < shape.size(); ++i) {
        const Eigen::Vector2d d = shape.points[i] - cs;
        out.points[i] = ct + Eigen::Vector2d{a * d.x() - b * d.y(), b * d.x() + a * d.y()};
    }
    return out;
}

namespace detail {

/// Four similarity columns generated by the mean shape: scaling, in-plane
/// rotation (linearized, exact for the similarity group), and translations.
inline Matrix similarity_columns(const Shape& mean) {
    const Index v = mean.size();
    const Eigen::Vector2d c = mean.centroid();
    Matrix s(2 * v, 4);
    for (Index i = 0; i < v; ++i) {
        const Eigen::Vector2d d = mean.points[i] - c;
        s(2 * i, 0) = d.x();
        s(2 * i + 1, 0) = d.y();
        s(2 * i, 1) = -d.y();
        s(2 * i + 1, 1) = d.x();
        s(2 * i, 2) = 1.0;
        s(2 * i + 1, 2) = 0.0;
        s(2 * i, 3) = 0.0;
        s(2 * i + 1, 3) = 1.0;
    }
    return s;
}

/// Modified Gram-Schmidt; drops columns that are numerically dependent.
inline Matrix orthonormalize(const Matrix& cols, double tol = 1e-10) {
    Matrix q(cols.rows(), cols.cols());
    Index kept = 0;
    for (Index j = 0; j < cols.cols(); ++j) {
        Vector v = cols.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i < kept; ++i) v -= q.col(i).dot(v) * q.col(i);
        const double n = v.norm();
        if (n > tol) q.col(kept++) = v / n;
    }
    return q.leftCols(kept);
}

} // namespace detail

/**
 * Builds the shape model: Procrustes-aligns the training shapes, runs PCA on
 * the residual deformations, prepends the 4 similarity directions, and
 * re-orthonormalizes the joint basis. The mean shape is scaled and translated
 * to occupy the central 90% of the reference frame.
 *
 * n_s < 0 selects the smallest number of deformation modes explaining 95% of
 * the residual variance.
 */
inline ShapeModel build_shape_model(const std::vector<Shape>& shapes, Index n_s,
                                    FrameDims frame) {
    require(shapes.size() >= 2, "build_shape_model: need at least 2 shapes");
    const Index v = shapes.front().size();
    require(v >= 3, "build_shape_model: need at least 3 points");
    for (const auto& s : shapes)
        require(s.size() == v, "build_shape_model: inconsistent point counts");

    // iterative Procrustes: align to the running mean, re-estimate
    Shape mean = shapes.front();
    std::vector<Shape> aligned(shapes.size());
    for (int it = 0; it < 10; ++it) {
        Vector acc = Vector::Zero(2 * v);
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            aligned[i] = procrustes_align(shapes[i], mean);
            acc += aligned[i].to_vector();
        }
        mean = Shape::from_vector(acc / double(shapes.size()));
    }

    // place the mean into the central 90% of the frame
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : mean.points) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    const double w = xmax - xmin, h = ymax - ymin;
    require(w > 0 && h > 0, "build_shape_model: degenerate mean shape");
    const double scale = 0.9 * std::min(double(frame.cols - 1) / w, double(frame.rows - 1) / h);
    const Eigen::Vector2d frame_center{(frame.cols - 1) / 2.0, (frame.rows - 1) / 2.0};
    const Eigen::Vector2d shape_center{(xmin + xmax) / 2.0, (ymin + ymax) / 2.0};
    ShapeModel model;
    model.frame = frame;
    model.mean_shape.points.resize(v);
    for (Index i = 0; i < v; ++i)
        model.mean_shape.points[i] = frame_center + scale * (mean.points[i] - shape_center);
    for (auto& a : aligned) {
        for (auto& p : a.points) p = frame_center + scale * (p - shape_center);
    }

    // deformation PCA on the aligned residuals
    Matrix residuals(2 * v, Index(aligned.size()));
    const Vector mean_vec = model.mean_shape.to_vector();
    for (std::size_t i = 0; i < aligned.size(); ++i)
        residuals.col(Index(i)) = aligned[i].to_vector() - mean_vec;

    const Matrix sim = detail::similarity_columns(model.mean_shape);
    // project similarity directions out of the residuals before PCA
    const Matrix sim_q = detail::orthonormalize(sim);
    residuals -= sim_q * (sim_q.transpose() * residuals);

    if (n_s < 0) {
        const Vector sv = thin_svd(residuals).singular_values;
        const double total = sv.squaredNorm();
        n_s = 0;
        if (total > 1e-18) {
            double acc = 0;
            while (n_s < sv.size() && acc < 0.95 * total) acc += sv[n_s] * sv[n_s], ++n_s;
        }
    }
    Matrix deform(2 * v, 0);
    if (n_s > 0) {
        const PcaResult def = pca(residuals, std::min(n_s, std::min(Index(2 * v), residuals.cols())));
        deform = def.basis;
    }

    Matrix joint(2 * v, sim.cols() + deform.cols());
    joint << sim, deform;
    model.basis = detail::orthonormalize(joint);
    return model;
}

/// shape = mean_shape + reshape(basis * p).
inline Shape shape_from_params(const ShapeModel& model, const WarpParams& params) {
    require(params.p.size() == model.num_params(),
            "shape_from_params: parameter length mismatch");
    return Shape::from_vector(model.mean_shape.to_vector() + model.basis * params.p);
}

/// Least-squares projection of a shape onto the model (basis is orthonormal).
inline WarpParams params_from_shape(const ShapeModel& model, const Shape& shape) {
    require(shape.size() == model.num_points(), "params_from_shape: point count mismatch");
    WarpParams w;
    w.p = model.basis.transpose() * (shape.to_vector() - model.mean_shape.to_vector());
    return w;
}

} // namespace far

#endif /* FAR_SHAPE_HPP_ */
