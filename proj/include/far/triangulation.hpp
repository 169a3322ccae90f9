/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/triangulation.hpp
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

#ifndef FAR_TRIANGULATION_HPP_
#define FAR_TRIANGULATION_HPP_

#include "far/shape.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace far {

struct Triangulation {
    std::vector<std::array<Index, 3>> triangles;
};

namespace detail {

inline double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const Eigen::Vector2d& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

inline bool in_circumcircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c, const Eigen::Vector2d& p) {
    // assumes ccw(a, b, c)
    const double ax = a.x() - p.x(), ay = a.y() - p.y();
    const double bx = b.x() - p.x(), by = b.y() - p.y();
    const double cx = c.x() - p.x(), cy = c.y() - p.y();
    const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                       (bx * bx + by * by) * (ax * cy - cx * ay) +
                       (cx * cx + cy * cy) * (ax * by - bx * ay);
    return det > 0.0;
}

} // namespace detail

/// Barycentric coordinates of p with respect to triangle (a, b, c).
inline Eigen::Vector3d barycentric(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                   const Eigen::Vector2d& c, const Eigen::Vector2d& p) {
    const double area = detail::orient2d(a, b, c);
    require(std::abs(area) > 0.0, "barycentric: degenerate triangle");
    const double w0 = detail::orient2d(b, c, p) / area;
    const double w1 = detail::orient2d(c, a, p) / area;
    return {w0, w1, 1.0 - w0 - w1};
}

/**
 * Delaunay triangulation of the mean shape by Bowyer-Watson insertion.
 * Deterministic for a fixed point order; triangle lists are canonicalized
 * (sorted vertex indices, sorted triangles).
 */
inline Triangulation delaunay(const Shape& shape) {
    const Index v = shape.size();
    require(v >= 3, "delaunay: need at least 3 points");
    for (Index i = 0; i < v; ++i)
        for (Index j = i + 1; j < v; ++j)
            require((shape.points[i] - shape.points[j]).norm() > 1e-9,
                    "delaunay: duplicated points");

    // super-triangle enclosing all points
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : shape.points) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    const double d = std::max(xmax - xmin, ymax - ymin) * 16.0 + 16.0;
    const Eigen::Vector2d mid{(xmin + xmax) / 2.0, (ymin + ymax) / 2.0};
    std::vector<Eigen::Vector2d> pts(shape.points.begin(), shape.points.end());
    pts.push_back(mid + Eigen::Vector2d{-d, -d / 2.0});
    pts.push_back(mid + Eigen::Vector2d{d, -d / 2.0});
    pts.push_back(mid + Eigen::Vector2d{0.0, d});

    struct Tri {
        std::array<Index, 3> idx; // ccw order
    };
    std::vector<Tri> tris;
    {
        std::array<Index, 3> super{v, v + 1, v + 2};
        if (detail::orient2d(pts[super[0]], pts[super[1]], pts[super[2]]) < 0)
            std::swap(super[1], super[2]);
        tris.push_back({super});
    }

    for (Index ip = 0; ip < v; ++ip) {
        const Eigen::Vector2d& p = pts[ip];
        std::vector<Tri> keep;
        std::vector<std::array<Index, 2>> edges;
        for (const Tri& t : tris) {
            if (detail::in_circumcircle(pts[t.idx[0]], pts[t.idx[1]], pts[t.idx[2]], p)) {
                edges.push_back({t.idx[0], t.idx[1]});
                edges.push_back({t.idx[1], t.idx[2]});
                edges.push_back({t.idx[2], t.idx[0]});
            } else {
                keep.push_back(t);
            }
        }
        // boundary of the cavity: edges appearing exactly once
        std::vector<std::array<Index, 2>> boundary;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            bool dup = false;
            for (std::size_t j = 0; j < edges.size(); ++j) {
                if (i != j && edges[i][0] == edges[j][1] && edges[i][1] == edges[j][0]) {
                    dup = true;
                    break;
                }
            }
            if (!dup) boundary.push_back(edges[i]);
        }
        tris = std::move(keep);
        for (const auto& e : boundary) {
            Tri t{{e[0], e[1], ip}};
            const double area = detail::orient2d(pts[t.idx[0]], pts[t.idx[1]], pts[t.idx[2]]);
            if (std::abs(area) < 1e-12) continue;
            if (area < 0) std::swap(t.idx[1], t.idx[2]);
            tris.push_back(t);
        }
    }

    Triangulation out;
    for (const Tri& t : tris) {
        if (t.idx[0] >= v || t.idx[1] >= v || t.idx[2] >= v) continue;
        std::array<Index, 3> s = t.idx;
        std::sort(s.begin(), s.end());
        out.triangles.push_back(s);
    }
    std::sort(out.triangles.begin(), out.triangles.end());
    require(!out.triangles.empty(), "delaunay: degenerate configuration (collinear points)");
    for (const auto& t : out.triangles)
        require(std::abs(detail::orient2d(shape.points[t[0]], shape.points[t[1]],
                                          shape.points[t[2]])) > 1e-12,
                "delaunay: degenerate triangle");
    return out;
}

/// Per-pixel triangle assignment and barycentric coordinates over the
/// reference frame. Pixels outside the mean-shape hull are masked.
struct WarpField {
    FrameDims frame;
    std::vector<Index> triangle;       ///< per pixel, -1 if masked
    std::vector<Eigen::Vector3d> bary; ///< per pixel, valid where triangle >= 0

    Index pixels() const { return frame.pixels(); }
    bool valid(Index i) const { return triangle[std::size_t(i)] >= 0; }
};

/// Pixel index convention: column-major over the frame, idx = x * rows + y.
inline Index pixel_index(const FrameDims& frame, Index x, Index y) {
    return x * frame.rows + y;
}

/**
 * Assigns every frame pixel to the first triangle (in canonical order)
 * containing it, with a small tolerance so shared edges get a deterministic
 * owner.
 */
inline WarpField build_warp_field(const Shape& mean_shape, const Triangulation& tri,
                                  FrameDims frame) {
    WarpField field;
    field.frame = frame;
    field.triangle.assign(std::size_t(frame.pixels()), -1);
    field.bary.assign(std::size_t(frame.pixels()), Eigen::Vector3d::Zero());
    const double tol = -1e-9;
    for (Index x = 0; x < frame.cols; ++x) {
        for (Index y = 0; y < frame.rows; ++y) {
            const Eigen::Vector2d p{double(x), double(y)};
            const Index idx = pixel_index(frame, x, y);
            for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
                const auto& tr = tri.triangles[t];
                const Eigen::Vector3d b = barycentric(
                    mean_shape.points[tr[0]], mean_shape.points[tr[1]],
                    mean_shape.points[tr[2]], p);
                if (b[0] >= tol && b[1] >= tol && b[2] >= tol) {
                    field.triangle[std::size_t(idx)] = Index(t);
                    field.bary[std::size_t(idx)] = b;
                    break;
                }
            }
        }
    }
    return field;
}

} // namespace far

#endif /* FAR_TRIANGULATION_HPP_ */
