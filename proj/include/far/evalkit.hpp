/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/evalkit.hpp
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

#ifndef FAR_EVALKIT_HPP_
#define FAR_EVALKIT_HPP_

#include "far/warp.hpp"
#include "far/numlin.hpp"

#include <sstream>
#include <vector>

namespace far {

/// Landmark index configuration for the normalized point-to-point error.
/// Defaults follow the standard 68-point markup: the 49 interior points
/// (boundary 0-16 and inner mouth corners 60, 64 excluded) and the outer eye
/// corners 36 and 45.
struct LandmarkConfig {
    std::vector<Index> interior;
    Index left_eye_corner = 36;
    Index right_eye_corner = 45;

    static LandmarkConfig standard68() {
        LandmarkConfig c;
        for (Index i = 17; i < 68; ++i)
            if (i != 60 && i != 64) c.interior.push_back(i);
        return c;
    }
};

/// Mean point-to-point Euclidean distance over the interior landmarks,
/// normalized by the ground truth's outer eye-corner distance.
inline double pt2pt_error(const Shape& pred, const Shape& gt, const LandmarkConfig& cfg) {
    require(pred.size() == gt.size(), "pt2pt_error: point count mismatch");
    require(!cfg.interior.empty(), "pt2pt_error: empty interior index set");
    const double eye_dist =
        (gt.points[std::size_t(cfg.left_eye_corner)] - gt.points[std::size_t(cfg.right_eye_corner)])
            .norm();
    require(eye_dist > 0.0, "pt2pt_error: zero eye-corner distance");
    double acc = 0.0;
    for (Index i : cfg.interior) {
        require(i >= 0 && i < pred.size(), "pt2pt_error: interior index out of range");
        acc += (pred.points[std::size_t(i)] - gt.points[std::size_t(i)]).norm();
    }
    return acc / (double(cfg.interior.size()) * eye_dist);
}

/// Cumulative error distribution: fraction of errors strictly below each threshold.
struct CedCurve {
    std::vector<double> thresholds;
    std::vector<double> fractions;
};

inline CedCurve ced(const std::vector<double>& errors, const std::vector<double>& thresholds) {
    require(!errors.empty(), "ced: empty error list");
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        require(thresholds[i] > thresholds[i - 1], "ced: thresholds must be increasing");
    CedCurve curve;
    curve.thresholds = thresholds;
    for (double t : thresholds) {
        Index below = 0;
        for (double e : errors)
            if (e < t) ++below; // strict inequality
        curve.fractions.push_back(double(below) / double(errors.size()));
    }
    return curve;
}

/// Root mean square intensity difference over unmasked pixels.
inline double rmse(const Matrix& a, const Matrix& b, const std::vector<std::uint8_t>& mask) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "rmse: dimension mismatch");
    require(Index(mask.size()) == a.size(), "rmse: mask length mismatch");
    double acc = 0.0;
    Index n = 0;
    const Vector va = Eigen::Map<const Vector>(a.data(), a.size());
    const Vector vb = Eigen::Map<const Vector>(b.data(), b.size());
    for (Index i = 0; i < a.size(); ++i) {
        if (!mask[std::size_t(i)]) continue;
        const double d = va[i] - vb[i];
        acc += d * d;
        ++n;
    }
    require(n > 0, "rmse: empty mask");
    return std::sqrt(acc / double(n));
}

inline double rmse(const Matrix& a, const Matrix& b) {
    return rmse(a, b, std::vector<std::uint8_t>(std::size_t(a.size()), 1));
}

/**
 * Nuclear-norm-vs-shear probe: resamples the texture under a family of
 * horizontal shears about the vertical midline and reports the nuclear norm
 * at each level. Level 0 is the identity; for bilaterally symmetric textures
 * the minimum is attained there.
 */
inline std::vector<std::pair<double, double>> nuclear_probe(const Matrix& texture,
                                                            const std::vector<double>& levels) {
    std::vector<std::pair<double, double>> out;
    const Index rows = texture.rows(), cols = texture.cols();
    const double cy = (rows - 1) / 2.0;
    for (double level : levels) {
        Matrix sheared(rows, cols);
        for (Index y = 0; y < rows; ++y)
            for (Index x = 0; x < cols; ++x) {
                const double sx = double(x) + level * (double(y) - cy);
                const double cxp = std::min(std::max(sx, 0.0), double(cols - 1));
                sheared(y, x) = sample_image(texture, cxp, double(y)).value;
            }
        out.emplace_back(level, nuclear_norm(sheared));
    }
    return out;
}

/// CSV rendering of (key, value) pairs, directly plottable.
inline std::string pairs_to_csv(const std::string& key_name,
                                const std::vector<std::pair<double, double>>& pairs) {
    std::ostringstream out;
    out << key_name << ",value\n";
    out.precision(17);
    for (const auto& [k, v] : pairs) out << k << ',' << v << '\n';
    return out.str();
}

inline std::string ced_to_csv(const CedCurve& curve) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
        pairs.emplace_back(curve.thresholds[i], curve.fractions[i]);
    return pairs_to_csv("threshold", pairs);
}

} // namespace far

#endif /* FAR_EVALKIT_HPP_ */
