/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/subspace.hpp
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

#ifndef FAR_SUBSPACE_HPP_
#define FAR_SUBSPACE_HPP_

#include "far/warp.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace far {

/// Orthonormal clean-frontal appearance basis in the reference frame.
struct AppearanceBasis {
    FrameDims frame;
    Index k = 0;                       ///< number of columns of u
    Vector mean;                       ///< length f, zero at masked pixels
    Matrix u;                          ///< f x k, orthonormal columns, masked rows zero
    std::vector<std::uint8_t> mask;    ///< hull-interior validity, length f

    Index pixels() const { return frame.pixels(); }
};

inline void check_basis_invariants(const AppearanceBasis& basis) {
    const Index f = basis.pixels();
    require(basis.mean.size() == f && basis.u.rows() == f &&
                Index(basis.mask.size()) == f && basis.u.cols() == basis.k,
            "appearance basis: inconsistent dimensions");
    const Matrix gram = basis.u.transpose() * basis.u;
    require((gram - Matrix::Identity(basis.k, basis.k)).cwiseAbs().maxCoeff() < 1e-8,
            "appearance basis: columns not orthonormal");
    for (Index i = 0; i < f; ++i) {
        if (basis.mask[std::size_t(i)]) continue;
        require(basis.mean[i] == 0.0 && basis.u.row(i).cwiseAbs().maxCoeff() == 0.0,
                "appearance basis: nonzero entries at masked pixels");
    }
}

struct TrainingPair {
    Matrix image;
    Shape shape;
};

/**
 * Builds the appearance basis: warps every training image into the reference
 * frame, runs PCA on the shape-free textures, then folds the texture mean and
 * the constant-over-mask direction into the basis and re-orthonormalizes, so
 * affine intensity offsets of the normalization stay representable inside
 * span(U). The reported k counts all columns and may exceed the requested k
 * by up to two (mean and constant directions).
 */
inline AppearanceBasis build_basis(const std::vector<TrainingPair>& training,
                                   const ShapeModel& model, const Triangulation& tri,
                                   Index k, bool* truncated = nullptr) {
    require(training.size() >= 2, "build_basis: need at least 2 training pairs");
    const WarpField field = build_warp_field(model.mean_shape, tri, model.frame);
    const Index f = field.pixels();

    // common validity mask across all warped textures
    std::vector<std::uint8_t> mask(std::size_t(f), 1);
    Matrix textures(f, Index(training.size()));
    for (std::size_t s = 0; s < training.size(); ++s) {
        require(training[s].shape.size() == model.num_points(),
                "build_basis: shape inconsistent with model");
        const WarpedTexture w =
            warp_texture(training[s].image, training[s].shape, model, tri, field);
        textures.col(Index(s)) = w.x;
        for (Index i = 0; i < f; ++i)
            if (!w.mask[std::size_t(i)]) mask[std::size_t(i)] = 0;
    }
    for (Index i = 0; i < f; ++i)
        if (!mask[std::size_t(i)]) textures.row(i).setZero();

    const Index k_req = std::min(k, Index(training.size()));
    const PcaResult p = pca(textures, std::min(k_req, std::min(f, textures.cols())));
    if (truncated) *truncated = (k_req < k) || p.truncated;

    Vector ones = Vector::Zero(f);
    for (Index i = 0; i < f; ++i)
        if (mask[std::size_t(i)]) ones[i] = 1.0;

    Matrix cols(f, p.basis.cols() + 2);
    cols << p.basis, p.mean, ones;
    AppearanceBasis basis;
    basis.frame = model.frame;
    basis.mask = mask;
    basis.u = detail::orthonormalize(cols);
    basis.k = basis.u.cols();
    basis.mean = p.mean;
    check_basis_invariants(basis);
    return basis;
}

// ---------------------------------------------------------------------------
// FARB serialization: magic "FARB"; little-endian u32 version=1, m, n, k;
// mask as f bytes; mean as f doubles; u column-major as f*k doubles.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(in[off + i])) << (8 * i);
    return v;
}

inline void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

inline double get_f64(const std::string& in, std::size_t off) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(std::uint8_t(in[off + i])) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

/// Atomic file write: temp file in place, then rename.
inline void write_file_atomic(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open for writing: " + tmp);
        out.write(payload.data(), std::streamsize(payload.size()));
        require(out.good(), "write failed: " + tmp);
    }
    require(std::rename(tmp.c_str(), path.c_str()) == 0, "rename failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open for reading: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

} // namespace detail

inline std::string encode_basis(const AppearanceBasis& basis) {
    check_basis_invariants(basis);
    const Index f = basis.pixels();
    std::string out;
    out += "FARB";
    detail::put_u32(out, 1);
    detail::put_u32(out, std::uint32_t(basis.frame.rows));
    detail::put_u32(out, std::uint32_t(basis.frame.cols));
    detail::put_u32(out, std::uint32_t(basis.k));
    for (Index i = 0; i < f; ++i) out.push_back(char(basis.mask[std::size_t(i)] ? 1 : 0));
    for (Index i = 0; i < f; ++i) detail::put_f64(out, basis.mean[i]);
    for (Index j = 0; j < basis.k; ++j)
        for (Index i = 0; i < f; ++i) detail::put_f64(out, basis.u(i, j));
    return out;
}

inline AppearanceBasis decode_basis(const std::string& data) {
    require(data.size() >= 20, "FARB: truncated header (expected at least 20 bytes, got " +
                                   std::to_string(data.size()) + ")");
    require(data.compare(0, 4, "FARB") == 0,
            "FARB: bad magic '" + data.substr(0, 4) + "' (expected 'FARB')");
    const std::uint32_t version = detail::get_u32(data, 4);
    require(version == 1, "FARB: unsupported version " + std::to_string(version));
    AppearanceBasis basis;
    basis.frame.rows = Index(detail::get_u32(data, 8));
    basis.frame.cols = Index(detail::get_u32(data, 12));
    basis.k = Index(detail::get_u32(data, 16));
    const Index f = basis.pixels();
    const std::size_t expect = 20 + std::size_t(f) + 8 * std::size_t(f) * std::size_t(1 + basis.k);
    require(data.size() == expect, "FARB: payload length mismatch (expected " +
                                       std::to_string(expect) + " bytes, got " +
                                       std::to_string(data.size()) + ")");
    std::size_t off = 20;
    basis.mask.resize(std::size_t(f));
    for (Index i = 0; i < f; ++i) basis.mask[std::size_t(i)] = std::uint8_t(data[off++]);
    basis.mean.resize(f);
    for (Index i = 0; i < f; ++i) {
        basis.mean[i] = detail::get_f64(data, off);
        off += 8;
    }
    basis.u.resize(f, basis.k);
    for (Index j = 0; j < basis.k; ++j)
        for (Index i = 0; i < f; ++i) {
            basis.u(i, j) = detail::get_f64(data, off);
            off += 8;
        }
    check_basis_invariants(basis);
    return basis;
}

inline void save_basis(const AppearanceBasis& basis, const std::string& path) {
    detail::write_file_atomic(path, encode_basis(basis));
}

inline AppearanceBasis load_basis(const std::string& path) {
    return decode_basis(detail::read_file(path));
}

} // namespace far

#endif /* FAR_SUBSPACE_HPP_ */
