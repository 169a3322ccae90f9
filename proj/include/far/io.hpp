/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: include/far/io.hpp
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

#ifndef FAR_IO_HPP_
#define FAR_IO_HPP_

#include "far/subspace.hpp"
#include "far/synth.hpp"

#include "json.hpp"

#include <cstdio>
#include <sstream>
#include <string>

namespace far {

// ---------------------------------------------------------------------------
// pts landmark files
// ---------------------------------------------------------------------------

/**
 * Parses a pts annotation:
 *   version: 1
 *   n_points: <v>
 *   {
 *   <x> <y>     (v lines)
 *   }
 */
inline Shape parse_pts(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        require(bool(std::getline(in, line)), "pts: unexpected end of file after line " +
                                                  std::to_string(line_no));
        ++line_no;
    };
    next_line();
    require(line.rfind("version:", 0) == 0, "pts: line 1: expected 'version:' header");
    next_line();
    require(line.rfind("n_points:", 0) == 0, "pts: line 2: expected 'n_points:' header");
    Index declared = 0;
    {
        std::istringstream fields(line.substr(9));
        require(bool(fields >> declared) && declared >= 3,
                "pts: line 2: invalid point count");
    }
    next_line();
    require(line == "{", "pts: line " + std::to_string(line_no) + ": expected '{'");
    Shape shape;
    for (Index i = 0; i < declared; ++i) {
        if (!std::getline(in, line)) {
            throw Error("pts: declared " + std::to_string(declared) + " points but found only " +
                        std::to_string(i) + " (ended at line " + std::to_string(line_no) + ")");
        }
        ++line_no;
        if (line == "}")
            throw Error("pts: declared " + std::to_string(declared) + " points but found only " +
                        std::to_string(i) + " (line " + std::to_string(line_no) + ")");
        std::istringstream fields(line);
        double x, y;
        require(bool(fields >> x >> y),
                "pts: line " + std::to_string(line_no) + ": expected two coordinates");
        shape.points.push_back({x, y});
    }
    next_line();
    require(line == "}", "pts: line " + std::to_string(line_no) + ": expected '}'");
    return shape;
}

/// Writes a shape in pts format with 6 decimal places.
inline std::string write_pts(const Shape& shape) {
    std::ostringstream out;
    out << "version: 1\n" << "n_points: " << shape.size() << "\n{\n";
    char buf[64];
    for (const auto& p : shape.points) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", p.x(), p.y());
        out << buf;
    }
    out << "}\n";
    return out.str();
}

inline Shape load_pts(const std::string& path) { return parse_pts(detail::read_file(path)); }

inline void save_pts(const Shape& shape, const std::string& path) {
    detail::write_file_atomic(path, write_pts(shape));
}

// ---------------------------------------------------------------------------
// PGM images (binary P5 required; P6 accepted, channels averaged)
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t skip_pnm_whitespace(const std::string& d, std::size_t off) {
    while (off < d.size()) {
        if (std::isspace(static_cast<unsigned char>(d[off]))) {
            ++off;
        } else if (d[off] == '#') {
            while (off < d.size() && d[off] != '\n') ++off;
        } else {
            break;
        }
    }
    return off;
}

inline std::size_t read_pnm_int(const std::string& d, std::size_t off, Index& value) {
    off = skip_pnm_whitespace(d, off);
    require(off < d.size() && std::isdigit(static_cast<unsigned char>(d[off])),
            "pgm: malformed header");
    value = 0;
    while (off < d.size() && std::isdigit(static_cast<unsigned char>(d[off])))
        value = value * 10 + (d[off++] - '0');
    return off;
}

} // namespace detail

/// Decodes an 8-bit binary PGM/PPM into intensities in [0, 1].
inline Matrix decode_pgm(const std::string& data) {
    require(data.size() >= 2, "pgm: truncated header");
    const std::string magic = data.substr(0, 2);
    require(magic == "P5" || magic == "P6",
            "pgm: unsupported magic '" + magic + "' (expected 'P5' or 'P6')");
    const int channels = magic == "P5" ? 1 : 3;
    Index width = 0, height = 0, maxval = 0;
    std::size_t off = 2;
    off = detail::read_pnm_int(data, off, width);
    off = detail::read_pnm_int(data, off, height);
    off = detail::read_pnm_int(data, off, maxval);
    require(maxval == 255, "pgm: only 8-bit images supported (maxval 255)");
    require(off < data.size() && std::isspace(static_cast<unsigned char>(data[off])),
            "pgm: malformed header");
    ++off;
    const std::size_t expect = std::size_t(width) * std::size_t(height) * std::size_t(channels);
    require(data.size() - off == expect, "pgm: payload length mismatch (expected " +
                                             std::to_string(expect) + " bytes, got " +
                                             std::to_string(data.size() - off) + ")");
    Matrix img(height, width);
    for (Index y = 0; y < height; ++y)
        for (Index x = 0; x < width; ++x) {
            double acc = 0;
            for (int c = 0; c < channels; ++c)
                acc += double(std::uint8_t(data[off++]));
            img(y, x) = acc / (255.0 * channels);
        }
    return img;
}

/// Encodes intensities in [0, 1] as binary P5, rounding to 8 bits.
inline std::string encode_pgm(const Matrix& image) {
    require(all_finite(image), "pgm: non-finite image");
    std::string out = "P5\n" + std::to_string(image.cols()) + " " +
                      std::to_string(image.rows()) + "\n255\n";
    for (Index y = 0; y < image.rows(); ++y)
        for (Index x = 0; x < image.cols(); ++x) {
            const double v = std::min(1.0, std::max(0.0, image(y, x)));
            out.push_back(char(std::uint8_t(std::lround(v * 255.0))));
        }
    return out;
}

inline Matrix read_image(const std::string& path) { return decode_pgm(detail::read_file(path)); }

inline void write_image(const Matrix& image, const std::string& path) {
    detail::write_file_atomic(path, encode_pgm(image));
}

// ---------------------------------------------------------------------------
// FARM shape-model files: magic "FARM"; little-endian u32 version=1, m, n, v,
// v_p, n_triangles; mean shape as 2v doubles (x, y interleaved); basis
// column-major as 2v*v_p doubles; triangle indices as 3*n_triangles u32.
// ---------------------------------------------------------------------------

inline std::string encode_model(const ShapeModel& model, const Triangulation& tri) {
    std::string out = "FARM";
    detail::put_u32(out, 1);
    detail::put_u32(out, std::uint32_t(model.frame.rows));
    detail::put_u32(out, std::uint32_t(model.frame.cols));
    detail::put_u32(out, std::uint32_t(model.num_points()));
    detail::put_u32(out, std::uint32_t(model.num_params()));
    detail::put_u32(out, std::uint32_t(tri.triangles.size()));
    const Vector mean = model.mean_shape.to_vector();
    for (Index i = 0; i < mean.size(); ++i) detail::put_f64(out, mean[i]);
    for (Index j = 0; j < model.basis.cols(); ++j)
        for (Index i = 0; i < model.basis.rows(); ++i) detail::put_f64(out, model.basis(i, j));
    for (const auto& t : tri.triangles)
        for (Index idx : t) detail::put_u32(out, std::uint32_t(idx));
    return out;
}

inline std::pair<ShapeModel, Triangulation> decode_model(const std::string& data) {
    require(data.size() >= 28, "FARM: truncated header");
    require(data.compare(0, 4, "FARM") == 0,
            "FARM: bad magic '" + data.substr(0, 4) + "' (expected 'FARM')");
    require(detail::get_u32(data, 4) == 1, "FARM: unsupported version");
    ShapeModel model;
    model.frame.rows = Index(detail::get_u32(data, 8));
    model.frame.cols = Index(detail::get_u32(data, 12));
    const Index v = Index(detail::get_u32(data, 16));
    const Index vp = Index(detail::get_u32(data, 20));
    const Index nt = Index(detail::get_u32(data, 24));
    const std::size_t expect =
        28 + 8 * std::size_t(2 * v) * std::size_t(1 + vp) + 4 * 3 * std::size_t(nt);
    require(data.size() == expect, "FARM: payload length mismatch (expected " +
                                       std::to_string(expect) + " bytes, got " +
                                       std::to_string(data.size()) + ")");
    std::size_t off = 28;
    Vector mean(2 * v);
    for (Index i = 0; i < 2 * v; ++i) {
        mean[i] = detail::get_f64(data, off);
        off += 8;
    }
    model.mean_shape = Shape::from_vector(mean);
    model.basis.resize(2 * v, vp);
    for (Index j = 0; j < vp; ++j)
        for (Index i = 0; i < 2 * v; ++i) {
            model.basis(i, j) = detail::get_f64(data, off);
            off += 8;
        }
    Triangulation tri;
    for (Index t = 0; t < nt; ++t) {
        std::array<Index, 3> idx;
        for (int i = 0; i < 3; ++i) {
            idx[std::size_t(i)] = Index(detail::get_u32(data, off));
            off += 4;
            require(idx[std::size_t(i)] < v, "FARM: triangle index out of range");
        }
        tri.triangles.push_back(idx);
    }
    const Matrix gram = model.basis.transpose() * model.basis;
    require((gram - Matrix::Identity(vp, vp)).cwiseAbs().maxCoeff() < 1e-8,
            "FARM: basis columns not orthonormal");
    return {model, tri};
}

inline void save_model(const ShapeModel& model, const Triangulation& tri,
                       const std::string& path) {
    detail::write_file_atomic(path, encode_model(model, tri));
}

inline std::pair<ShapeModel, Triangulation> load_model(const std::string& path) {
    return decode_model(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Ground-truth JSON sidecar
// ---------------------------------------------------------------------------

inline std::string write_sidecar(const SynthInstance& inst) {
    nlohmann::ordered_json j;
    auto& gt_shape = j["gt_shape"] = nlohmann::json::array();
    for (const auto& p : inst.gt_shape.points) gt_shape.push_back({p.x(), p.y()});
    auto& gt_params = j["gt_params"] = nlohmann::json::array();
    for (Index i = 0; i < inst.gt_params.p.size(); ++i) gt_params.push_back(inst.gt_params.p[i]);
    auto& support = j["gt_error_support"] = nlohmann::json::array();
    for (Index i : inst.gt_error_support) support.push_back(i);
    j["seed"] = inst.seed;
    return j.dump(2) + "\n";
}

struct Sidecar {
    Shape gt_shape;
    Vector gt_params;
    std::vector<Index> gt_error_support;
    std::uint64_t seed = 0;
};

inline Sidecar parse_sidecar(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Sidecar s;
    for (const auto& p : j.at("gt_shape"))
        s.gt_shape.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    const auto& params = j.at("gt_params");
    s.gt_params.resize(Index(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) s.gt_params[Index(i)] = params[i].get<double>();
    for (const auto& i : j.at("gt_error_support")) s.gt_error_support.push_back(i.get<Index>());
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

} // namespace far

#endif /* FAR_IO_HPP_ */
