/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: tests/test_subspace.cpp
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
#include "far/synth.hpp"

#include "doctest.h"

namespace {

const far::FrameDims kFrame{32, 32};

struct Fixture {
    far::ShapeModel model;
    far::Triangulation tri;
    std::vector<far::TrainingPair> pairs;
};

Fixture& fixture() {
    static Fixture fx = [] {
        Fixture f;
        f.model = far::build_shape_model(far::gen_training_shapes(42, 20), 3, kFrame);
        f.tri = far::delaunay(f.model.mean_shape);
        const std::vector<far::Matrix> tex = far::gen_textures(43, kFrame, 30, 6);
        for (const auto& t : tex) f.pairs.push_back({t, f.model.mean_shape});
        return f;
    }();
    return fx;
}

// Largest principal angle between the column spans of two orthonormal bases.
double max_principal_angle(const far::Matrix& a, const far::Matrix& b) {
    const far::Vector cosines = far::thin_svd(a.transpose() * b).singular_values;
    const double c = std::min(1.0, std::max(-1.0, cosines.minCoeff()));
    return std::acos(c);
}

} // namespace

TEST_CASE("build_basis invariants: orthonormality, masked rows, mean") {
    const Fixture& fx = fixture();
    const far::AppearanceBasis basis = far::build_basis(fx.pairs, fx.model, fx.tri, 10);
    CHECK_NOTHROW(far::check_basis_invariants(basis));
    CHECK(basis.k >= 7); // 6 latent + mean (+constant unless absorbed)
    CHECK(basis.frame.rows == kFrame.rows);
    // masked rows exactly zero
    for (far::Index i = 0; i < basis.pixels(); ++i)
        if (!basis.mask[std::size_t(i)]) {
            CHECK(basis.u.row(i).norm() == 0.0);
            CHECK(basis.mean[i] == 0.0);
        }
    // training textures lie in span(U) up to resampling error
    const far::WarpField field = far::build_warp_field(fx.model.mean_shape, fx.tri, kFrame);
    const far::WarpedTexture w =
        far::warp_texture(fx.pairs[0].image, fx.pairs[0].shape, fx.model, fx.tri, field);
    far::Vector x = w.x;
    for (far::Index i = 0; i < basis.pixels(); ++i)
        if (!basis.mask[std::size_t(i)]) x[i] = 0.0;
    const far::Vector residual = x - basis.u * (basis.u.transpose() * x);
    CHECK(residual.norm() < 1e-6 * x.norm());
}

TEST_CASE("build_basis recovers the latent subspace (principal angle oracle)") {
    const Fixture& fx = fixture();
    const far::AppearanceBasis basis = far::build_basis(fx.pairs, fx.model, fx.tri, 12);
    // oracle basis: orthonormalized warped textures themselves (they span the
    // same 6+1 dimensional affine space; plus the constant direction)
    const far::WarpField field = far::build_warp_field(fx.model.mean_shape, fx.tri, kFrame);
    const far::Index f = kFrame.pixels();
    far::Matrix cols(f, far::Index(fx.pairs.size()) + 1);
    for (std::size_t s = 0; s < fx.pairs.size(); ++s) {
        const far::WarpedTexture w =
            far::warp_texture(fx.pairs[s].image, fx.pairs[s].shape, fx.model, fx.tri, field);
        far::Vector x = w.x;
        for (far::Index i = 0; i < f; ++i)
            if (!basis.mask[std::size_t(i)]) x[i] = 0.0;
        cols.col(far::Index(s)) = x;
    }
    far::Vector ones = far::Vector::Zero(f);
    for (far::Index i = 0; i < f; ++i)
        if (basis.mask[std::size_t(i)]) ones[i] = 1.0;
    cols.col(cols.cols() - 1) = ones;
    const far::Matrix oracle = far::detail::orthonormalize(cols, 1e-8);
    // span(U) must sit inside the oracle span: angle(U, oracle span) ~ 0
    const far::Matrix proj = oracle * (oracle.transpose() * basis.u);
    CHECK((proj - basis.u).norm() < 1e-5);
    CHECK(max_principal_angle(basis.u, oracle) < 1e-4);
}

TEST_CASE("build_basis reports truncation when k exceeds the data rank") {
    const Fixture& fx = fixture();
    bool truncated = false;
    const far::AppearanceBasis basis =
        far::build_basis(fx.pairs, fx.model, fx.tri, 25, &truncated);
    // textures have 6 latent dims + mean: rank ~7, far below 25
    CHECK(truncated);
    CHECK(basis.k < 25);
    CHECK_NOTHROW(far::check_basis_invariants(basis));

    bool truncated_small = true;
    far::build_basis(fx.pairs, fx.model, fx.tri, 4, &truncated_small);
    CHECK_FALSE(truncated_small);
}

TEST_CASE("FARB round trip is bit-exact") {
    const Fixture& fx = fixture();
    const far::AppearanceBasis basis = far::build_basis(fx.pairs, fx.model, fx.tri, 8);
    const std::string blob = far::encode_basis(basis);
    const far::AppearanceBasis back = far::decode_basis(blob);
    CHECK(back.frame.rows == basis.frame.rows);
    CHECK(back.frame.cols == basis.frame.cols);
    CHECK(back.k == basis.k);
    CHECK(back.mask == basis.mask);
    CHECK((back.mean - basis.mean).norm() == 0.0);
    CHECK((back.u - basis.u).norm() == 0.0);
    // file round trip
    const std::string path = "test_basis_roundtrip.farb";
    far::save_basis(basis, path);
    const far::AppearanceBasis loaded = far::load_basis(path);
    CHECK((loaded.u - basis.u).norm() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("FARB malformed inputs produce actionable errors") {
    const Fixture& fx = fixture();
    const far::AppearanceBasis basis = far::build_basis(fx.pairs, fx.model, fx.tri, 6);
    const std::string blob = far::encode_basis(basis);

    CHECK_THROWS_WITH_AS(far::decode_basis("FA"), doctest::Contains("truncated"), far::Error);
    std::string bad_magic = blob;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(far::decode_basis(bad_magic), doctest::Contains("magic"), far::Error);
    std::string truncated = blob.substr(0, blob.size() - 17);
    CHECK_THROWS_WITH_AS(far::decode_basis(truncated), doctest::Contains("length"), far::Error);
    std::string bad_version = blob;
    bad_version[4] = 9;
    CHECK_THROWS_WITH_AS(far::decode_basis(bad_version), doctest::Contains("version"),
                         far::Error);
    // corrupt a basis entry so orthonormality fails on load
    std::string corrupt = blob;
    corrupt[corrupt.size() - 3] = char(corrupt[corrupt.size() - 3] + 1);
    CHECK_THROWS_AS(far::decode_basis(corrupt), far::Error);
}

TEST_CASE("check_basis_invariants rejects violations") {
    const Fixture& fx = fixture();
    far::AppearanceBasis basis = far::build_basis(fx.pairs, fx.model, fx.tri, 6);
    far::AppearanceBasis bad = basis;
    bad.u.col(0) *= 2.0;
    CHECK_THROWS_AS(far::check_basis_invariants(bad), far::Error);
    far::AppearanceBasis bad2 = basis;
    for (far::Index i = 0; i < bad2.pixels(); ++i)
        if (!bad2.mask[std::size_t(i)]) {
            bad2.mean[i] = 0.5;
            break;
        }
    CHECK_THROWS_AS(far::check_basis_invariants(bad2), far::Error);
}
