/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: tests/test_io.cpp
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
#include "far/io.hpp"

#include "doctest.h"

#include <cstdio>

TEST_CASE("pts round trip") {
    far::Shape s;
    s.points = {{12.5, 3.25}, {-1.0, 0.125}, {100.0, 42.0}};
    const std::string text = far::write_pts(s);
    const far::Shape back = far::parse_pts(text);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK((back.points[i] - s.points[i]).norm() < 1e-6);
    // file round trip via atomic write
    const std::string path = "test_io_roundtrip.pts";
    far::save_pts(s, path);
    const far::Shape loaded = far::load_pts(path);
    CHECK((loaded.points[2] - s.points[2]).norm() < 1e-6);
    std::remove(path.c_str());
}

TEST_CASE("pts parser accepts the canonical layout") {
    const std::string text =
        "version: 1\nn_points: 3\n{\n0.0 1.0\n2.5 -3.5\n4.0 5.0\n}\n";
    const far::Shape s = far::parse_pts(text);
    REQUIRE(s.size() == 3);
    CHECK(s.points[1].x() == doctest::Approx(2.5));
    CHECK(s.points[1].y() == doctest::Approx(-3.5));
}

TEST_CASE("pts parser rejects malformed input with line information") {
    using doctest::Contains;
    CHECK_THROWS_WITH_AS(far::parse_pts(""), Contains("end of file"), far::Error);
    CHECK_THROWS_WITH_AS(far::parse_pts("bogus\nn_points: 3\n{\n"), Contains("version"),
                         far::Error);
    CHECK_THROWS_WITH_AS(far::parse_pts("version: 1\nbogus\n{\n"), Contains("n_points"),
                         far::Error);
    CHECK_THROWS_WITH_AS(far::parse_pts("version: 1\nn_points: 2\n[\n0 0\n1 1\n]\n"),
                         Contains("'{'"), far::Error);
    // declared count larger than the actual point list
    CHECK_THROWS_WITH_AS(far::parse_pts("version: 1\nn_points: 4\n{\n0 0\n1 1\n2 2\n}\n"),
                         Contains("4"), far::Error);
    // non-numeric coordinates
    CHECK_THROWS_WITH_AS(far::parse_pts("version: 1\nn_points: 3\n{\n0 0\nx y\n2 2\n}\n"),
                         Contains("coordinates"), far::Error);
    // missing closing brace
    CHECK_THROWS_AS(far::parse_pts("version: 1\nn_points: 3\n{\n0 0\n1 1\n2 2\n"), far::Error);
    // fewer than 3 points declared
    CHECK_THROWS_AS(far::parse_pts("version: 1\nn_points: 2\n{\n0 0\n1 1\n}\n"), far::Error);
}

TEST_CASE("pgm round trip within quantization") {
    far::Matrix img(5, 7);
    for (far::Index y = 0; y < 5; ++y)
        for (far::Index x = 0; x < 7; ++x) img(y, x) = double(y * 7 + x) / 34.0;
    const std::string blob = far::encode_pgm(img);
    CHECK(blob.rfind("P5\n7 5\n255\n", 0) == 0);
    const far::Matrix back = far::decode_pgm(blob);
    REQUIRE(back.rows() == 5);
    REQUIRE(back.cols() == 7);
    for (far::Index y = 0; y < 5; ++y)
        for (far::Index x = 0; x < 7; ++x)
            CHECK(std::abs(back(y, x) - img(y, x)) <= 0.5 / 255.0 + 1e-12);
    // out-of-range intensities are clamped, not wrapped
    far::Matrix wild(1, 2);
    wild << -0.5, 1.5;
    const far::Matrix clamped = far::decode_pgm(far::encode_pgm(wild));
    CHECK(clamped(0, 0) == 0.0);
    CHECK(clamped(0, 1) == 1.0);
}

TEST_CASE("pgm decoder handles comments and P6 averaging") {
    std::string p5 = "P5 # a comment\n# another\n2 2\n255\n";
    p5 += std::string("\x00\x40\x80\xFF", 4);
    const far::Matrix img = far::decode_pgm(p5);
    CHECK(img(0, 0) == 0.0);
    CHECK(img(1, 1) == 1.0);
    CHECK(img(0, 1) == doctest::Approx(64.0 / 255.0));

    std::string p6 = "P6\n1 1\n255\n";
    p6 += std::string("\x10\x20\x30", 3);
    const far::Matrix rgb = far::decode_pgm(p6);
    CHECK(rgb(0, 0) == doctest::Approx((16.0 + 32.0 + 48.0) / (3.0 * 255.0)));
}

TEST_CASE("pgm decoder rejects malformed input") {
    using doctest::Contains;
    CHECK_THROWS_WITH_AS(far::decode_pgm("P2\n1 1\n255\n0"), Contains("magic"), far::Error);
    CHECK_THROWS_WITH_AS(far::decode_pgm("P5\n2 2\n65535\n...."), Contains("255"), far::Error);
    CHECK_THROWS_WITH_AS(far::decode_pgm("P5\n2 2\n255\nab"), Contains("length"), far::Error);
    CHECK_THROWS_WITH_AS(far::decode_pgm(std::string("P5\n2 2\n255\nabcde")),
                         Contains("length"), far::Error);
    CHECK_THROWS_AS(far::decode_pgm("P"), far::Error);
    CHECK_THROWS_AS(far::decode_pgm("P5\n-2 2\n255\n"), far::Error);
}

TEST_CASE("FARM shape model round trip and validation") {
    const far::FrameDims frame{24, 24};
    const far::ShapeModel model =
        far::build_shape_model(far::gen_training_shapes(3, 12), 2, frame);
    const far::Triangulation tri = far::delaunay(model.mean_shape);
    const std::string blob = far::encode_model(model, tri);
    const auto [back, tri_back] = far::decode_model(blob);
    CHECK(back.frame.rows == frame.rows);
    CHECK(back.frame.cols == frame.cols);
    CHECK((back.basis - model.basis).norm() == 0.0);
    CHECK((back.mean_shape.to_vector() - model.mean_shape.to_vector()).norm() == 0.0);
    CHECK(tri_back.triangles == tri.triangles);

    const std::string path = "test_io_model.farm";
    far::save_model(model, tri, path);
    const auto [loaded, loaded_tri] = far::load_model(path);
    CHECK((loaded.basis - model.basis).norm() == 0.0);
    std::remove(path.c_str());

    using doctest::Contains;
    CHECK_THROWS_WITH_AS(far::decode_model("FARX" + blob.substr(4)), Contains("magic"),
                         far::Error);
    CHECK_THROWS_WITH_AS(far::decode_model(blob.substr(0, blob.size() - 1)),
                         Contains("length"), far::Error);
    std::string bad_version = blob;
    bad_version[4] = 7;
    CHECK_THROWS_WITH_AS(far::decode_model(bad_version), Contains("version"), far::Error);
    // corrupting a basis value breaks orthonormality on load
    std::string corrupt = blob;
    const std::size_t basis_off = 28 + 8 * std::size_t(2 * model.num_points());
    corrupt[basis_off + 2] = char(corrupt[basis_off + 2] ^ 0x7f);
    CHECK_THROWS_AS(far::decode_model(corrupt), far::Error);
}

TEST_CASE("sidecar json round trip") {
    far::SynthInstance inst;
    inst.gt_shape.points = {{1.5, 2.5}, {3.0, 4.0}, {5.0, 6.0}};
    inst.gt_params.p = far::Vector{{0.25, -1.5, 3.0}};
    inst.gt_error_support = {3, 17, 200};
    inst.seed = 987654321;
    const std::string text = far::write_sidecar(inst);
    const far::Sidecar s = far::parse_sidecar(text);
    REQUIRE(s.gt_shape.size() == 3);
    CHECK((s.gt_shape.points[0] - Eigen::Vector2d{1.5, 2.5}).norm() == 0.0);
    CHECK((s.gt_params - inst.gt_params.p).norm() == 0.0);
    CHECK(s.gt_error_support == inst.gt_error_support);
    CHECK(s.seed == 987654321);
    // keys present in a stable order
    CHECK(text.find("gt_shape") != std::string::npos);
    CHECK(text.find("gt_params") != std::string::npos);
    CHECK(text.find("gt_error_support") != std::string::npos);
    CHECK(text.find("seed") != std::string::npos);
    CHECK_THROWS(far::parse_sidecar("{ not json"));
}
