/*
 * far - joint deformable alignment and low-rank frontal reconstruction
 *
 * File: tools/far.cpp
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
#include "far/evalkit.hpp"
#include "far/io.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct FrameOption {
    far::FrameDims dims{40, 40};
};

// "WxH" -> FrameDims (cols = W, rows = H)
void parse_frame(const std::string& text, far::FrameDims& dims) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--frame", "expected WxH");
    try {
        dims.cols = std::stol(text.substr(0, x));
        dims.rows = std::stol(text.substr(x + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--frame", "expected WxH");
    }
    if (dims.cols < 2 || dims.rows < 2)
        throw CLI::ValidationError("--frame", "frame too small");
}

void add_solver_flags(CLI::App* cmd, far::SolverConfig& cfg) {
    cmd->add_option("--lambda", cfg.lambda, "sparsity weight");
    cmd->add_option("--rho", cfg.rho, "penalty growth factor");
    cmd->add_option("--mu0", cfg.mu0, "initial penalty");
    cmd->add_option("--eps1", cfg.eps1, "outer objective tolerance");
    cmd->add_option("--eps2", cfg.eps2, "inner iterate-change tolerance");
    cmd->add_option("--eps3", cfg.eps3, "inner residual tolerance");
    cmd->add_option("--max-inner", cfg.max_inner, "inner iteration cap");
    cmd->add_option("--max-outer", cfg.max_outer, "outer iteration cap");
    cmd->add_flag("--dp-multiplier", cfg.dp_multiplier_term,
                  "include the multiplier term in the warp-increment solve");
}

std::vector<std::pair<fs::path, fs::path>> collect_batch(const std::string& image_arg,
                                                         const std::string& init_arg) {
    std::vector<std::pair<fs::path, fs::path>> jobs;
    if (fs::is_directory(image_arg)) {
        std::vector<fs::path> images;
        for (const auto& entry : fs::directory_iterator(image_arg))
            if (entry.path().extension() == ".pgm") images.push_back(entry.path());
        std::sort(images.begin(), images.end());
        for (const auto& img : images) {
            fs::path pts = fs::path(init_arg) / (img.stem().string() + ".pts");
            jobs.emplace_back(img, pts);
        }
    } else {
        jobs.emplace_back(image_arg, init_arg);
    }
    return jobs;
}

fs::path output_path_for(const std::string& out_arg, const fs::path& image, bool batch,
                         const std::string& ext) {
    if (!batch) return out_arg;
    fs::create_directories(out_arg);
    return fs::path(out_arg) / (image.stem().string() + ext);
}

int run_build_basis(const std::string& images_dir, const std::string& landmarks_dir,
                    far::FrameDims frame, far::Index k, far::Index n_s,
                    const std::string& out, const std::string& model_out) {
    std::vector<far::Shape> shapes;
    std::vector<far::TrainingPair> pairs;
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(images_dir))
        if (entry.path().extension() == ".pgm") images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    for (const auto& img : images) {
        const fs::path pts = fs::path(landmarks_dir) / (img.stem().string() + ".pts");
        pairs.push_back({far::read_image(img.string()), far::load_pts(pts.string())});
        shapes.push_back(pairs.back().shape);
    }
    const far::ShapeModel model = far::build_shape_model(shapes, n_s, frame);
    const far::Triangulation tri = far::delaunay(model.mean_shape);
    bool truncated = false;
    const far::AppearanceBasis basis = far::build_basis(pairs, model, tri, k, &truncated);
    if (truncated)
        std::cerr << "warning: basis truncated to " << basis.k << " columns\n";
    far::save_basis(basis, out);
    far::save_model(model, tri, model_out);
    std::cout << "basis: " << out << " (" << basis.k << " columns, frame "
              << basis.frame.cols << "x" << basis.frame.rows << ")\n"
              << "model: " << model_out << " (" << model.num_points() << " points, "
              << model.num_params() << " parameters)\n";
    return 0;
}

int run_fit(const std::string& image_arg, const std::string& init_arg,
            const std::string& basis_path, const std::string& model_path,
            const std::string& out_arg, const std::string& diag,
            const far::SolverConfig& cfg, bool frontal_mode,
            const std::string& frontal_out) {
    const far::AppearanceBasis basis = far::load_basis(basis_path);
    const auto [model, tri] = far::load_model(model_path);
    far::require(model.frame.rows == basis.frame.rows && model.frame.cols == basis.frame.cols,
                 "basis and model frames differ");
    const bool batch = fs::is_directory(image_arg);
    const auto jobs = collect_batch(image_arg, init_arg);
    far::require(!jobs.empty(), "no input images found");
    int failures = 0;
    for (const auto& [image_path, init_path] : jobs) {
        try {
            const far::Matrix image = far::read_image(image_path.string());
            const far::Shape init = far::load_pts(init_path.string());
            far::FitResult result;
            if (frontal_mode) {
                const far::FrontalResult fr =
                    far::frontalize(image, init, model, tri, basis, cfg);
                result = fr.fit;
                const fs::path fout =
                    output_path_for(frontal_out, image_path, batch, "_frontal.pgm");
                far::write_image(fr.frontal, fout.string());
            } else {
                result = far::fit(image, init, model, tri, basis, cfg);
            }
            const far::Shape fitted = far::shape_from_params(model, result.p_final);
            const fs::path out = output_path_for(out_arg, image_path, batch, ".pts");
            far::save_pts(fitted, out.string());
            if (!diag.empty()) {
                const fs::path dout = output_path_for(diag, image_path, batch, "_trace.csv");
                far::detail::write_file_atomic(dout.string(), far::trace_to_csv(result.trace));
            }
            std::cout << image_path.string() << ": outer=" << result.outer_iterations
                      << " converged=" << (result.converged_outer ? "yes" : "no") << "\n";
        } catch (const std::exception& e) {
            std::cerr << image_path.string() << ": error: " << e.what() << "\n";
            ++failures;
        }
    }
    return failures == 0 ? 0 : 2;
}

int run_synth(std::uint64_t seed, const std::string& out_dir, far::FrameDims frame,
              far::Index k, double tx, double ty, double rotation, double scale,
              double sparsity, double spike_mag, double init_offset) {
    fs::create_directories(out_dir);
    const far::SynthWorld world = far::make_synth_world(seed, frame, k);
    const far::SynthInstance inst = far::gen_instance(
        world.basis, world.model, world.tri, seed, {tx, ty}, rotation, scale, sparsity,
        spike_mag);
    const fs::path dir(out_dir);
    far::save_basis(world.basis, (dir / "basis.farb").string());
    far::save_model(world.model, world.tri, (dir / "model.farm").string());
    const std::string stem = "instance_" + std::to_string(seed);
    far::write_image(inst.image, (dir / (stem + ".pgm")).string());
    far::save_pts(inst.gt_shape, (dir / (stem + "_gt.pts")).string());
    far::detail::write_file_atomic((dir / (stem + "_gt.json")).string(),
                                   far::write_sidecar(inst));
    // perturbed initialization for fitting experiments
    far::Shape init = inst.gt_shape;
    for (auto& p : init.points) p += Eigen::Vector2d{init_offset, init_offset};
    far::save_pts(init, (dir / (stem + "_init.pts")).string());
    std::cout << "wrote " << stem << " to " << out_dir << "\n";
    return 0;
}

std::vector<double> parse_levels(const std::string& spec) {
    // "lo:step:hi" or comma-separated list
    std::vector<double> levels;
    if (spec.find(':') != std::string::npos) {
        double lo, step, hi;
        char c1, c2;
        std::istringstream in(spec);
        far::require(bool(in >> lo >> c1 >> step >> c2 >> hi) && c1 == ':' && c2 == ':' &&
                         step > 0,
                     "levels: expected lo:step:hi");
        for (double v = lo; v <= hi + 1e-12; v += step) levels.push_back(v);
    } else {
        std::istringstream in(spec);
        std::string tok;
        while (std::getline(in, tok, ',')) levels.push_back(std::stod(tok));
    }
    return levels;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"far: joint deformable alignment and low-rank frontal reconstruction"};
    app.require_subcommand(1);

    far::SolverConfig cfg;
    FrameOption frame;
    std::string frame_text;

    // build-basis
    auto* build = app.add_subcommand("build-basis", "build shape model and appearance basis");
    std::string images_dir, landmarks_dir, basis_out = "basis.farb", model_out = "model.farm";
    far::Index k = 30, n_s = -1;
    build->add_option("--images", images_dir, "directory of PGM training images")->required();
    build->add_option("--landmarks", landmarks_dir, "directory of pts files")->required();
    build->add_option("--frame", frame_text, "reference frame WxH")->required();
    build->add_option("--k", k, "number of eigen-images to keep");
    build->add_option("--n-s", n_s, "deformation modes (-1: keep 95% variance)");
    build->add_option("--out", basis_out, "output basis file");
    build->add_option("--model-out", model_out, "output shape model file");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "align a deformable template to an image");
    std::string image_arg, init_arg, basis_path, model_path = "model.farm", out_arg, diag;
    fit_cmd->add_option("--image", image_arg, "input PGM image or directory")->required();
    fit_cmd->add_option("--init", init_arg, "initial landmarks (pts file or directory)")
        ->required();
    fit_cmd->add_option("--basis", basis_path, "appearance basis file")->required();
    fit_cmd->add_option("--model", model_path, "shape model file");
    fit_cmd->add_option("--out", out_arg, "output pts file or directory")->required();
    fit_cmd->add_option("--diag", diag, "diagnostic trace CSV file or directory");
    add_solver_flags(fit_cmd, cfg);

    // frontalize
    auto* front = app.add_subcommand("frontalize", "reconstruct the frontal appearance");
    std::string f_image, f_init, f_basis, f_model = "model.farm", f_out, f_diag,
                f_frontal = "frontal.pgm";
    front->add_option("--image", f_image, "input PGM image or directory")->required();
    front->add_option("--init", f_init, "initial landmarks (pts file or directory)")->required();
    front->add_option("--basis", f_basis, "appearance basis file")->required();
    front->add_option("--model", f_model, "shape model file");
    front->add_option("--out", f_out, "output pts file or directory")->required();
    front->add_option("--frontal-out", f_frontal, "output frontal PGM file or directory");
    front->add_option("--diag", f_diag, "diagnostic trace CSV file or directory");
    add_solver_flags(front, cfg);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic instance with ground truth");
    std::uint64_t seed = 0;
    std::string synth_out = "synth";
    double tx = 0, ty = 0, rotation = 0, scale = 0, sparsity = 0.05, spike_mag = 0.5,
           init_offset = 0;
    far::Index synth_k = 22;
    std::string synth_frame_text = "40x40";
    synth->add_option("--seed", seed, "generator seed")->required();
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--frame", synth_frame_text, "reference frame WxH");
    synth->add_option("--k", synth_k, "appearance basis size");
    synth->add_option("--tx", tx, "ground-truth x translation (px)");
    synth->add_option("--ty", ty, "ground-truth y translation (px)");
    synth->add_option("--rotation", rotation, "ground-truth rotation (degrees)");
    synth->add_option("--scale", scale, "ground-truth scale change (percent)");
    synth->add_option("--sparsity", sparsity, "corrupted pixel fraction");
    synth->add_option("--spike-mag", spike_mag, "corruption magnitude");
    synth->add_option("--init-offset", init_offset, "offset of the emitted init landmarks (px)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluation metrics");
    eval->require_subcommand(1);
    auto* ev_lm = eval->add_subcommand("landmarks", "normalized point-to-point error and CED");
    std::string pred_arg, gt_arg, ced_out;
    std::string thresholds_text = "0.01:0.01:0.10";
    ev_lm->add_option("--pred", pred_arg, "predicted pts file or directory")->required();
    ev_lm->add_option("--gt", gt_arg, "ground-truth pts file or directory")->required();
    ev_lm->add_option("--out", ced_out, "CED CSV output");
    ev_lm->add_option("--thresholds", thresholds_text, "lo:step:hi threshold grid");
    auto* ev_rmse = eval->add_subcommand("rmse", "root mean square intensity difference");
    std::string rmse_a, rmse_b;
    ev_rmse->add_option("--a", rmse_a, "first PGM image")->required();
    ev_rmse->add_option("--b", rmse_b, "second PGM image")->required();
    auto* ev_probe = eval->add_subcommand("probe", "nuclear norm under horizontal shear");
    std::string probe_image, probe_out, levels_text = "-0.3:0.05:0.3";
    ev_probe->add_option("--image", probe_image, "input PGM image")->required();
    ev_probe->add_option("--levels", levels_text, "lo:step:hi shear levels");
    ev_probe->add_option("--out", probe_out, "probe CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*build) {
            parse_frame(frame_text, frame.dims);
            return run_build_basis(images_dir, landmarks_dir, frame.dims, k, n_s, basis_out,
                                   model_out);
        }
        if (*fit_cmd)
            return run_fit(image_arg, init_arg, basis_path, model_path, out_arg, diag, cfg,
                           false, "");
        if (*front)
            return run_fit(f_image, f_init, f_basis, f_model, f_out, f_diag, cfg, true,
                           f_frontal);
        if (*synth) {
            parse_frame(synth_frame_text, frame.dims);
            return run_synth(seed, synth_out, frame.dims, synth_k, tx, ty, rotation, scale,
                             sparsity, spike_mag, init_offset);
        }
        if (*ev_lm) {
            std::vector<std::pair<fs::path, fs::path>> jobs;
            if (fs::is_directory(pred_arg)) {
                std::vector<fs::path> preds;
                for (const auto& entry : fs::directory_iterator(pred_arg))
                    if (entry.path().extension() == ".pts") preds.push_back(entry.path());
                std::sort(preds.begin(), preds.end());
                for (const auto& p : preds)
                    jobs.emplace_back(p, fs::path(gt_arg) / p.filename());
            } else {
                jobs.emplace_back(pred_arg, gt_arg);
            }
            std::vector<double> errors;
            for (const auto& [pred_path, gt_path] : jobs) {
                const far::Shape pred = far::load_pts(pred_path.string());
                const far::Shape gt = far::load_pts(gt_path.string());
                far::LandmarkConfig lc;
                if (pred.size() == 68) {
                    lc = far::LandmarkConfig::standard68();
                } else {
                    for (far::Index i = 0; i < pred.size(); ++i) lc.interior.push_back(i);
                    lc.left_eye_corner = 0;
                    lc.right_eye_corner = pred.size() / 2;
                }
                errors.push_back(far::pt2pt_error(pred, gt, lc));
            }
            double mean = 0;
            for (double e : errors) mean += e;
            mean /= double(errors.size());
            std::cout << "mean normalized error: " << mean << " over " << errors.size()
                      << " shapes\n";
            if (!ced_out.empty()) {
                const far::CedCurve curve = far::ced(errors, parse_levels(thresholds_text));
                far::detail::write_file_atomic(ced_out, far::ced_to_csv(curve));
            }
            return 0;
        }
        if (*ev_rmse) {
            const far::Matrix a = far::read_image(rmse_a);
            const far::Matrix b = far::read_image(rmse_b);
            std::cout << "rmse: " << far::rmse(a, b) << "\n";
            return 0;
        }
        if (*ev_probe) {
            const far::Matrix img = far::read_image(probe_image);
            const auto probe = far::nuclear_probe(img, parse_levels(levels_text));
            if (!probe_out.empty())
                far::detail::write_file_atomic(probe_out, far::pairs_to_csv("level", probe));
            for (const auto& [level, value] : probe)
                std::cout << level << "," << value << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
