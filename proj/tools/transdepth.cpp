// transdepth command-line tool: training, evaluation, gradient checking,
// synthetic data generation, ablation tables, and single-image prediction.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "transdepth/checkpoint.hpp"
#include "transdepth/config.hpp"
#include "transdepth/dataset.hpp"
#include "transdepth/pipeline.hpp"
#include "transdepth/png_io.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    td::RunConfig cfg = td::load_run_config(config_path);
    td::TrainResult r = td::train_run(cfg, out_dir, &std::cout);
    std::cout << "checkpoint: " << r.checkpoint_path << "\n"
              << "initial loss: " << std::setprecision(15) << r.initial_loss << "\n"
              << "final loss (mean of last 10% of steps): " << r.final_loss << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& report_path,
             const std::string& convention, uint64_t synth_seed, int synth_n, int synth_h, int synth_w) {
    td::TransDepthModel model = td::load_checkpoint(ckpt);
    td::Dataset ds;
    if (data == "synth") {
        ds = td::synth_dataset(td::synth_train_seed(synth_seed), synth_n, synth_h, synth_w);
    } else {
        ds = td::ingest_directory(data, td::parse_convention(convention));
    }
    td::MetricsReport report = td::evaluate_model(model, ds, td::env_thread_count());
    const std::string text = report.to_json().dump(2);
    std::cout << text << "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw td::IoError("cannot create report '" + report_path + "'");
        out << text << "\n";
    }
    return 0;
}

int cmd_gradcheck(const std::string& scope) {
    td::ScopeResult res = td::run_gradcheck_scope(scope);
    std::cout << "scope " << res.scope << ": max rel error " << std::setprecision(6) << res.report.max_rel_error
              << " (tolerance " << res.tolerance << "), " << res.report.coords_checked << " coords checked, "
              << res.report.coords_nonsmooth << " kink-skipped, " << res.report.coords_unresolvable
              << " below FD resolution\n";
    if (!res.report.per_parameter.empty()) {
        const auto& worst = res.report.worst();
        std::cout << "worst offender: " << worst.first << " (rel error " << worst.second << ")\n";
    }
    std::cout << (res.passed ? "PASS" : "FAIL") << "\n";
    return res.passed ? 0 : 1;
}

int cmd_synth(uint64_t seed, int n, int h, int w, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto scenes = td::synth_generate(seed, n, h, w);
    for (int i = 0; i < n; ++i) {
        std::ostringstream stem;
        stem << std::setfill('0') << std::setw(4) << i;
        td::write_png_rgb8(out_dir + "/image_" + stem.str() + ".png", scenes[static_cast<size_t>(i)].image);
        td::write_png_depth16(out_dir + "/depth_" + stem.str() + ".png", scenes[static_cast<size_t>(i)].depth);
        td::detail::write_raw_tensor(out_dir + "/normals_" + stem.str() + ".raw",
                                     scenes[static_cast<size_t>(i)].normals);
    }
    std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis, const std::string& out_csv) {
    td::RunConfig cfg = td::load_run_config(config_path);
    const std::string work = out_csv + ".work";
    auto rows = td::ablate_run(cfg, axis, out_csv, work, &std::cout);
    std::cout << "wrote " << rows.size() << " rows to " << out_csv << " (data hash " << std::hex
              << rows.front().data_hash << std::dec << ")\n";
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& image_path, const std::string& out_path) {
    td::TransDepthModel model = td::load_checkpoint(ckpt);
    td::Tensor image = td::read_png_rgb8(image_path);
    const int ch = (image.dim(1) / 32) * 32, cw = (image.dim(2) / 32) * 32;
    if (ch == 0 || cw == 0) throw td::IoError("input image smaller than 32x32");
    image = td::detail::center_crop(image, ch, cw);
    td::NoGradGuard ng;
    td::Tensor pred = model.forward(td::reshape(image, {1, 3, ch, cw}));
    const bool raw = out_path.size() > 4 && out_path.substr(out_path.size() - 4) == ".raw";
    if (model.cfg.task == td::Task::depth) {
        td::Tensor depth = td::reshape(pred, {1, ch, cw});
        if (raw)
            td::detail::write_raw_tensor(out_path, depth);
        else
            td::write_png_depth16(out_path, depth);
    } else {
        td::Tensor normals = td::reshape(pred, {3, ch, cw});
        if (raw) {
            td::detail::write_raw_tensor(out_path, normals);
        } else {
            // visualization encoding: n*0.5+0.5 per channel
            std::vector<double> vis = normals.data();
            for (auto& v : vis) v = 0.5 * v + 0.5;
            td::write_png_rgb8(out_path, td::Tensor::from_data({3, ch, cw}, std::move(vis)));
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TransDepth: hybrid CNN+transformer monocular depth and surface-normal prediction"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt, data, report_path, scope, axis, image_path, out_path;
    std::string convention = "kitti_png16";
    uint64_t seed = 42;
    int n = 8, h = 64, w = 64;

    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("--config", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write a metrics report");
    eval->add_option("--ckpt", ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data, "'synth' or a dataset directory")->required();
    eval->add_option("--report", report_path, "metrics JSON output path");
    eval->add_option("--convention", convention, "directory convention: kitti_png16|npy_like_raw");
    eval->add_option("--synth-seed", seed, "training seed whose synth train set to evaluate on");
    eval->add_option("--synth-n", n, "number of synth scenes");
    eval->add_option("--synth-h", h, "synth scene height");
    eval->add_option("--synth-w", w, "synth scene width");

    auto* gradcheck = app.add_subcommand("gradcheck", "run a gradient-check scope");
    gradcheck->add_option("--scope", scope, "ops|encoder|agd|losses|full")->required();

    auto* synth = app.add_subcommand("synth", "generate synthetic scenes");
    synth->add_option("--seed", seed, "generator seed")->required();
    synth->add_option("--n", n, "number of scenes")->required();
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--height", h, "scene height (multiple of 32)");
    synth->add_option("--width", w, "scene width (multiple of 32)");

    auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
    ablate->add_option("--config", config_path, "base run config JSON")->required()->check(CLI::ExistingFile);
    ablate->add_option("--axis", axis, "modules|vit_on_off|agd_on_off|emitting_sets")->required();
    ablate->add_option("--out", out_path, "output CSV path")->required();

    auto* predict = app.add_subcommand("predict", "predict depth/normals for one image");
    predict->add_option("--ckpt", ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
    predict->add_option("--image", image_path, "input RGB PNG")->required()->check(CLI::ExistingFile);
    predict->add_option("--out", out_path, "output file (.png or .raw)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (eval->parsed()) return cmd_eval(ckpt, data, report_path, convention, seed, n, h, w);
        if (gradcheck->parsed()) return cmd_gradcheck(scope);
        if (synth->parsed()) return cmd_synth(seed, n, h, w, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, axis, out_path);
        if (predict->parsed()) return cmd_predict(ckpt, image_path, out_path);
    } catch (const td::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const td::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
