#pragma once

// Run drivers shared by the CLI and the acceptance suite: deterministic
// training with CSV logging and checkpointing, whole-set evaluation with
// optional worker sharding, fixed-seed gradient-check scopes, and the
// ablation table.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "transdepth/adam.hpp"
#include "transdepth/checkpoint.hpp"
#include "transdepth/config.hpp"
#include "transdepth/dataset.hpp"
#include "transdepth/grad_check.hpp"
#include "transdepth/metrics.hpp"
#include "transdepth/model.hpp"

namespace td {

// The synthetic train/eval streams are derived from the training seed, so
// "the training set of seed s" is reconstructible from s alone.
inline uint64_t synth_train_seed(uint64_t training_seed) { return CounterRng(training_seed).split("train-data").seed(); }
inline uint64_t synth_eval_seed(uint64_t training_seed) { return CounterRng(training_seed).split("eval-data").seed(); }

inline Dataset load_train_dataset(const RunConfig& cfg) {
    if (cfg.data.source == DataSource::synth)
        return synth_dataset(synth_train_seed(cfg.training.seed), cfg.data.n_train, cfg.data.image_h, cfg.data.image_w);
    return ingest_directory(cfg.data.path, IngestConvention::kitti_png16);
}

inline Dataset load_eval_dataset(const RunConfig& cfg) {
    if (cfg.data.source == DataSource::synth)
        return synth_dataset(synth_eval_seed(cfg.training.seed), cfg.data.n_eval, cfg.data.image_h, cfg.data.image_w);
    return ingest_directory(cfg.data.path, IngestConvention::kitti_png16);
}

// FNV-1a over the f64 bytes of images, ground truth and masks.
inline uint64_t dataset_hash(const Dataset& ds) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const Tensor& t) {
        if (!t.defined()) return;
        const auto& d = t.data();
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(d.data());
        for (size_t i = 0; i < d.size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& s : ds.samples) {
        mix(s.image);
        mix(s.depth);
        mix(s.normals);
        mix(s.mask);
    }
    return h;
}

namespace detail {

inline Tensor stack_batch(const Dataset& ds, const std::vector<int>& idx,
                          const std::function<const Tensor&(const Sample&)>& pick) {
    const Tensor& first = pick(ds.samples.at(static_cast<size_t>(idx.at(0))));
    const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
    const int64_t chw = static_cast<int64_t>(c) * h * w;
    std::vector<double> out(static_cast<size_t>(idx.size()) * chw);
    for (size_t b = 0; b < idx.size(); ++b) {
        const Tensor& t = pick(ds.samples.at(static_cast<size_t>(idx[b])));
        std::copy(t.data().begin(), t.data().end(), out.begin() + static_cast<int64_t>(b) * chw);
    }
    return Tensor::from_data({static_cast<int>(idx.size()), c, h, w}, std::move(out));
}

inline PixelTarget batch_target(const Dataset& ds, const std::vector<int>& idx, Task task) {
    Tensor mask = stack_batch(ds, idx, [](const Sample& s) -> const Tensor& { return s.mask; });
    if (task == Task::depth) {
        Tensor gt = stack_batch(ds, idx, [](const Sample& s) -> const Tensor& {
            if (!s.depth.defined()) throw ConfigError("dataset has no depth ground truth for a depth task");
            return s.depth;
        });
        return make_depth_target(gt, mask);
    }
    Tensor gt = stack_batch(ds, idx, [](const Sample& s) -> const Tensor& {
        if (!s.normals.defined()) throw ConfigError("dataset has no normal ground truth for a normals task");
        return s.normals;
    });
    return make_normal_target(gt, mask);
}

}  // namespace detail

struct TrainResult {
    std::string checkpoint_path;
    double initial_loss = 0.0;
    double final_loss = 0.0;       // mean over the last 10% of steps
    double last_step_loss = 0.0;
    std::vector<double> losses;
};

inline TrainResult train_run(const RunConfig& cfg, const std::string& out_dir, std::ostream* progress = nullptr) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    Dataset ds = load_train_dataset(cfg);
    if (ds.empty()) throw ConfigError("training dataset is empty");
    TransDepthModel model = make_model(cfg.model, cfg.training.seed);
    ParamList params = model.parameters();
    AdamW opt(cfg.training.lr, cfg.training.adam_beta1, cfg.training.adam_beta2, cfg.training.adam_eps,
              cfg.training.weight_decay);

    std::ofstream log(out_dir + "/train_log.csv");
    if (!log) throw IoError("cannot create training log in '" + out_dir + "'");
    log << "step,loss,wall_ms\n";

    TrainResult result;
    const int n = static_cast<int>(ds.size());
    for (int step = 0; step < cfg.training.steps; ++step) {
        std::vector<int> idx(static_cast<size_t>(cfg.training.batch_size));
        for (int j = 0; j < cfg.training.batch_size; ++j)
            idx[static_cast<size_t>(j)] = (step * cfg.training.batch_size + j) % n;
        const auto t0 = std::chrono::steady_clock::now();
        double loss_value;
        try {
            Tensor images = detail::stack_batch(ds, idx, [](const Sample& s) -> const Tensor& { return s.image; });
            PixelTarget target = detail::batch_target(ds, idx, model.cfg.task);
            opt.zero_grad(params);
            Tensor loss = model.loss(images, target);
            loss_value = loss.item();
            loss.backward();
            opt.step(params);
        } catch (const ValueError& e) {
            std::ostringstream batch;
            for (size_t j = 0; j < idx.size(); ++j) batch << (j ? "," : "") << idx[j];
            log << step << ",nan,0\n";
            throw ValueError("training aborted at step " + std::to_string(step) + " on batch [" + batch.str() +
                             "]: " + e.what());
        }
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        log << step << "," << std::setprecision(15) << loss_value << "," << std::setprecision(6) << wall_ms << "\n";
        result.losses.push_back(loss_value);
        if (progress && (step % 50 == 0 || step + 1 == cfg.training.steps))
            (*progress) << "step " << step << " loss " << std::setprecision(6) << loss_value << "\n";
        if (cfg.training.checkpoint_interval > 0 && (step + 1) % cfg.training.checkpoint_interval == 0 &&
            step + 1 < cfg.training.steps) {
            std::ostringstream name;
            name << out_dir << "/checkpoint_step" << std::setfill('0') << std::setw(6) << (step + 1) << ".tdck";
            save_checkpoint(name.str(), model);
        }
    }
    result.checkpoint_path = out_dir + "/checkpoint.tdck";
    save_checkpoint(result.checkpoint_path, model);
    if (!result.losses.empty()) {
        result.initial_loss = result.losses.front();
        result.last_step_loss = result.losses.back();
        const size_t tail = std::max<size_t>(1, result.losses.size() / 10);
        double acc = 0.0;
        for (size_t i = result.losses.size() - tail; i < result.losses.size(); ++i) acc += result.losses[i];
        result.final_loss = acc / static_cast<double>(tail);
    }
    return result;
}

// Whole-set accumulation: one accumulator per image, merged in index order,
// so the result is identical for any worker count.
inline MetricsReport evaluate_model(const TransDepthModel& model, const Dataset& ds, int n_threads = 1) {
    if (ds.empty()) throw ValueError("evaluate: empty dataset");
    const int n = static_cast<int>(ds.size());
    n_threads = std::max(1, std::min(n_threads, n));
    const Task task = model.cfg.task;

    std::vector<DepthMetricAccumulator> depth_acc(static_cast<size_t>(n));
    std::vector<NormalMetricAccumulator> normal_acc(static_cast<size_t>(n));
    std::vector<std::string> errors(static_cast<size_t>(n));

    auto worker = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            try {
                NoGradGuard ng;
                const Sample& s = ds.samples[static_cast<size_t>(i)];
                const int h = s.image.dim(1), w = s.image.dim(2);
                Tensor image = reshape(s.image, {1, 3, h, w});
                Tensor pred = model.forward(image);
                const int64_t hw = static_cast<int64_t>(h) * w;
                if (task == Task::depth) {
                    if (!s.depth.defined()) throw ConfigError("dataset has no depth ground truth for a depth task");
                    depth_acc[static_cast<size_t>(i)].add(pred.data().data(), s.depth.data().data(),
                                                          s.mask.data().data(), hw);
                } else {
                    if (!s.normals.defined())
                        throw ConfigError("dataset has no normal ground truth for a normals task");
                    normal_acc[static_cast<size_t>(i)].add_planar(pred.data().data(), s.normals.data().data(),
                                                                  s.mask.data().data(), hw);
                }
            } catch (const std::exception& e) {
                errors[static_cast<size_t>(i)] = e.what();
            }
        }
    };

    if (n_threads == 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int lo = t * chunk, hi = std::min(n, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw ValueError("evaluate: " + e);

    if (task == Task::depth) {
        DepthMetricAccumulator total;
        for (const auto& a : depth_acc) total.merge(a);
        return total.finish();
    }
    NormalMetricAccumulator total;
    for (const auto& a : normal_acc) total.merge(a);
    return total.finish();
}

inline int env_thread_count() {
    const char* env = std::getenv("TD_THREADS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v >= 1 ? v : 1;
}

// ---------------------------------------------------------------------------
// gradcheck scopes
// ---------------------------------------------------------------------------

struct ScopeResult {
    std::string scope;
    GradReport report;
    double tolerance = 0.0;
    bool passed = false;
};

namespace detail {

inline Tensor random_tensor(Shape s, uint64_t seed, double stddev = 1.0) {
    CounterRng rng(seed);
    return randn_tensor(std::move(s), stddev, rng);
}

inline ScopeResult finish_scope(const std::string& scope, GradReport r, double tol) {
    ScopeResult res;
    res.scope = scope;
    res.report = std::move(r);
    res.tolerance = tol;
    res.passed = res.report.max_rel_error < tol;
    return res;
}

inline ScopeResult gradcheck_ops() {
    GradReport worst;
    auto track = [&worst](GradReport r) {
        if (r.max_rel_error > worst.max_rel_error) worst.max_rel_error = r.max_rel_error;
        for (auto& p : r.per_parameter) worst.per_parameter.push_back(std::move(p));
        worst.coords_checked += r.coords_checked;
        worst.coords_nonsmooth += r.coords_nonsmooth;
        worst.coords_unresolvable += r.coords_unresolvable;
    };
    {
        Tensor a = random_tensor({3, 4}, 11), b = random_tensor({4, 2}, 12);
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        Tensor m = random_tensor({3, 2}, 13, 0.5);
        track(grad_check([&] { return sum_all(mul(matmul(a, b), m)); }, {{"matmul.a", a}, {"matmul.b", b}}));
    }
    {
        Tensor x = random_tensor({2, 6}, 14, 2.0);
        x.set_requires_grad(true);
        Tensor m = random_tensor({2, 6}, 15, 0.5);
        track(grad_check([&] { return sum_all(mul(softmax_last(x), m)); }, {{"softmax.x", x}}));
    }
    {
        Tensor x = random_tensor({3, 5}, 16, 1.5);
        Tensor g = random_tensor({5}, 17), bb = random_tensor({5}, 18);
        x.set_requires_grad(true);
        g.set_requires_grad(true);
        bb.set_requires_grad(true);
        Tensor m = random_tensor({3, 5}, 19, 0.5);
        track(grad_check([&] { return sum_all(mul(layer_norm(x, g, bb), m)); },
                         {{"layer_norm.x", x}, {"layer_norm.gamma", g}, {"layer_norm.beta", bb}}));
    }
    {
        Tensor x = random_tensor({1, 2, 5, 5}, 20);
        Tensor w = random_tensor({3, 2, 3, 3}, 21, 0.4);
        Tensor b = random_tensor({3}, 22, 0.2);
        x.set_requires_grad(true);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
        Tensor m = random_tensor({1, 3, 5, 5}, 23, 0.3);
        track(grad_check([&] { return sum_all(mul(conv2d(x, w, b, 1, 1), m)); },
                         {{"conv2d.x", x}, {"conv2d.w", w}, {"conv2d.b", b}}));
    }
    {
        Tensor x = random_tensor({1, 2, 3, 4}, 24);
        x.set_requires_grad(true);
        Tensor m = random_tensor({1, 2, 5, 6}, 25, 0.4);
        track(grad_check([&] { return sum_all(mul(bilinear_resize(x, 5, 6), m)); }, {{"bilinear.x", x}}));
    }
    {
        Tensor x = random_tensor({2, 3, 3, 3}, 26);
        x.set_requires_grad(true);
        track(grad_check([&] { return sum_all(mul(x, sigmoid(global_avg_pool(x)))); }, {{"pool.x", x}}));
    }
    {
        std::vector<double> d(8);
        CounterRng rng(27);
        for (auto& v : d) v = rng.uniform(0.5, 4.0);
        Tensor x = Tensor::from_data({8}, d);
        x.set_requires_grad(true);
        track(grad_check([&] { return sum_all(div(log(x), sqrt(add_scalar(x, 1.0)))); }, {{"log_sqrt.x", x}}));
    }
    {
        Tensor x = random_tensor({6}, 28, 0.6);
        x.set_requires_grad(true);
        Tensor m = random_tensor({6}, 29, 0.5);
        track(grad_check([&] { return sum_all(mul(gelu(x), m)); }, {{"gelu.x", x}}));
    }
    return finish_scope("ops", std::move(worst), 1e-6);
}

inline ModelConfig gradcheck_model_config() {
    ModelConfig cfg;
    cfg.backbone.stem_channels = 8;
    cfg.backbone.stage_channels = {8, 12, 16, 24, 32};
    cfg.transformer.num_layers = 1;
    cfg.transformer.hidden = 16;
    cfg.transformer.num_heads = 2;
    cfg.transformer.head_dim = 8;
    cfg.agd.common_width = 16;
    return cfg;
}

inline Tensor gradcheck_image(int h, int w, uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> d(static_cast<size_t>(3) * h * w);
    for (auto& v : d) v = rng.uniform();
    return Tensor::from_data({1, 3, h, w}, std::move(d));
}

inline ScopeResult gradcheck_encoder() {
    TransDepthModel model = make_model(gradcheck_model_config(), 1001);
    Tensor img = gradcheck_image(32, 32, 1002);
    ParamList params;
    model.backbone.register_params(params, "backbone");
    model.vit.register_params(params, "vit");
    model.vit_unembed.register_params(params, "vit.unembed");
    Tensor m = detail::random_tensor({1, 32, 1, 1}, 1003, 0.4);
    auto f = [&] { return sum_all(mul(model.encode(img).scale(5), m)); };
    GradCheckOptions opts;
    opts.eps = 1e-6;  // curvature through the token path dominates at 1e-5
    opts.refine_eps = {1e-4, 1e-5};
    opts.max_coords_per_param = 4;
    GradReport r = grad_check(f, params, opts);
    return finish_scope("encoder", std::move(r), 1e-5);
}

inline ScopeResult gradcheck_agd() {
    AGDConfig cfg;
    cfg.common_width = 8;
    constexpr std::array<int, 5> ch{8, 12, 16, 24, 32};
    AttentionGateDecoder agd = make_agd(cfg, ch, CounterRng(2001));
    FeaturePyramid pyr;
    for (int s = 1; s <= 5; ++s) {
        const int hw = 64 >> s;
        pyr.f[s - 1] = detail::random_tensor({1, ch[s - 1], hw, hw}, 2010 + static_cast<uint64_t>(s), 0.8);
    }
    ParamList params;
    agd.register_params(params, "agd");
    Tensor m = detail::random_tensor({1, 24, 2, 2}, 2002, 0.5);
    auto f = [&] { return sum_all(mul(agd.fuse(pyr), m)); };
    GradCheckOptions opts;
    // no relu kinks anywhere in the AGD, so a wide step is safe and keeps
    // the fourth-order-small gate gradients above the FD noise floor
    opts.eps = 1e-3;
    opts.refine_eps = {1e-5};
    opts.max_coords_per_param = 8;
    GradReport r = grad_check(f, params, opts);
    return finish_scope("agd", std::move(r), 1e-5);
}

inline ScopeResult gradcheck_losses() {
    GradReport worst;
    {
        CounterRng rng(3001);
        std::vector<double> gd(12), pd(12);
        for (auto& v : gd) v = rng.uniform(0.5, 8.0);
        for (auto& v : pd) v = rng.uniform(0.5, 8.0);
        Tensor gt = Tensor::from_data({1, 1, 3, 4}, gd);
        Tensor pred = Tensor::from_data({1, 1, 3, 4}, pd);
        pred.set_requires_grad(true);
        PixelTarget t = make_depth_target(gt, Tensor::full({1, 1, 3, 4}, 1.0));
        LossConfig lc;
        GradReport r = grad_check([&] { return silog_loss(pred, t, lc); }, {{"silog.pred", pred}});
        if (r.max_rel_error > worst.max_rel_error) worst.max_rel_error = r.max_rel_error;
        for (auto& p : r.per_parameter) worst.per_parameter.push_back(std::move(p));
        worst.coords_checked += r.coords_checked;
        worst.coords_nonsmooth += r.coords_nonsmooth;
        worst.coords_unresolvable += r.coords_unresolvable;
    }
    {
        CounterRng rng(3002);
        const int64_t hw = 6;
        std::vector<double> gd(3 * hw), pd(3 * hw);
        for (int64_t i = 0; i < hw; ++i) {
            double v[3], nn = 0;
            for (auto& x : v) {
                x = rng.normal();
                nn += x * x;
            }
            nn = std::sqrt(nn) + 1e-12;
            for (int c = 0; c < 3; ++c) gd[static_cast<size_t>(c * hw + i)] = v[c] / nn;
        }
        for (auto& v : pd) v = rng.normal(0.0, 0.7);
        Tensor gt = Tensor::from_data({1, 3, 2, 3}, gd);
        Tensor pred = Tensor::from_data({1, 3, 2, 3}, pd);
        pred.set_requires_grad(true);
        PixelTarget t = make_normal_target(gt, Tensor::full({1, 1, 2, 3}, 1.0));
        GradReport r = grad_check([&] { return angular_loss(pred, t); }, {{"angular.pred", pred}});
        if (r.max_rel_error > worst.max_rel_error) worst.max_rel_error = r.max_rel_error;
        for (auto& p : r.per_parameter) worst.per_parameter.push_back(std::move(p));
        worst.coords_checked += r.coords_checked;
        worst.coords_nonsmooth += r.coords_nonsmooth;
        worst.coords_unresolvable += r.coords_unresolvable;
    }
    return finish_scope("losses", std::move(worst), 1e-6);
}

inline ScopeResult gradcheck_full() {
    // the default toy profile: full-width backbone, 2-layer transformer, AGD
    TransDepthModel model = make_model(ModelConfig{}, 4001);
    SynthScene scene = synth_scene(4002, 0, 32, 32);
    Tensor image = reshape(scene.image, {1, 3, 32, 32});
    PixelTarget target = make_depth_target(reshape(scene.depth, {1, 1, 32, 32}), Tensor::full({1, 1, 32, 32}, 1.0));
    ParamList params = model.parameters();
    auto f = [&] { return model.loss(image, target); };
    GradCheckOptions opts;
    opts.eps = 1e-6;  // curvature through the token path dominates at 1e-5
    opts.refine_eps = {1e-4, 1e-5};
    opts.max_coords_per_param = 3;
    GradReport r = grad_check(f, params, opts);
    return finish_scope("full", std::move(r), 1e-5);
}

}  // namespace detail

inline ScopeResult run_gradcheck_scope(const std::string& scope) {
    if (scope == "ops") return detail::gradcheck_ops();
    if (scope == "encoder") return detail::gradcheck_encoder();
    if (scope == "agd") return detail::gradcheck_agd();
    if (scope == "losses") return detail::gradcheck_losses();
    if (scope == "full") return detail::gradcheck_full();
    throw ConfigError("unknown gradcheck scope '" + scope + "' (ops|encoder|agd|losses|full)");
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

struct AblateRow {
    std::string variant;
    double final_loss = 0.0;
    double last_step_loss = 0.0;
    uint64_t data_hash = 0;
    MetricsReport metrics;
};

inline std::vector<std::pair<std::string, ModelConfig>> ablate_variants(const ModelConfig& base,
                                                                        const std::string& axis) {
    std::vector<std::pair<std::string, ModelConfig>> out;
    auto with = [&](const std::string& name, bool vit, bool agd) {
        ModelConfig m = base;
        m.transformer.enabled = vit;
        m.agd.enabled = agd;
        out.emplace_back(name, m);
    };
    if (axis == "modules") {
        with("baseline", false, false);
        with("agd", false, true);
        with("vit", true, false);
        with("agd_vit", true, true);
    } else if (axis == "vit_on_off") {
        with("vit_off", false, base.agd.enabled);
        with("vit_on", true, base.agd.enabled);
    } else if (axis == "agd_on_off") {
        with("agd_off", base.transformer.enabled, false);
        with("agd_on", base.transformer.enabled, true);
    } else if (axis == "emitting_sets") {
        const std::vector<std::vector<int>> sets{{}, {5}, {4, 5}, {3, 4, 5}, {2, 3, 4, 5}};
        for (const auto& set : sets) {
            ModelConfig m = base;
            if (set.empty()) {
                m.agd.enabled = false;
                out.emplace_back("none", m);
            } else {
                m.agd.enabled = true;
                m.agd.emitting_scales = set;
                std::string name = "f";
                for (size_t i = 0; i < set.size(); ++i) name += (i ? "_f" : "") + std::to_string(set[i]);
                out.emplace_back(name, m);
            }
        }
    } else {
        throw ConfigError("unknown ablate axis '" + axis + "' (modules|vit_on_off|agd_on_off|emitting_sets)");
    }
    return out;
}

inline std::vector<AblateRow> ablate_run(const RunConfig& base, const std::string& axis, const std::string& out_csv,
                                         const std::string& work_dir, std::ostream* progress = nullptr) {
    const auto variants = ablate_variants(base.model, axis);
    const uint64_t train_hash = dataset_hash(load_train_dataset(base));
    Dataset eval_ds = load_eval_dataset(base);
    std::vector<AblateRow> rows;
    for (const auto& [name, mcfg] : variants) {
        RunConfig cfg = base;
        cfg.model = mcfg;
        if (progress) (*progress) << "ablate variant " << name << "\n";
        TrainResult tr = train_run(cfg, work_dir + "/" + name, progress);
        TransDepthModel model = load_checkpoint(tr.checkpoint_path);
        AblateRow row;
        row.variant = name;
        row.final_loss = tr.final_loss;
        row.last_step_loss = tr.last_step_loss;
        row.data_hash = train_hash;
        row.metrics = evaluate_model(model, eval_ds, env_thread_count());
        rows.push_back(std::move(row));
    }
    std::ofstream csv(out_csv);
    if (!csv) throw IoError("cannot create '" + out_csv + "'");
    const bool depth = base.model.task == Task::depth;
    csv << "variant,final_loss,last_step_loss,data_hash,";
    if (depth)
        csv << "abs_rel,sq_rel,rms,log10_rms,delta1,delta2,delta3,n_pixels\n";
    else
        csv << "mean_deg,median_deg,pct_11_25,pct_22_5,pct_30,n_pixels\n";
    for (const auto& r : rows) {
        csv << r.variant << "," << std::setprecision(15) << r.final_loss << "," << r.last_step_loss << ","
            << std::hex << r.data_hash << std::dec << ",";
        const auto& m = r.metrics;
        if (depth)
            csv << m.abs_rel << "," << m.sq_rel << "," << m.rms << "," << m.log10_rms << "," << m.delta1 << ","
                << m.delta2 << "," << m.delta3 << "," << m.n_pixels << "\n";
        else
            csv << m.mean_deg << "," << m.median_deg << "," << m.pct_11_25 << "," << m.pct_22_5 << "," << m.pct_30
                << "," << m.n_pixels << "\n";
    }
    return rows;
}

}  // namespace td
