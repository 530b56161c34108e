#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "restyle/checkpoint.hpp"
#include "restyle/experiment.hpp"
#include "restyle/io.hpp"
#include "restyle/trace_io.hpp"

namespace fs = std::filesystem;
using namespace restyle;

namespace {

struct Args {
    std::string config;
    std::string out;
    std::string scheme = "restyle";
    std::string image;
    std::string gen_ckpt;
    std::string enc_ckpt;
    int steps = -1;
    std::int64_t seed = -1;
};

ExperimentConfig load_config(const Args& a) {
    if (a.config.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = ExperimentConfig::load(a.config);
    if (a.seed >= 0) {
        cfg.dataset.seed = static_cast<std::uint64_t>(a.seed);
        cfg.train.seed = static_cast<std::uint64_t>(a.seed);
    }
    if (!a.out.empty()) cfg.out_dir = a.out;
    return cfg;
}

Generator generator_for(const Args& a, const ExperimentConfig& cfg) {
    if (!a.gen_ckpt.empty()) return load_generator(a.gen_ckpt);
    return Generator::build(cfg.generator.seed, cfg.generator.k, cfg.generator.d,
                            cfg.generator.resolution, cfg.generator.avg_samples);
}

fs::path require_out(const Args& a) {
    if (a.out.empty()) throw ConfigError("--out is required");
    return a.out;
}

ImageArray require_image(const Args& a) {
    if (a.image.empty()) throw ConfigError("--image is required (a P6 .ppm file)");
    if (!fs::exists(a.image)) throw ConfigError("image not found: " + a.image);
    return io::read_ppm(a.image);
}

int cmd_gen_build(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    Generator g = Generator::build(cfg.generator.seed, cfg.generator.k, cfg.generator.d,
                                   cfg.generator.resolution, cfg.generator.avg_samples);
    fs::path out = require_out(a);
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
    save_generator(out, g);
    std::printf("generator k=%d d=%d res=%d -> %s\n", g.k(), g.d(), g.resolution(),
                out.string().c_str());
    return 0;
}

int cmd_data_make(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    Generator g = generator_for(a, cfg);
    Dataset data = make_dataset(g, cfg.dataset);
    fs::path out = require_out(a);
    fs::create_directories(out);
    nlohmann::json manifest;
    manifest["size"] = data.size();
    manifest["seed"] = cfg.dataset.seed;
    manifest["source"] = cfg.dataset.source;
    manifest["item_hashes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "item%05d", data.items[i].id);
        io::write_ppm(out / (std::string(name) + ".ppm"), io::image_to_rgb8(data.items[i].image),
                      data.items[i].image.dim(2), data.items[i].image.dim(1));
        if (data.items[i].true_latent)
            io::write_tensor(out / (std::string(name) + ".latent.bin"),
                             *data.items[i].true_latent);
        manifest["item_hashes"].push_back(data.item_hash(i));
    }
    io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
    std::printf("wrote %zu items -> %s\n", data.size(), out.string().c_str());
    return 0;
}

int cmd_invert(const Args& a) {
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a);
    if (a.enc_ckpt.empty()) throw ConfigError("--enc is required");
    Generator g = generator_for(a, cfg);
    Encoder e = load_encoder(a.enc_ckpt);
    ImageArray x = require_image(a);
    int steps = a.steps > 0 ? a.steps : 5;
    InversionTrace t;
    if (a.scheme == "restyle")
        t = restyle_infer(e, g, x, steps);
    else if (a.scheme == "single_pass")
        t = single_pass_infer(e, g, x);
    else if (a.scheme == "naive")
        t = naive_iterate(e, g, x, steps);
    else
        throw ConfigError("unknown scheme '" + a.scheme +
                          "' (expected restyle, single_pass, or naive)");
    save_trace(require_out(a), t);
    std::printf("%s: %zu step records, final l2 %.6f\n", t.scheme.c_str(), t.steps.size(),
                t.final_loss("l2"));
    return 0;
}

int cmd_optimize(const Args& a) {
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a);
    Generator g = generator_for(a, cfg);
    ImageArray x = require_image(a);
    OptimizeOptions opts;
    opts.lr = cfg.eval.opt_lr;
    opts.record_every = cfg.eval.opt_record_every;
    InversionTrace t = optimize_latent(g, x, g.avg_latent(),
                                       a.steps > 0 ? a.steps : cfg.eval.opt_iters, opts);
    save_trace(require_out(a), t);
    std::printf("optimize: %zu records, final l2 %.6f\n", t.steps.size(), t.final_loss("l2"));
    return 0;
}

int cmd_hybrid(const Args& a) {
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a);
    if (a.enc_ckpt.empty()) throw ConfigError("--enc is required");
    Generator g = generator_for(a, cfg);
    Encoder e = load_encoder(a.enc_ckpt);
    ImageArray x = require_image(a);
    OptimizeOptions opts;
    opts.lr = cfg.eval.opt_lr;
    opts.record_every = cfg.eval.opt_record_every;
    InversionTrace t = hybrid_infer(e, g, x, a.steps > 0 ? a.steps : cfg.eval.hybrid_opt_iters,
                                    cfg.eval.hybrid_encoder_steps, opts);
    save_trace(require_out(a), t);
    std::printf("hybrid: %zu records, final l2 %.6f\n", t.steps.size(), t.final_loss("l2"));
    return 0;
}

int cmd_train(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    cfg.eval.n_images = 0;  // training-only run
    cfg.eval.opt_images = 0;
    cfg.bootstrap.enabled = false;
    ExperimentResult r = run_experiment(cfg);
    std::printf("trained %zu encoder(s) -> %s\n", r.encoders.size(), r.dir.string().c_str());
    return 0;
}

int cmd_evaluate(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    ExperimentResult r = run_experiment(cfg);
    std::printf("experiment complete: %zu metric records -> %s\n", r.records.size(),
                r.dir.string().c_str());
    return 0;
}

int cmd_bootstrap(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    cfg.bootstrap.enabled = true;
    ExperimentResult r = run_experiment(cfg);
    if (r.bootstrap)
        std::printf("bootstrapped similarity %.4f vs average %.4f\n",
                    r.bootstrap->bootstrapped_mean_similarity,
                    r.bootstrap->average_mean_similarity);
    return 0;
}

// Recomputes the analysis outputs (diff maps, latent table, curves) from the
// traces and metrics already on disk in an experiment directory.
int cmd_analyze(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    fs::path dir = cfg.out_dir;
    if (dir.empty()) throw ConfigError("--out (the experiment directory) is required");
    if (!fs::exists(dir / "metrics.jsonl"))
        throw ConfigError("no metrics.jsonl under " + dir.string() + "; run evaluate first");
    Generator g = generator_for(a, cfg);

    std::vector<InversionTrace> traces;
    if (fs::exists(dir / "traces")) {
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(dir / "traces"))
            if (e.is_directory() && e.path().filename().string().starts_with(a.scheme))
                subdirs.push_back(e.path());
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& p : subdirs) traces.push_back(load_trace(p));
    }
    if (!traces.empty()) {
        auto maps = analysis::image_diff_maps(traces, analysis::DiffNormMode::Global);
        fs::create_directories(dir / "heatmaps");
        for (const auto& m : maps)
            io::write_png(dir / "heatmaps" / ("global_t" + std::to_string(m.transition) + ".png"),
                          io::heatmap_to_rgb8(m.map), m.map.dim(1), m.map.dim(0));
        auto table = analysis::latent_change_table(traces, g);
        std::printf("analyzed %zu traces of scheme '%s' (%d styles, %zu steps)\n", traces.size(),
                    a.scheme.c_str(), table.k, table.v.empty() ? 0 : table.v[0].size());
    }
    auto records = analysis::records_from_jsonl(io::read_text(dir / "metrics.jsonl"));
    for (const std::string metric : {"l2", "perceptual"}) {
        auto curves = analysis::quality_time_curves(records, metric);
        io::write_text(dir / ("curves_" + metric + ".csv"), analysis::curves_to_csv(curves, ""));
        if (!curves.empty())
            analysis::render_curves_png(dir / ("curves_" + metric + ".png"), curves);
    }
    return 0;
}

int cmd_report(const Args& a) {
    ExperimentConfig cfg = load_config(a);
    fs::path dir = cfg.out_dir;
    if (dir.empty() || !fs::exists(dir / "metrics.jsonl"))
        throw ConfigError("--out must point at an experiment directory with metrics.jsonl");
    ExperimentResult r;
    r.dir = dir;
    r.records = analysis::records_from_jsonl(io::read_text(dir / "metrics.jsonl"));
    const int train_n = static_cast<int>(cfg.dataset.size * cfg.train_ratio + 0.5);
    r.train_set.items.resize(static_cast<std::size_t>(train_n));
    r.test_set.items.resize(static_cast<std::size_t>(cfg.dataset.size - train_n));
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv" &&
            e.path().filename().string().starts_with("summary"))
            r.summary_csvs.push_back(e.path().filename().string());
    std::sort(r.summary_csvs.begin(), r.summary_csvs.end());
    write_report(r, cfg);
    std::printf("report -> %s\n", (dir / "report.md").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterative residual GAN-inversion toolkit"};
    app.require_subcommand(1);
    Args a;

    auto add_common = [&](CLI::App* sub, bool needs_model) {
        sub->add_option("--config", a.config, "experiment config (json)");
        sub->add_option("--out", a.out, "output path");
        sub->add_option("--seed", a.seed, "override dataset/train seed");
        sub->add_option("--steps", a.steps, "step / iteration count");
        if (needs_model) {
            sub->add_option("--gen", a.gen_ckpt, "generator checkpoint");
            sub->add_option("--enc", a.enc_ckpt, "encoder checkpoint");
            sub->add_option("--image", a.image, "input image (.ppm)");
        }
        return sub;
    };

    auto* gen_build = add_common(app.add_subcommand("gen-build", "build + save a generator"), false);
    auto* data_make = add_common(app.add_subcommand("data-make", "synthesize a dataset"), true);
    auto* train = add_common(app.add_subcommand("train", "train the configured encoders"), false);
    auto* invert = add_common(app.add_subcommand("invert", "encoder-based inversion"), true);
    invert->add_option("--scheme", a.scheme, "restyle | single_pass | naive");
    auto* optimize = add_common(app.add_subcommand("optimize", "per-image latent optimization"), true);
    auto* hybrid = add_common(app.add_subcommand("hybrid", "encoder init + optimization"), true);
    auto* evaluate = add_common(app.add_subcommand("evaluate", "full experiment pipeline"), false);
    auto* analyze = add_common(app.add_subcommand("analyze", "recompute analysis outputs"), false);
    analyze->add_option("--scheme", a.scheme, "trace scheme prefix to analyze");
    auto* bootstrap = add_common(app.add_subcommand("bootstrap", "stylized-domain comparison"), false);
    auto* report = add_common(app.add_subcommand("report", "regenerate report.md"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // usage text, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen_build->parsed()) return cmd_gen_build(a);
        if (data_make->parsed()) return cmd_data_make(a);
        if (train->parsed()) return cmd_train(a);
        if (invert->parsed()) return cmd_invert(a);
        if (optimize->parsed()) return cmd_optimize(a);
        if (hybrid->parsed()) return cmd_hybrid(a);
        if (evaluate->parsed()) return cmd_evaluate(a);
        if (analyze->parsed()) return cmd_analyze(a);
        if (bootstrap->parsed()) return cmd_bootstrap(a);
        if (report->parsed()) return cmd_report(a);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
