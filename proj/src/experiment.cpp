#include "restyle/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "restyle/io.hpp"
#include "restyle/trace_io.hpp"

namespace restyle {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config serialization -----------------------------------------------

json ExperimentConfig::to_json() const {
    json j;
    j["generator"] = {{"seed", generator.seed},
                      {"k", generator.k},
                      {"d", generator.d},
                      {"resolution", generator.resolution},
                      {"avg_samples", generator.avg_samples}};
    j["dataset"] = {{"source", dataset.source},
                    {"directory", dataset.directory},
                    {"size", dataset.size},
                    {"seed", dataset.seed},
                    {"latent_jitter", dataset.latent_jitter}};
    j["train_ratio"] = train_ratio;
    j["encoders"] = json::array();
    for (const auto& e : encoders)
        j["encoders"].push_back({{"name", e.name},
                                 {"variant", e.variant},
                                 {"in_channels", e.in_channels},
                                 {"n_steps", e.n_steps},
                                 {"domain", e.domain},
                                 {"seed", e.seed}});
    j["train"] = {{"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"total_iterations", train.total_iterations},
                  {"seed", train.seed},
                  {"isolated_backprop", train.isolated_backprop},
                  {"weights",
                   {{"l2", train.weights.l2},
                    {"perceptual", train.weights.perceptual},
                    {"similarity", train.weights.similarity}}}};
    j["eval"] = {{"n_images", eval.n_images},
                 {"max_steps", eval.max_steps},
                 {"opt_images", eval.opt_images},
                 {"opt_iters", eval.opt_iters},
                 {"opt_record_every", eval.opt_record_every},
                 {"opt_lr", eval.opt_lr},
                 {"hybrid_opt_iters", eval.hybrid_opt_iters},
                 {"hybrid_encoder_steps", eval.hybrid_encoder_steps},
                 {"trace_count", eval.trace_count}};
    j["bootstrap"] = {{"enabled", bootstrap.enabled},
                      {"transform", bootstrap.transform},
                      {"finetune_steps", bootstrap.finetune_steps},
                      {"finetune_seed", bootstrap.finetune_seed},
                      {"n_images", bootstrap.n_images},
                      {"n_steps", bootstrap.n_steps},
                      {"alignment_samples", bootstrap.alignment_samples}};
    j["losses_seed"] = losses_seed;
    j["out_dir"] = out_dir;
    j["n_threads"] = n_threads;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("generator")) {
            const auto& g = j["generator"];
            c.generator.seed = g.value("seed", c.generator.seed);
            c.generator.k = g.value("k", c.generator.k);
            c.generator.d = g.value("d", c.generator.d);
            c.generator.resolution = g.value("resolution", c.generator.resolution);
            c.generator.avg_samples = g.value("avg_samples", c.generator.avg_samples);
        }
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.dataset.source = d.value("source", c.dataset.source);
            c.dataset.directory = d.value("directory", c.dataset.directory);
            c.dataset.size = d.value("size", c.dataset.size);
            c.dataset.seed = d.value("seed", c.dataset.seed);
            c.dataset.latent_jitter = d.value("latent_jitter", c.dataset.latent_jitter);
        }
        c.train_ratio = j.value("train_ratio", c.train_ratio);
        if (j.contains("encoders")) {
            c.encoders.clear();
            for (const auto& e : j["encoders"]) {
                EncoderSpec spec;
                spec.name = e.value("name", spec.name);
                spec.variant = e.value("variant", spec.variant);
                spec.in_channels = e.value("in_channels", spec.in_channels);
                spec.n_steps = e.value("n_steps", spec.n_steps);
                spec.domain = e.value("domain", spec.domain);
                spec.seed = e.value("seed", spec.seed);
                c.encoders.push_back(std::move(spec));
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.total_iterations = t.value("total_iterations", c.train.total_iterations);
            c.train.seed = t.value("seed", c.train.seed);
            c.train.isolated_backprop = t.value("isolated_backprop", c.train.isolated_backprop);
            if (t.contains("weights")) {
                c.train.weights.l2 = t["weights"].value("l2", c.train.weights.l2);
                c.train.weights.perceptual =
                    t["weights"].value("perceptual", c.train.weights.perceptual);
                c.train.weights.similarity =
                    t["weights"].value("similarity", c.train.weights.similarity);
            }
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            c.eval.n_images = e.value("n_images", c.eval.n_images);
            c.eval.max_steps = e.value("max_steps", c.eval.max_steps);
            c.eval.opt_images = e.value("opt_images", c.eval.opt_images);
            c.eval.opt_iters = e.value("opt_iters", c.eval.opt_iters);
            c.eval.opt_record_every = e.value("opt_record_every", c.eval.opt_record_every);
            c.eval.opt_lr = e.value("opt_lr", c.eval.opt_lr);
            c.eval.hybrid_opt_iters = e.value("hybrid_opt_iters", c.eval.hybrid_opt_iters);
            c.eval.hybrid_encoder_steps =
                e.value("hybrid_encoder_steps", c.eval.hybrid_encoder_steps);
            c.eval.trace_count = e.value("trace_count", c.eval.trace_count);
        }
        if (j.contains("bootstrap")) {
            const auto& b = j["bootstrap"];
            c.bootstrap.enabled = b.value("enabled", c.bootstrap.enabled);
            c.bootstrap.transform = b.value("transform", c.bootstrap.transform);
            c.bootstrap.finetune_steps = b.value("finetune_steps", c.bootstrap.finetune_steps);
            c.bootstrap.finetune_seed = b.value("finetune_seed", c.bootstrap.finetune_seed);
            c.bootstrap.n_images = b.value("n_images", c.bootstrap.n_images);
            c.bootstrap.n_steps = b.value("n_steps", c.bootstrap.n_steps);
            c.bootstrap.alignment_samples =
                b.value("alignment_samples", c.bootstrap.alignment_samples);
        }
        c.losses_seed = j.value("losses_seed", c.losses_seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.n_threads = j.value("n_threads", c.n_threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::uint64_t ExperimentConfig::hash() const {
    // identifies the scientific configuration; where it runs is irrelevant
    json j = to_json();
    j.erase("out_dir");
    j.erase("n_threads");
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string ExperimentConfig::hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

// ---- pipeline ------------------------------------------------------------

namespace {

std::string image_id_of(const DatasetItem& item) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img%04d", item.id);
    return buf;
}

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage '") + name + "' failed: " + e.what());
    }
}

std::string csv_header(const ExperimentConfig& cfg) {
    return "config_hash=" + cfg.hash_hex() + " seed=" + std::to_string(cfg.dataset.seed);
}

void write_csv(ExperimentResult& result, const fs::path& name, const std::string& body,
               const ExperimentConfig& cfg, bool reproducible) {
    std::string text = "# " + csv_header(cfg) + "\n" + body;
    io::write_text(result.dir / name, text);
    if (reproducible) result.summary_csvs.push_back(name.string());
}

void write_train_log(ExperimentResult& result, const ExperimentConfig& cfg,
                     const std::string& name, const TrainLog& log) {
    std::ostringstream os;
    os << "iteration,step,loss\n";
    for (std::size_t it = 0; it < log.step_losses.size(); ++it)
        for (std::size_t s = 0; s < log.step_losses[it].size(); ++s)
            os << it << "," << s << "," << io::format_double(log.step_losses[it][s]) << "\n";
    write_csv(result, "train_log_" + name + ".csv", os.str(), cfg, true);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("run_experiment: out_dir is required");
    ExperimentResult result;
    result.dir = cfg.out_dir;
    fs::create_directories(result.dir);
    fs::create_directories(result.dir / "checkpoints");
    fs::create_directories(result.dir / "traces");
    io::write_text(result.dir / "config.json", cfg.to_json().dump(2) + "\n");

    const PerceptualNet pnet(cfg.losses_seed);
    const SimilarityNet snet(cfg.losses_seed);
    InferOptions iopts;
    iopts.pnet = &pnet;
    iopts.snet = &snet;

    // -- generator --------------------------------------------------------
    stage("generator", [&] {
        result.generator = Generator::build(cfg.generator.seed, cfg.generator.k,
                                            cfg.generator.d, cfg.generator.resolution,
                                            cfg.generator.avg_samples);
        save_generator(result.dir / "checkpoints" / "generator.ckpt", *result.generator);
        return 0;
    });
    const Generator& g = *result.generator;

    if (cfg.bootstrap.enabled) {
        stage("stylized-generator", [&] {
            result.styled_generator = g.finetune_stylized(
                cfg.bootstrap.transform, cfg.bootstrap.finetune_steps,
                cfg.bootstrap.finetune_seed);
            save_generator(result.dir / "checkpoints" / "generator_styled.ckpt",
                           *result.styled_generator);
            return 0;
        });
    }

    // -- dataset ----------------------------------------------------------
    stage("dataset", [&] {
        Dataset all = make_dataset(g, cfg.dataset);
        auto [train_set, test_set] = split_dataset(all, cfg.train_ratio, cfg.dataset.seed);
        result.train_set = std::move(train_set);
        result.test_set = std::move(test_set);
        return 0;
    });

    // -- training ---------------------------------------------------------
    for (const auto& spec : cfg.encoders) {
        stage("train", [&] {
            const bool styled = spec.domain == "styled";
            if (styled && !result.styled_generator)
                throw ConfigError("encoder '" + spec.name +
                                  "' targets the styled domain but bootstrap is disabled");
            const Generator& target_g = styled ? *result.styled_generator : g;
            Dataset data = styled
                               ? with_transformed_targets(result.train_set, cfg.bootstrap.transform)
                               : result.train_set;
            Encoder enc = Encoder::build(encoder_variant_from_string(spec.variant),
                                         spec.in_channels, target_g, spec.seed);
            TrainConfig tcfg = cfg.train;
            tcfg.n_steps = spec.n_steps;
            tcfg.n_threads = cfg.n_threads;
            TrainLog log;
            Encoder trained = restyle_train(enc, target_g, data, tcfg, pnet, snet, &log);
            save_encoder(result.dir / "checkpoints" / (spec.name + ".ckpt"), trained);
            write_train_log(result, cfg, spec.name, log);
            result.encoders.emplace(spec.name, std::move(trained));
            return 0;
        });
    }

    // -- evaluation -------------------------------------------------------
    const int n_eval = std::min<int>(cfg.eval.n_images, static_cast<int>(result.test_set.size()));
    std::vector<std::string> eval_ids;
    for (int i = 0; i < n_eval; ++i) eval_ids.push_back(image_id_of(result.test_set.items[i]));

    stage("evaluate", [&] {
        for (const auto& spec : cfg.encoders) {
            if (spec.domain != "base") continue;
            const Encoder& enc = result.encoders.at(spec.name);
            std::vector<InversionTrace> traces(static_cast<std::size_t>(n_eval));
            nn::parallel_for(n_eval, cfg.n_threads, [&](int i) {
                const ImageArray& x = result.test_set.items[static_cast<std::size_t>(i)].image;
                traces[static_cast<std::size_t>(i)] =
                    enc.in_channels() == 6
                        ? restyle_infer(enc, g, x, cfg.eval.max_steps, iopts)
                        : naive_iterate(enc, g, x, cfg.eval.max_steps, iopts);
            });
            for (auto& t : traces) t.scheme = spec.name;
            auto recs = analysis::records_from_traces(traces, eval_ids);
            result.records.insert(result.records.end(), recs.begin(), recs.end());
            for (int i = 0; i < std::min(cfg.eval.trace_count, n_eval); ++i)
                save_trace(result.dir / "traces" / (spec.name + "_" + eval_ids[static_cast<std::size_t>(i)]),
                           traces[static_cast<std::size_t>(i)]);
            result.traces.emplace(spec.name, std::move(traces));
        }

        const int n_opt = std::min(cfg.eval.opt_images, n_eval);
        if (n_opt > 0 && cfg.eval.opt_iters > 0) {
            OptimizeOptions oopts;
            oopts.lr = cfg.eval.opt_lr;
            oopts.record_every = cfg.eval.opt_record_every;
            oopts.pnet = &pnet;
            oopts.snet = &snet;
            std::vector<InversionTrace> opt_traces(static_cast<std::size_t>(n_opt));
            nn::parallel_for(n_opt, cfg.n_threads, [&](int i) {
                const ImageArray& x = result.test_set.items[static_cast<std::size_t>(i)].image;
                opt_traces[static_cast<std::size_t>(i)] =
                    optimize_latent(g, x, g.avg_latent(), cfg.eval.opt_iters, oopts);
            });
            std::vector<std::string> opt_ids(eval_ids.begin(), eval_ids.begin() + n_opt);
            auto recs = analysis::records_from_traces(opt_traces, opt_ids);
            result.records.insert(result.records.end(), recs.begin(), recs.end());
            for (int i = 0; i < std::min(cfg.eval.trace_count, n_opt); ++i)
                save_trace(result.dir / "traces" / ("optimize_" + opt_ids[static_cast<std::size_t>(i)]),
                           opt_traces[static_cast<std::size_t>(i)]);
            result.traces.emplace("optimize", std::move(opt_traces));
        }

        // hybrid from the first base 6-channel encoder
        const EncoderSpec* hybrid_spec = nullptr;
        for (const auto& spec : cfg.encoders)
            if (spec.domain == "base" && spec.in_channels == 6) {
                hybrid_spec = &spec;
                break;
            }
        if (hybrid_spec && n_opt > 0 && cfg.eval.hybrid_opt_iters > 0) {
            const Encoder& enc = result.encoders.at(hybrid_spec->name);
            OptimizeOptions oopts;
            oopts.lr = cfg.eval.opt_lr;
            oopts.record_every = cfg.eval.opt_record_every;
            oopts.pnet = &pnet;
            oopts.snet = &snet;
            std::vector<InversionTrace> hybrid_traces(static_cast<std::size_t>(n_opt));
            nn::parallel_for(n_opt, cfg.n_threads, [&](int i) {
                const ImageArray& x = result.test_set.items[static_cast<std::size_t>(i)].image;
                hybrid_traces[static_cast<std::size_t>(i)] =
                    hybrid_infer(enc, g, x, cfg.eval.hybrid_opt_iters,
                                 cfg.eval.hybrid_encoder_steps, oopts);
            });
            std::vector<std::string> ids(eval_ids.begin(), eval_ids.begin() + n_opt);
            auto recs = analysis::records_from_traces(hybrid_traces, ids);
            result.records.insert(result.records.end(), recs.begin(), recs.end());
            for (int i = 0; i < std::min(cfg.eval.trace_count, n_opt); ++i)
                save_trace(result.dir / "traces" / ("hybrid_" + ids[static_cast<std::size_t>(i)]),
                           hybrid_traces[static_cast<std::size_t>(i)]);
            result.traces.emplace("hybrid", std::move(hybrid_traces));
        }

        io::write_text(result.dir / "metrics.jsonl", analysis::records_to_jsonl(result.records));
        return 0;
    });

    // -- analysis ---------------------------------------------------------
    stage("analyze", [&] {
        std::ostringstream losses_csv;
        losses_csv << "scheme,step,mean_l2,mean_perceptual,mean_similarity\n";
        std::map<std::string, std::map<int, std::array<double, 4>>> agg;
        for (const auto& r : result.records) {
            auto& cell = agg[r.scheme][r.step];
            cell[0] += r.l2;
            cell[1] += r.perceptual;
            cell[2] += r.similarity;
            cell[3] += 1.0;
        }
        for (const auto& [scheme, by_step] : agg)
            for (const auto& [step, cell] : by_step)
                losses_csv << scheme << "," << step << ","
                           << io::format_double(cell[0] / cell[3]) << ","
                           << io::format_double(cell[1] / cell[3]) << ","
                           << io::format_double(cell[2] / cell[3]) << "\n";
        write_csv(result, "summary_losses.csv", losses_csv.str(), cfg, true);

        // quality-time curves (contain wall-clock values: not bitwise)
        for (const std::string metric : {"l2", "perceptual"}) {
            auto curves = analysis::quality_time_curves(result.records, metric);
            write_csv(result, "curves_" + metric + ".csv",
                      analysis::curves_to_csv(curves, ""), cfg, false);
            if (!curves.empty())
                analysis::render_curves_png(result.dir / ("curves_" + metric + ".png"), curves);
        }

        // diff maps + latent table from the first base 6-channel encoder
        for (const auto& spec : cfg.encoders) {
            if (spec.domain != "base" || spec.in_channels != 6) continue;
            const auto it = result.traces.find(spec.name);
            if (it == result.traces.end() || it->second.empty()) break;
            const auto& traces = it->second;

            auto global_maps = analysis::image_diff_maps(traces, analysis::DiffNormMode::Global);
            auto step_maps = analysis::image_diff_maps(traces, analysis::DiffNormMode::PerStep);
            std::ostringstream diff_csv;
            diff_csv << "transition,mean,max\n";
            for (const auto& m : global_maps)
                diff_csv << m.transition << "," << io::format_double(m.map.mean()) << ","
                         << io::format_double(m.map.max_abs()) << "\n";
            write_csv(result, "summary_diffmaps.csv", diff_csv.str(), cfg, true);
            fs::create_directories(result.dir / "heatmaps");
            for (const auto& m : global_maps)
                io::write_png(result.dir / "heatmaps" /
                                  ("global_t" + std::to_string(m.transition) + ".png"),
                              io::heatmap_to_rgb8(m.map), m.map.dim(1), m.map.dim(0));
            for (const auto& m : step_maps)
                io::write_png(result.dir / "heatmaps" /
                                  ("per_step_t" + std::to_string(m.transition) + ".png"),
                              io::heatmap_to_rgb8(m.map), m.map.dim(1), m.map.dim(0));

            auto table = analysis::latent_change_table(traces, g);
            std::ostringstream lt_csv;
            lt_csv << "style_index,group,step,v\n";
            for (int l = 0; l < table.k; ++l)
                for (std::size_t t = 0; t < table.v[static_cast<std::size_t>(l)].size(); ++t)
                    lt_csv << l << ","
                           << StyleGroups::group_name(g.style_groups().group_of(l)) << ","
                           << (t + 1) << ","
                           << io::format_double(table.v[static_cast<std::size_t>(l)][t]) << "\n";
            write_csv(result, "summary_latent_table.csv", lt_csv.str(), cfg, true);
            break;
        }
        return 0;
    });

    // -- bootstrap ---------------------------------------------------------
    if (cfg.bootstrap.enabled) {
        stage("bootstrap", [&] {
            const Encoder* e_base = nullptr;
            const Encoder* e_styled = nullptr;
            for (const auto& spec : cfg.encoders) {
                if (spec.domain == "base" && spec.in_channels == 6 && !e_base)
                    e_base = &result.encoders.at(spec.name);
                if (spec.domain == "styled" && !e_styled)
                    e_styled = &result.encoders.at(spec.name);
            }
            if (!e_base || !e_styled)
                throw ConfigError("bootstrap needs one base and one styled 6-channel encoder");

            const int n = std::min<int>(cfg.bootstrap.n_images,
                                        static_cast<int>(result.test_set.size()));
            BootstrapComparison cmp;
            std::ostringstream csv;
            csv << "image_id,init_mode,step,l2_to_target,similarity\n";
            struct Row {
                std::array<double, 2> sim{0.0, 0.0}, l2{0.0, 0.0};
                std::array<std::vector<std::pair<double, double>>, 2> steps;
            };
            std::vector<Row> rows(static_cast<std::size_t>(n));
            nn::parallel_for(n, cfg.n_threads, [&](int i) {
                const ImageArray& x = result.test_set.items[static_cast<std::size_t>(i)].image;
                const ImageArray target = apply_pixel_transform(cfg.bootstrap.transform, x);
                for (int mode = 0; mode < 2; ++mode) {
                    auto res = bootstrap_invert(
                        *e_base, *e_styled, g, *result.styled_generator, x,
                        cfg.bootstrap.n_steps,
                        mode == 0 ? InitMode::Average : InitMode::Bootstrapped);
                    for (const auto& step : res.styled_trace.steps)
                        rows[static_cast<std::size_t>(i)].steps[static_cast<std::size_t>(mode)]
                            .push_back({l2_loss(step.y_hat, target),
                                        snet.similarity(step.y_hat, target)});
                    const ImageArray& out = res.styled_trace.steps.back().y_hat;
                    rows[static_cast<std::size_t>(i)].l2[static_cast<std::size_t>(mode)] =
                        l2_loss(out, target);
                    rows[static_cast<std::size_t>(i)].sim[static_cast<std::size_t>(mode)] =
                        snet.similarity(out, target);
                }
            });
            for (int i = 0; i < n; ++i) {
                const auto& row = rows[static_cast<std::size_t>(i)];
                for (int mode = 0; mode < 2; ++mode) {
                    const char* mode_name = mode == 0 ? "average" : "bootstrapped";
                    const auto& steps = row.steps[static_cast<std::size_t>(mode)];
                    for (std::size_t t = 0; t < steps.size(); ++t)
                        csv << image_id_of(result.test_set.items[static_cast<std::size_t>(i)])
                            << "," << mode_name << "," << t << ","
                            << io::format_double(steps[t].first) << ","
                            << io::format_double(steps[t].second) << "\n";
                }
                cmp.average_mean_l2 += row.l2[0] / n;
                cmp.average_mean_similarity += row.sim[0] / n;
                cmp.bootstrapped_mean_l2 += row.l2[1] / n;
                cmp.bootstrapped_mean_similarity += row.sim[1] / n;
            }
            write_csv(result, "bootstrap_comparison.csv", csv.str(), cfg, true);

            cmp.alignment = alignment_probe(g, *result.styled_generator,
                                            cfg.bootstrap.alignment_samples, cfg.dataset.seed);
            json areport;
            areport["paired_mean"] = cmp.alignment.paired_mean;
            areport["shuffled_mean"] = cmp.alignment.shuffled_mean;
            areport["se_diff"] = cmp.alignment.se_diff;
            areport["pass"] = cmp.alignment.pass;
            areport["n_samples"] = cfg.bootstrap.alignment_samples;
            io::write_text(result.dir / "alignment.json", areport.dump(2) + "\n");
            result.bootstrap = std::move(cmp);
            return 0;
        });
    }

    stage("report", [&] {
        write_report(result, cfg);
        return 0;
    });
    return result;
}

void write_report(const ExperimentResult& result, const ExperimentConfig& cfg) {
    std::ostringstream md;
    md << "# Experiment report\n\n";
    md << "config hash: `" << cfg.hash_hex() << "`\n\n";
    md << "- generator: k=" << cfg.generator.k << ", d=" << cfg.generator.d
       << ", resolution=" << cfg.generator.resolution << ", seed=" << cfg.generator.seed << "\n";
    md << "- dataset: " << result.train_set.size() << " train / " << result.test_set.size()
       << " test (seed " << cfg.dataset.seed << ")\n";
    md << "- training: " << cfg.train.total_iterations << " iterations, batch "
       << cfg.train.batch_size << ", lr " << cfg.train.learning_rate << "\n\n";

    md << "## Final reconstruction losses (mean over " << cfg.eval.n_images << " images)\n\n";
    md << "| scheme | step | L2 | perceptual | similarity |\n";
    md << "|---|---|---|---|---|\n";
    std::map<std::string, std::map<int, std::array<double, 4>>> agg;
    for (const auto& r : result.records) {
        auto& cell = agg[r.scheme][r.step];
        cell[0] += r.l2;
        cell[1] += r.perceptual;
        cell[2] += r.similarity;
        cell[3] += 1.0;
    }
    for (const auto& [scheme, by_step] : agg) {
        if (by_step.empty()) continue;
        const auto& [step, cell] = *by_step.rbegin();
        char row[256];
        std::snprintf(row, sizeof(row), "| %s | %d | %.5f | %.5f | %.4f |\n", scheme.c_str(),
                      step, cell[0] / cell[3], cell[1] / cell[3], cell[2] / cell[3]);
        md << row;
    }
    md << "\n";

    if (result.bootstrap) {
        md << "## Bootstrapping\n\n";
        md << "- similarity to target: bootstrapped "
           << result.bootstrap->bootstrapped_mean_similarity << " vs average "
           << result.bootstrap->average_mean_similarity << "\n";
        md << "- alignment probe: paired " << result.bootstrap->alignment.paired_mean
           << " vs shuffled " << result.bootstrap->alignment.shuffled_mean << " (se "
           << result.bootstrap->alignment.se_diff << ")\n\n";
    }

    md << "## Reproducible summary files\n\n";
    md << "These files are bit-identical across re-runs with the same config and seeds\n";
    md << "(wall-clock-bearing outputs such as curves and metrics.jsonl are excluded):\n\n";
    for (const auto& f : result.summary_csvs) md << "- " << f << "\n";
    io::write_text(result.dir / "report.md", md.str());
}

}  // namespace restyle
