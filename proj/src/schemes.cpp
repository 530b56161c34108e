#include "restyle/schemes.hpp"

#include <chrono>
#include <cmath>

namespace restyle {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::map<std::string, double> step_losses(const ImageArray& y, const ImageArray& x,
                                          const InferOptions& opts) {
    std::map<std::string, double> m;
    m["l2"] = l2_loss(y, x);
    if (opts.pnet) m["perceptual"] = opts.pnet->loss(y, x);
    if (opts.snet) m["similarity"] = opts.snet->similarity(y, x);
    return m;
}

void check_input(const Generator& g, const ImageArray& x) {
    if (x.ndim() != 3 || x.dim(0) != 3 || x.dim(1) != g.resolution() || x.dim(2) != g.resolution())
        throw ContractError("inversion input shape " + x.shape_str() +
                            " does not match generator resolution");
}

// Shared iterative loop. ReStyle feeds concat(x, y_t) and adds residuals to
// w_t; the naive ablation feeds y_t alone and reads absolute latents
// (head output + average latent).
InversionTrace iterate(const Encoder& e, const Generator& g, const ImageArray& x,
                       int n_steps, bool naive, const InferOptions& opts) {
    check_input(g, x);
    if (n_steps < (naive ? 0 : 1)) throw ContractError("n_steps too small");
    if (!naive && e.in_channels() != 6)
        throw ContractError("restyle_infer requires a 6-channel encoder");
    if (naive && e.in_channels() != 3)
        throw ContractError("naive_iterate requires a 3-channel encoder");

    InversionTrace trace;
    trace.scheme = naive ? "naive" : (n_steps == 1 ? "single_pass" : "restyle");
    trace.metadata["n_steps"] = n_steps;
    trace.metadata["init"] = naive ? "avg_latent_with_input_image" : "avg_latent";
    trace.metadata["encoder_variant"] = to_string(e.variant());

    const auto t0 = Clock::now();
    LatentCode w = g.avg_latent();
    // naive: the first pass sees the input image itself
    ImageArray y = naive ? x : g.synthesize(w);
    double model_time = seconds_since(t0);

    StepRecord init;
    init.w = w;
    init.y_hat = y;
    init.losses = step_losses(y, x, opts);
    init.wall_clock_s = model_time;
    trace.steps.push_back(std::move(init));

    for (int t = 0; t < n_steps; ++t) {
        const auto ts = Clock::now();
        ResidualCode out = e.encode(naive ? y : concat_input(x, y));
        // store the update first and build w_{t+1} as w_t + delta, so the
        // recorded chain replays exactly in floating point
        LatentCode delta = naive ? g.avg_latent() + out - w : std::move(out);
        LatentCode w_next = w + delta;
        ImageArray y_next = g.synthesize(w_next);
        model_time += seconds_since(ts);

        StepRecord rec;
        rec.delta = std::move(delta);
        rec.w = w_next;
        rec.y_hat = y_next;
        rec.losses = step_losses(y_next, x, opts);
        rec.wall_clock_s = model_time;
        trace.steps.push_back(std::move(rec));
        w = std::move(w_next);
        y = std::move(y_next);
    }
    return trace;
}

}  // namespace

bool InversionTrace::replay_exact() const {
    for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
        const LatentCode& w = steps[t].w;
        const LatentCode& wn = steps[t + 1].w;
        const ResidualCode& dl = steps[t + 1].delta;
        if (!w.same_shape(wn) || !dl.same_shape(w)) return false;
        for (std::size_t i = 0; i < w.numel(); ++i)
            if (wn[i] != w[i] + dl[i]) return false;
    }
    return true;
}

double InversionTrace::final_loss(const std::string& name) const {
    if (steps.empty()) throw ContractError("empty trace");
    return steps.back().losses.at(name);
}

InversionTrace restyle_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                             int n_steps, const InferOptions& opts) {
    return iterate(e, g, x, n_steps, false, opts);
}

InversionTrace single_pass_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                                 const InferOptions& opts) {
    InversionTrace t = iterate(e, g, x, 1, false, opts);
    t.scheme = "single_pass";
    return t;
}

InversionTrace naive_iterate(const Encoder& e3, const Generator& g, const ImageArray& x,
                             int n_steps, const InferOptions& opts) {
    return iterate(e3, g, x, n_steps, true, opts);
}

InversionTrace optimize_latent(const Generator& g, const ImageArray& x,
                               const LatentCode& init, int n_iters,
                               const OptimizeOptions& opts) {
    check_input(g, x);
    if (n_iters < 0) throw ContractError("optimize_latent: n_iters must be >= 0");

    InversionTrace trace;
    trace.scheme = "optimize";
    trace.metadata["n_iters"] = n_iters;
    trace.metadata["lr"] = opts.lr;
    trace.metadata["record_every"] = opts.record_every;

    InferOptions record_opts;
    record_opts.pnet = opts.pnet;
    record_opts.snet = opts.snet;

    LatentCode w = init;
    double model_time = 0.0;
    bool diverged = false;

    auto record = [&](const ImageArray& y, const LatentCode& prev_w, bool first) {
        StepRecord rec;
        if (first) {
            rec.w = w;
        } else {
            // recorded latents form an exactly replayable chain; the stored w
            // is prev + delta, at most one rounding step from the iterate
            rec.delta = w - prev_w;
            rec.w = prev_w + rec.delta;
        }
        rec.y_hat = y;
        rec.losses = step_losses(y, x, record_opts);
        rec.wall_clock_s = model_time;
        trace.steps.push_back(std::move(rec));
    };

    {
        const auto ts = Clock::now();
        ImageArray y0 = g.synthesize(w);
        model_time += seconds_since(ts);
        record(y0, w, true);
    }

    LatentCode last_recorded_w = w;
    for (int it = 1; it <= n_iters; ++it) {
        const auto ts = Clock::now();
        Generator::SynthCache cache;
        ImageArray y = g.synthesize_cached(w, cache);
        Tensor dy(y.shape());
        LossBreakdown lb = weighted_loss(opts.pnet, opts.snet, y, x, opts.weights, &dy);
        LatentCode dw = g.synthesize_backward(cache, dy);
        for (std::size_t i = 0; i < w.numel(); ++i) w[i] -= opts.lr * dw[i];
        model_time += seconds_since(ts);

        if (!std::isfinite(lb.total) || lb.total > opts.divergence_threshold) {
            diverged = true;
            trace.metadata["diverged_at"] = it;
            break;
        }
        if (it % opts.record_every == 0 || it == n_iters) {
            const auto tr = Clock::now();
            ImageArray yr = g.synthesize(w);
            model_time += seconds_since(tr);
            record(yr, last_recorded_w, false);
            last_recorded_w = trace.steps.back().w;
        }
    }
    trace.metadata["diverged"] = diverged;
    return trace;
}

InversionTrace hybrid_infer(const Encoder& e, const Generator& g, const ImageArray& x,
                            int n_opt_iters, int encoder_steps, const OptimizeOptions& opts) {
    InferOptions iopts;
    iopts.pnet = opts.pnet;
    iopts.snet = opts.snet;
    InversionTrace enc_trace = restyle_infer(e, g, x, encoder_steps, iopts);
    enc_trace.scheme = "hybrid";
    enc_trace.metadata["encoder_scheme"] = encoder_steps == 1 ? "single_pass" : "restyle";
    enc_trace.metadata["encoder_steps"] = encoder_steps;
    enc_trace.metadata["n_opt_iters"] = n_opt_iters;
    if (n_opt_iters == 0) return enc_trace;

    InversionTrace opt_trace =
        optimize_latent(g, x, enc_trace.steps.back().w, n_opt_iters, opts);
    const double t_off = enc_trace.steps.back().wall_clock_s;
    LatentCode prev_w = enc_trace.steps.back().w;
    for (std::size_t i = 0; i < opt_trace.steps.size(); ++i) {
        StepRecord rec = opt_trace.steps[i];
        rec.wall_clock_s += t_off;
        if (i == 0) rec.delta = rec.w - prev_w;  // zero by construction
        enc_trace.steps.push_back(std::move(rec));
    }
    enc_trace.metadata["diverged"] = opt_trace.metadata.value("diverged", false);
    return enc_trace;
}

// ---- training ----------------------------------------------------------

void TrainConfig::validate() const {
    if (n_steps < 1) throw ConfigError("TrainConfig: n_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (total_iterations < 0) throw ConfigError("TrainConfig: total_iterations must be >= 0");
    if (weights.l2 < 0 || weights.perceptual < 0 || weights.similarity < 0)
        throw ConfigError("TrainConfig: loss weights must be >= 0");
    if (weights.l2 + weights.perceptual + weights.similarity <= 0)
        throw ConfigError("TrainConfig: at least one loss weight must be positive");
}

namespace {

struct ItemState {
    LatentCode w;
    ImageArray y;
    const DatasetItem* item = nullptr;
};

struct StepWork {
    nn::GradStore backbone;
    nn::GradStore heads;
    double loss = 0.0;
};

}  // namespace

Encoder restyle_train(const Encoder& e, const Generator& g, const Dataset& data,
                      const TrainConfig& cfg, const PerceptualNet& pnet,
                      const SimilarityNet& snet, TrainLog* log) {
    cfg.validate();
    if (cfg.total_iterations > 0 && data.empty())
        throw ContractError("restyle_train: empty dataset");

    Encoder enc = e;
    if (cfg.total_iterations == 0) return enc;

    const auto t0 = Clock::now();
    nn::Adam opt_backbone(enc.backbone_params, cfg.learning_rate);
    nn::Adam opt_heads(enc.head_params, cfg.learning_rate);
    Rng batch_rng(Rng::mix(cfg.seed, 0x5452414EULL));

    const LatentCode& w0 = g.avg_latent();
    const ImageArray y0 = g.synthesize(w0);
    const int B = cfg.batch_size;

    std::vector<StepWork> work(static_cast<std::size_t>(B));
    for (auto& wk : work) {
        wk.backbone = nn::GradStore(enc.backbone_params);
        wk.heads = nn::GradStore(enc.head_params);
    }
    nn::GradStore gb(enc.backbone_params), gh(enc.head_params);

    for (int iter = 0; iter < cfg.total_iterations; ++iter) {
        std::vector<ItemState> states(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            const auto idx = static_cast<std::size_t>(batch_rng.next_below(data.size()));
            states[static_cast<std::size_t>(b)] = {w0, y0, &data.items[idx]};
        }
        std::vector<double> iter_losses;

        if (cfg.isolated_backprop) {
            // per-step update; carried latents/images are detached
            for (int t = 0; t < cfg.n_steps; ++t) {
                nn::parallel_for(B, cfg.n_threads, [&](int b) {
                    auto& st = states[static_cast<std::size_t>(b)];
                    auto& wk = work[static_cast<std::size_t>(b)];
                    wk.backbone.zero();
                    wk.heads.zero();
                    // 3-channel (conventional) encoders see the image itself
                    // first, then their own previous output
                    const ImageArray input =
                        enc.in_channels() == 6 ? concat_input(st.item->image, st.y)
                                               : (t == 0 ? st.item->image : st.y);
                    Encoder::EncodeCache ec;
                    ResidualCode delta = enc.encode_cached(input, ec);
                    LatentCode w_next = st.w + delta;
                    Generator::SynthCache sc;
                    ImageArray y_next = g.synthesize_cached(w_next, sc);
                    Tensor dy(y_next.shape());
                    LossBreakdown lb = weighted_loss(&pnet, &snet, y_next, st.item->target,
                                                     cfg.weights, &dy);
                    wk.loss = lb.total;
                    LatentCode dw = g.synthesize_backward(sc, dy);
                    enc.encode_backward(ec, dw, &wk.backbone, &wk.heads, false);
                    st.w = std::move(w_next);
                    st.y = std::move(y_next);
                });
                gb.zero();
                gh.zero();
                double loss_sum = 0.0;
                for (int b = 0; b < B; ++b) {
                    gb.add(work[static_cast<std::size_t>(b)].backbone);
                    gh.add(work[static_cast<std::size_t>(b)].heads);
                    loss_sum += work[static_cast<std::size_t>(b)].loss;
                }
                gb.scale(1.0 / B);
                gh.scale(1.0 / B);
                const double mean_loss = loss_sum / B;
                if (!std::isfinite(mean_loss))
                    throw std::runtime_error("restyle_train: NaN loss at iteration " +
                                             std::to_string(iter) + ", step " +
                                             std::to_string(t));
                iter_losses.push_back(mean_loss);
                opt_backbone.step(enc.backbone_params, gb);
                opt_heads.step(enc.head_params, gh);
            }
        } else {
            // joint mode: losses summed over steps, one backward through the
            // whole unrolled chain, one update per batch
            const int N = cfg.n_steps;
            iter_losses.assign(static_cast<std::size_t>(N), 0.0);
            gb.zero();
            gh.zero();
            for (int b = 0; b < B; ++b) {
                auto& st = states[static_cast<std::size_t>(b)];
                std::vector<Encoder::EncodeCache> ecs(static_cast<std::size_t>(N));
                std::vector<Generator::SynthCache> scs(static_cast<std::size_t>(N));
                std::vector<Tensor> dys(static_cast<std::size_t>(N));
                std::vector<ImageArray> inputs(static_cast<std::size_t>(N));
                for (int t = 0; t < N; ++t) {
                    inputs[static_cast<std::size_t>(t)] =
                        enc.in_channels() == 6 ? concat_input(st.item->image, st.y)
                                               : (t == 0 ? st.item->image : st.y);
                    ResidualCode delta =
                        enc.encode_cached(inputs[static_cast<std::size_t>(t)],
                                          ecs[static_cast<std::size_t>(t)]);
                    st.w += delta;
                    st.y = g.synthesize_cached(st.w, scs[static_cast<std::size_t>(t)]);
                    Tensor dy(st.y.shape());
                    LossBreakdown lb =
                        weighted_loss(&pnet, &snet, st.y, st.item->target, cfg.weights, &dy);
                    if (!std::isfinite(lb.total))
                        throw std::runtime_error("restyle_train: NaN loss at iteration " +
                                                 std::to_string(iter) + ", step " +
                                                 std::to_string(t));
                    iter_losses[static_cast<std::size_t>(t)] += lb.total / B;
                    dys[static_cast<std::size_t>(t)] = std::move(dy);
                }
                LatentCode dw_carry({enc.k(), enc.d()});
                Tensor dy_extra;
                for (int t = N - 1; t >= 0; --t) {
                    Tensor dy = dys[static_cast<std::size_t>(t)];
                    if (!dy_extra.empty()) dy += dy_extra;
                    LatentCode dwt =
                        g.synthesize_backward(scs[static_cast<std::size_t>(t)], dy);
                    dwt += dw_carry;
                    Tensor dinput = enc.encode_backward(ecs[static_cast<std::size_t>(t)], dwt,
                                                        &gb, &gh, t > 0);
                    if (t > 0 && enc.in_channels() == 6) {
                        // channels [3,6) carry the gradient on y_{t-1}
                        const int n = dinput.dim(1) * dinput.dim(2);
                        dy_extra = Tensor({3, dinput.dim(1), dinput.dim(2)});
                        std::copy(dinput.data() + 3 * n, dinput.data() + 6 * n,
                                  dy_extra.data());
                    } else if (t > 0) {
                        dy_extra = dinput;
                    }
                    dw_carry = std::move(dwt);
                }
            }
            gb.scale(1.0 / B);
            gh.scale(1.0 / B);
            opt_backbone.step(enc.backbone_params, gb);
            opt_heads.step(enc.head_params, gh);
        }
        if (log) log->step_losses.push_back(std::move(iter_losses));
    }
    if (log) log->wall_clock_s = seconds_since(t0);
    return enc;
}

}  // namespace restyle
