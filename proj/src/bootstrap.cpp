#include "restyle/bootstrap.hpp"

#include <chrono>
#include <cmath>

namespace restyle {

InitMode init_mode_from_string(const std::string& s) {
    if (s == "average") return InitMode::Average;
    if (s == "bootstrapped") return InitMode::Bootstrapped;
    throw ConfigError("unknown init mode: " + s);
}

std::string to_string(InitMode m) {
    return m == InitMode::Average ? "average" : "bootstrapped";
}

BootstrapResult bootstrap_invert(const Encoder& e_base, const Encoder& e_styled,
                                 const Generator& g_base, const Generator& g_styled,
                                 const ImageArray& x, int n_steps, InitMode init_mode,
                                 const InferOptions& opts) {
    if (e_base.in_channels() != 6 || e_styled.in_channels() != 6)
        throw ContractError("bootstrap_invert: both encoders must be 6-channel");
    if (g_base.k() != g_styled.k() || g_base.d() != g_styled.d() ||
        g_base.resolution() != g_styled.resolution())
        throw ContractError("bootstrap_invert: generators must share (k, d, resolution)");
    if (n_steps < 0) throw ContractError("bootstrap_invert: n_steps must be >= 0");

    BootstrapResult result;
    result.init_mode = init_mode;
    result.base_trace = restyle_infer(e_base, g_base, x, 1, opts);
    result.base_trace.scheme = "bootstrap_base";

    if (init_mode == InitMode::Average) {
        result.styled_trace =
            restyle_infer(e_styled, g_styled, x, std::max(1, n_steps), opts);
        result.styled_trace.scheme = "bootstrap_styled";
        result.styled_trace.metadata["init_mode"] = "average";
        return result;
    }

    // bootstrapped: the base step's latent and reconstruction seed the loop
    const LatentCode w1 = result.base_trace.steps.back().w;
    const ImageArray y1 = result.base_trace.steps.back().y_hat;

    InversionTrace& trace = result.styled_trace;
    trace.scheme = "bootstrap_styled";
    trace.metadata["init_mode"] = "bootstrapped";
    trace.metadata["n_steps"] = n_steps;

    auto losses_vs = [&](const ImageArray& y) {
        std::map<std::string, double> m;
        m["l2"] = l2_loss(y, x);
        if (opts.pnet) m["perceptual"] = opts.pnet->loss(y, x);
        if (opts.snet) m["similarity"] = opts.snet->similarity(y, x);
        return m;
    };

    StepRecord init;
    init.w = w1;  // bitwise equal to the base trace's final latent
    init.y_hat = n_steps == 0 ? g_styled.synthesize(w1) : y1;
    init.losses = losses_vs(init.y_hat);
    init.wall_clock_s = result.base_trace.steps.back().wall_clock_s;
    trace.steps.push_back(std::move(init));

    const auto t0 = std::chrono::steady_clock::now();
    LatentCode w = w1;
    ImageArray y = y1;
    for (int t = 0; t < n_steps; ++t) {
        ResidualCode delta = e_styled.encode(concat_input(x, y));
        LatentCode w_next = w + delta;
        ImageArray y_next = g_styled.synthesize(w_next);
        StepRecord rec;
        rec.delta = std::move(delta);  // w_next = w + delta, replays exactly
        rec.w = w_next;
        rec.y_hat = y_next;
        rec.losses = losses_vs(y_next);
        rec.wall_clock_s = trace.steps[0].wall_clock_s +
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
        trace.steps.push_back(std::move(rec));
        w = std::move(w_next);
        y = std::move(y_next);
    }
    return result;
}

double pixel_correlation(const ImageArray& a, const ImageArray& b) {
    if (!a.same_shape(b)) throw ContractError("pixel_correlation: shape mismatch");
    const double n = static_cast<double>(a.numel());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    const double denom = std::sqrt(va * vb);
    return denom > 0.0 ? cov / denom : 1.0;
}

AlignmentReport alignment_probe(const Generator& g_base, const Generator& g_styled,
                                int n_samples, std::uint64_t seed) {
    if (g_base.k() != g_styled.k() || g_base.d() != g_styled.d())
        throw ContractError("alignment_probe: generators must share (k, d)");
    if (n_samples < 1) throw ContractError("alignment_probe: n_samples must be >= 1");

    std::vector<ImageArray> base_imgs, styled_imgs;
    for (int i = 0; i < n_samples; ++i) {
        LatentCode w = g_base.sample_latent(Rng::mix(seed, static_cast<std::uint64_t>(i)));
        base_imgs.push_back(g_base.synthesize(w));
        styled_imgs.push_back(g_styled.synthesize(w));
    }

    AlignmentReport report;
    for (int i = 0; i < n_samples; ++i) {
        report.paired.push_back(
            pixel_correlation(base_imgs[static_cast<std::size_t>(i)],
                              styled_imgs[static_cast<std::size_t>(i)]));
        report.shuffled.push_back(pixel_correlation(
            base_imgs[static_cast<std::size_t>(i)],
            styled_imgs[static_cast<std::size_t>((i + 1) % n_samples)]));
    }
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto var_of = [&](const std::vector<double>& v, double m) {
        if (v.size() < 2) return 0.0;
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
    };
    report.paired_mean = mean_of(report.paired);
    report.shuffled_mean = mean_of(report.shuffled);
    const double n = static_cast<double>(n_samples);
    report.se_diff = std::sqrt(var_of(report.paired, report.paired_mean) / n +
                               var_of(report.shuffled, report.shuffled_mean) / n);
    report.pass = report.paired_mean > report.shuffled_mean;
    return report;
}

}  // namespace restyle
