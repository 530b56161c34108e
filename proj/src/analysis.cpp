#include "restyle/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "restyle/io.hpp"

namespace restyle::analysis {

std::vector<StepDiffMap> image_diff_maps(const std::vector<InversionTrace>& traces,
                                         DiffNormMode mode) {
    if (traces.empty()) return {};
    const std::size_t n_steps = traces[0].steps.size();
    for (const auto& t : traces)
        if (t.steps.size() != n_steps)
            throw ContractError("image_diff_maps: traces have mixed lengths");
    if (n_steps < 2) return {};

    const ImageArray& first = traces[0].steps[0].y_hat;
    const int h = first.dim(1), w = first.dim(2), c = first.dim(0);

    std::vector<StepDiffMap> maps;
    double global_max = 0.0;
    for (std::size_t t = 1; t < n_steps; ++t) {
        StepDiffMap m;
        m.transition = static_cast<int>(t);
        m.mode = mode;
        m.map = Tensor({h, w});
        for (const auto& trace : traces) {
            const ImageArray& a = trace.steps[t].y_hat;
            const ImageArray& b = trace.steps[t - 1].y_hat;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double s = 0.0;
                    for (int ch = 0; ch < c; ++ch) {
                        const double d = a.at3(ch, y, x) - b.at3(ch, y, x);
                        s += d * d;
                    }
                    m.map[static_cast<std::size_t>(y) * w + x] += s;
                }
        }
        // mean over traces, then per-pixel channel-norm
        for (std::size_t i = 0; i < m.map.numel(); ++i)
            m.map[i] = std::sqrt(m.map[i] / static_cast<double>(traces.size()));
        global_max = std::max(global_max, m.map.max_abs());
        maps.push_back(std::move(m));
    }

    for (auto& m : maps) {
        const double norm = mode == DiffNormMode::PerStep ? m.map.max_abs() : global_max;
        if (norm > 0.0)
            for (std::size_t i = 0; i < m.map.numel(); ++i) m.map[i] /= norm;
    }
    return maps;
}

LatentChangeTable latent_change_table(const std::vector<InversionTrace>& traces,
                                      const Generator& g) {
    if (traces.empty()) throw ContractError("latent_change_table: no traces");
    const int k = g.k(), d = g.d();
    const std::size_t n_steps = traces[0].steps.size();
    for (const auto& t : traces) {
        if (t.steps.size() != n_steps)
            throw ContractError("latent_change_table: traces have mixed lengths");
        if (t.steps[0].w.dim(0) != k || t.steps[0].w.dim(1) != d)
            throw ContractError("latent_change_table: trace does not target this generator");
    }

    LatentChangeTable table;
    table.k = k;
    table.v.assign(static_cast<std::size_t>(k), {});
    for (std::size_t t = 1; t < n_steps; ++t) {
        for (int l = 0; l < k; ++l) {
            // d_{l,t}: per-coordinate mean of squared diffs, then its L2 norm
            std::vector<double> dlt(static_cast<std::size_t>(d), 0.0);
            for (const auto& trace : traces) {
                const LatentCode& wt = trace.steps[t].w;
                const LatentCode& wp = trace.steps[t - 1].w;
                for (int c = 0; c < d; ++c) {
                    const double diff = wt.at2(l, c) - wp.at2(l, c);
                    dlt[static_cast<std::size_t>(c)] += diff * diff;
                }
            }
            double norm = 0.0;
            for (int c = 0; c < d; ++c) {
                const double m = dlt[static_cast<std::size_t>(c)] /
                                 static_cast<double>(traces.size());
                norm += m * m;
            }
            table.v[static_cast<std::size_t>(l)].push_back(std::sqrt(norm));
        }
    }

    const StyleGroups& groups = g.style_groups();
    table.group_mean.assign(3, std::vector<double>(n_steps > 0 ? n_steps - 1 : 0, 0.0));
    std::vector<int> counts(3, 0);
    for (int l = 0; l < k; ++l) ++counts[static_cast<std::size_t>(groups.group_of(l))];
    for (int l = 0; l < k; ++l) {
        const int grp = groups.group_of(l);
        for (std::size_t t = 0; t + 1 < n_steps; ++t)
            table.group_mean[static_cast<std::size_t>(grp)][t] +=
                table.v[static_cast<std::size_t>(l)][t] / counts[static_cast<std::size_t>(grp)];
    }
    return table;
}

std::vector<SchemeCurve> quality_time_curves(const std::vector<MetricRecord>& records,
                                             const std::string& metric_name) {
    std::vector<SchemeCurve> out;
    if (records.empty()) return out;

    auto metric_of = [&](const MetricRecord& r) {
        if (metric_name == "l2") return r.l2;
        if (metric_name == "perceptual") return r.perceptual;
        if (metric_name == "similarity") return r.similarity;
        throw ContractError("quality_time_curves: unknown metric " + metric_name);
    };

    std::map<std::string, std::map<int, std::pair<double, double>>> agg;  // sums
    std::map<std::string, std::map<int, int>> counts;
    for (const auto& r : records) {
        auto& cell = agg[r.scheme][r.step];
        cell.first += r.cum_time_s;
        cell.second += metric_of(r);
        counts[r.scheme][r.step] += 1;
    }
    for (const auto& [scheme, by_step] : agg) {
        SchemeCurve curve;
        curve.scheme = scheme;
        curve.metric_name = metric_name;
        for (const auto& [step, sums] : by_step) {
            const int n = counts[scheme][step];
            curve.points.push_back({sums.first / n, sums.second / n, step});
        }
        std::sort(curve.points.begin(), curve.points.end(),
                  [](const CurvePoint& a, const CurvePoint& b) {
                      return a.time_s < b.time_s || (a.time_s == b.time_s && a.step < b.step);
                  });
        out.push_back(std::move(curve));
    }
    return out;
}

std::string curves_to_csv(const std::vector<SchemeCurve>& curves, const std::string& header) {
    std::ostringstream os;
    if (!header.empty()) os << "# " << header << "\n";
    os << "scheme,time_s,metric_name,value\n";
    if (curves.empty()) {
        os << "# empty: no records\n";
        return os.str();
    }
    for (const auto& c : curves)
        for (const auto& p : c.points)
            os << c.scheme << "," << io::format_double(p.time_s) << "," << c.metric_name << ","
               << io::format_double(p.value) << "\n";
    return os.str();
}

// ---- plot rendering -----------------------------------------------------

namespace {

struct Canvas {
    int w, h;
    std::vector<std::uint8_t> px;
    Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_ * 3, 255) {}
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        px[i] = r;
        px[i + 1] = g;
        px[i + 2] = b;
    }
    void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, r, g, b);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    }
    void marker(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                if (std::abs(dx) + std::abs(dy) <= 2) set(x + dx, y + dy, r, g, b);
    }
};

const std::uint8_t kPalette[][3] = {{214, 39, 40},  {31, 119, 180}, {44, 160, 44},
                                    {255, 127, 14}, {148, 103, 189}, {140, 86, 75}};

}  // namespace

void render_curves_png(const std::filesystem::path& path,
                       const std::vector<SchemeCurve>& curves, int width, int height) {
    Canvas cv(width, height);
    const int margin = 40;

    double tmin = 1e300, tmax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            const double t = std::max(p.time_s, 1e-9);
            const double v = std::max(p.value, 1e-12);
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (tmin > tmax) { tmin = 1e-3; tmax = 1.0; vmin = 1e-3; vmax = 1.0; }
    if (tmin == tmax) tmax = tmin * 10;
    if (vmin == vmax) vmax = vmin * 10;

    auto px = [&](double t) {
        return margin + static_cast<int>((std::log(std::max(t, 1e-9)) - std::log(tmin)) /
                                         (std::log(tmax) - std::log(tmin)) *
                                         (width - 2 * margin));
    };
    auto py = [&](double v) {
        return height - margin -
               static_cast<int>((std::log(std::max(v, 1e-12)) - std::log(vmin)) /
                                (std::log(vmax) - std::log(vmin)) * (height - 2 * margin));
    };

    cv.line(margin, height - margin, width - margin, height - margin, 0, 0, 0);
    cv.line(margin, margin, margin, height - margin, 0, 0, 0);

    int ci = 0;
    for (const auto& c : curves) {
        const auto* col = kPalette[ci % 6];
        for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
            cv.line(px(c.points[i].time_s), py(c.points[i].value), px(c.points[i + 1].time_s),
                    py(c.points[i + 1].value), col[0], col[1], col[2]);
        for (const auto& p : c.points) cv.marker(px(p.time_s), py(p.value), col[0], col[1], col[2]);
        ++ci;
    }
    io::write_png(path, cv.px, width, height);
}

// ---- metric records -----------------------------------------------------

std::vector<MetricRecord> records_from_traces(const std::vector<InversionTrace>& traces,
                                              const std::vector<std::string>& image_ids) {
    if (traces.size() != image_ids.size())
        throw ContractError("records_from_traces: id/trace count mismatch");
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t t = 0; t < traces[i].steps.size(); ++t) {
            const auto& s = traces[i].steps[t];
            MetricRecord r;
            r.image_id = image_ids[i];
            r.scheme = traces[i].scheme;
            r.step = static_cast<int>(t);
            r.l2 = s.losses.count("l2") ? s.losses.at("l2") : 0.0;
            r.perceptual = s.losses.count("perceptual") ? s.losses.at("perceptual") : 0.0;
            r.similarity = s.losses.count("similarity") ? s.losses.at("similarity") : 0.0;
            r.cum_time_s = s.wall_clock_s;
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::string records_to_jsonl(const std::vector<MetricRecord>& records) {
    std::ostringstream os;
    for (const auto& r : records) {
        nlohmann::json j;
        j["image_id"] = r.image_id;
        j["scheme"] = r.scheme;
        j["step"] = r.step;
        j["l2"] = r.l2;
        j["perceptual"] = r.perceptual;
        j["similarity"] = r.similarity;
        j["cum_time_s"] = r.cum_time_s;
        os << j.dump() << "\n";
    }
    return os.str();
}

std::vector<MetricRecord> records_from_jsonl(const std::string& text) {
    std::vector<MetricRecord> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        nlohmann::json j = nlohmann::json::parse(line);
        MetricRecord r;
        r.image_id = j.value("image_id", "");
        r.scheme = j.value("scheme", "");
        r.step = j.value("step", 0);
        r.l2 = j.value("l2", 0.0);
        r.perceptual = j.value("perceptual", 0.0);
        r.similarity = j.value("similarity", 0.0);
        r.cum_time_s = j.value("cum_time_s", 0.0);
        out.push_back(std::move(r));
    }
    return out;
}

// ---- pca edit utility ---------------------------------------------------

PcaDirections pca_directions(const Generator& g, int n_samples, int n_components,
                             std::uint64_t seed) {
    if (n_samples < 2 || n_components < 1 || n_components > g.d())
        throw ConfigError("pca_directions: invalid sample/component counts");
    const int d = g.d();
    Eigen::MatrixXd X(n_samples, d);
    Rng rng(Rng::mix(seed, 0x50434131ULL));
    Tensor z({d});
    for (int i = 0; i < n_samples; ++i) {
        rng.fill_gaussian(z);
        Tensor w = g.map_z(z);
        for (int j = 0; j < d; ++j) X(i, j) = w[static_cast<std::size_t>(j)];
    }
    Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    Eigen::MatrixXd cov = X.transpose() * X / static_cast<double>(n_samples - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);

    PcaDirections out;
    out.components = Tensor({n_components, d});
    for (int c = 0; c < n_components; ++c) {
        const int col = d - 1 - c;  // eigenvalues ascend
        out.variances.push_back(es.eigenvalues()(col));
        for (int j = 0; j < d; ++j) out.components.at2(c, j) = es.eigenvectors()(j, col);
    }
    return out;
}

LatentCode apply_direction(const Generator& g, const LatentCode& w, const Tensor& direction,
                           double strength, int group) {
    if (w.dim(0) != g.k() || w.dim(1) != g.d() ||
        static_cast<int>(direction.numel()) != g.d())
        throw ContractError("apply_direction: shape mismatch");
    LatentCode out = w;
    for (int l = 0; l < g.k(); ++l) {
        if (group >= 0 && g.style_groups().group_of(l) != group) continue;
        for (int c = 0; c < g.d(); ++c)
            out.at2(l, c) += strength * direction[static_cast<std::size_t>(c)];
    }
    return out;
}

}  // namespace restyle::analysis
