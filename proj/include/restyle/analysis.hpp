#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "restyle/generator.hpp"
#include "restyle/schemes.hpp"

namespace restyle::analysis {

enum class DiffNormMode { PerStep, Global };

struct StepDiffMap {
    int transition = 0;  // t, for the t-1 -> t change
    Tensor map;          // (H, W), nonnegative
    DiffNormMode mode = DiffNormMode::PerStep;
};

// Mean-over-traces per-pixel change between consecutive reconstructions:
// sqrt over the channel-summed squared difference, then normalized either
// per step (max 1 per map) or by the shared max over all transitions.
std::vector<StepDiffMap> image_diff_maps(const std::vector<InversionTrace>& traces,
                                         DiffNormMode mode);

struct LatentChangeTable {
    int k = 0;
    // v[l][t-1] for style l, step t >= 1
    std::vector<std::vector<double>> v;
    // group_mean[g][t-1], g in {coarse, medium, fine}
    std::vector<std::vector<double>> group_mean;
};

// Per style input l and step t: d_{l,t} = mean over traces of the squared
// per-coordinate latent change, v_{l,t} = || d_{l,t} ||_2; grouped means
// follow the generator's style groups.
LatentChangeTable latent_change_table(const std::vector<InversionTrace>& traces,
                                      const Generator& g);

struct MetricRecord {
    std::string image_id;
    std::string scheme;
    int step = 0;
    double l2 = 0.0;
    double perceptual = 0.0;
    double similarity = 0.0;
    double cum_time_s = 0.0;
};

struct CurvePoint {
    double time_s = 0.0;
    double value = 0.0;
    int step = 0;
};

struct SchemeCurve {
    std::string scheme;
    std::string metric_name;
    std::vector<CurvePoint> points;  // sorted by time
};

// Per scheme: records grouped by step, time and metric averaged over images,
// emitted as a time-sorted polyline.
std::vector<SchemeCurve> quality_time_curves(const std::vector<MetricRecord>& records,
                                             const std::string& metric_name);

std::string curves_to_csv(const std::vector<SchemeCurve>& curves, const std::string& header);
// Log-log polyline plot of the curve set.
void render_curves_png(const std::filesystem::path& path,
                       const std::vector<SchemeCurve>& curves, int width = 720,
                       int height = 540);

std::vector<MetricRecord> records_from_traces(const std::vector<InversionTrace>& traces,
                                              const std::vector<std::string>& image_ids);

// jsonl round-trip for the evaluation pipeline
std::string records_to_jsonl(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> records_from_jsonl(const std::string& text);

// PCA edit utility: principal directions of the mapped W distribution.
struct PcaDirections {
    Tensor components;  // (n_components, d), unit rows
    std::vector<double> variances;
};
PcaDirections pca_directions(const Generator& g, int n_samples, int n_components,
                             std::uint64_t seed);
// Moves w along a direction; group < 0 edits all rows, otherwise only the
// rows of that coarse/medium/fine group.
LatentCode apply_direction(const Generator& g, const LatentCode& w, const Tensor& direction,
                           double strength, int group = -1);

}  // namespace restyle::analysis
