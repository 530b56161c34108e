#pragma once

#include <string>
#include <vector>

#include "restyle/encoder.hpp"
#include "restyle/generator.hpp"
#include "restyle/schemes.hpp"

namespace restyle {

enum class InitMode { Average, Bootstrapped };

InitMode init_mode_from_string(const std::string& s);
std::string to_string(InitMode m);

struct BootstrapResult {
    InversionTrace base_trace;    // one base-encoder step
    InversionTrace styled_trace;  // n_steps stylized-encoder steps
    InitMode init_mode = InitMode::Average;
};

// Stylized-domain inversion seeded either by the stylized average latent or
// by one base-domain encoder step (latent and reconstruction).
BootstrapResult bootstrap_invert(const Encoder& e_base, const Encoder& e_styled,
                                 const Generator& g_base, const Generator& g_styled,
                                 const ImageArray& x, int n_steps, InitMode init_mode,
                                 const InferOptions& opts = {});

struct AlignmentReport {
    std::vector<double> paired;    // corr(G_base(w), G_styled(w))
    std::vector<double> shuffled;  // corr against a rotated pairing
    double paired_mean = 0.0;
    double shuffled_mean = 0.0;
    double se_diff = 0.0;  // standard error of the mean difference
    bool pass = false;     // paired_mean > shuffled_mean
};

// Appendix-style latent alignment check between two generators sharing (k,d).
AlignmentReport alignment_probe(const Generator& g_base, const Generator& g_styled,
                                int n_samples, std::uint64_t seed);

// Pearson correlation of two equally shaped arrays (exposed for tests).
double pixel_correlation(const ImageArray& a, const ImageArray& b);

}  // namespace restyle
