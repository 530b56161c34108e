#pragma once

#include <filesystem>

#include "restyle/schemes.hpp"

namespace restyle {

// Trace directory layout: metadata.json, summary.jsonl (one record per step:
// step, losses, wall_clock_s), and per-step arrays step_NNN.{w,delta,y_hat}.bin.
void save_trace(const std::filesystem::path& dir, const InversionTrace& trace);
InversionTrace load_trace(const std::filesystem::path& dir);

}  // namespace restyle
