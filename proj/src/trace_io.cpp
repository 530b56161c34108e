#include "restyle/trace_io.hpp"

#include <cstdio>
#include <sstream>

#include "restyle/io.hpp"

namespace restyle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
std::string step_stem(std::size_t t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "step_%03zu", t);
    return buf;
}
}  // namespace

void save_trace(const fs::path& dir, const InversionTrace& trace) {
    fs::create_directories(dir);
    json meta;
    meta["scheme"] = trace.scheme;
    meta["n_records"] = trace.steps.size();
    meta["extra"] = trace.metadata;
    io::write_text(dir / "metadata.json", meta.dump(2) + "\n");

    std::ostringstream summary;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const StepRecord& s = trace.steps[t];
        json line;
        line["step"] = t;
        line["losses"] = s.losses;
        line["wall_clock_s"] = s.wall_clock_s;
        summary << line.dump() << "\n";
        io::write_tensor(dir / (step_stem(t) + ".w.bin"), s.w);
        io::write_tensor(dir / (step_stem(t) + ".y_hat.bin"), s.y_hat);
        if (!s.delta.empty()) io::write_tensor(dir / (step_stem(t) + ".delta.bin"), s.delta);
    }
    io::write_text(dir / "summary.jsonl", summary.str());
}

InversionTrace load_trace(const fs::path& dir) {
    json meta = json::parse(io::read_text(dir / "metadata.json"));
    InversionTrace trace;
    trace.scheme = meta.value("scheme", "");
    trace.metadata = meta.value("extra", json::object());
    const auto n = meta.value("n_records", std::size_t{0});

    std::istringstream summary(io::read_text(dir / "summary.jsonl"));
    std::string line;
    std::vector<json> lines;
    while (std::getline(summary, line))
        if (!line.empty()) lines.push_back(json::parse(line));
    if (lines.size() != n) throw ConfigError("load_trace: summary/metadata disagree");

    for (std::size_t t = 0; t < n; ++t) {
        StepRecord s;
        s.w = io::read_tensor(dir / (step_stem(t) + ".w.bin"));
        s.y_hat = io::read_tensor(dir / (step_stem(t) + ".y_hat.bin"));
        const auto delta_path = dir / (step_stem(t) + ".delta.bin");
        if (fs::exists(delta_path)) s.delta = io::read_tensor(delta_path);
        s.wall_clock_s = lines[t].value("wall_clock_s", 0.0);
        const json losses = lines[t].value("losses", json::object());
        for (const auto& [key, val] : losses.items()) s.losses[key] = val.get<double>();
        trace.steps.push_back(std::move(s));
    }
    return trace;
}

}  // namespace restyle
