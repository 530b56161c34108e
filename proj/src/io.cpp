#include "restyle/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "restyle/errors.hpp"

namespace restyle::io {

namespace fs = std::filesystem;

// ---- png ----------------------------------------------------------------

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const fs::path& path, const std::vector<std::uint8_t>& rgb, int width,
               int height) {
    if (static_cast<std::size_t>(width) * height * 3 != rgb.size())
        throw ContractError("write_png: buffer size does not match dimensions");

    // filter byte 0 in front of each scanline
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const auto* row = rgb.data() + static_cast<std::size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + 3 * width);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    comp.resize(comp_len);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", comp);
    append_chunk(png, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png: cannot open " + path.string());
    f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

// ---- ppm ----------------------------------------------------------------

void write_ppm(const fs::path& path, const std::vector<std::uint8_t>& rgb, int width,
               int height) {
    if (static_cast<std::size_t>(width) * height * 3 != rgb.size())
        throw ContractError("write_ppm: buffer size does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path.string());
    f << "P6\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

ImageArray read_ppm(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("read_ppm: cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw ConfigError("read_ppm: unsupported PPM file " + path.string());
    f.get();  // single whitespace after header
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw ConfigError("read_ppm: truncated file " + path.string());
    ImageArray img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) =
                    buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 127.5 - 1.0;
    return img;
}

std::vector<std::uint8_t> image_to_rgb8(const ImageArray& img) {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw ContractError("image_to_rgb8: expected a (3, H, W) image");
    const int h = img.dim(1), w = img.dim(2);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = (img.at3(c, y, x) + 1.0) * 127.5;
                v = std::min(255.0, std::max(0.0, v));
                out[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v));
            }
    return out;
}

std::vector<std::uint8_t> heatmap_to_rgb8(const Tensor& map) {
    if (map.ndim() != 2) throw ContractError("heatmap_to_rgb8: expected an (H, W) map");
    const int h = map.dim(0), w = map.dim(1);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = map[static_cast<std::size_t>(y) * w + x];
            v = std::min(1.0, std::max(0.0, v));
            // blue (0) -> white (0.5) -> red (1)
            double r, g, b;
            if (v < 0.5) {
                r = 2 * v;
                g = 2 * v;
                b = 1.0;
            } else {
                r = 1.0;
                g = 2 * (1 - v);
                b = 2 * (1 - v);
            }
            const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
            out[i] = static_cast<std::uint8_t>(std::lround(255 * r));
            out[i + 1] = static_cast<std::uint8_t>(std::lround(255 * g));
            out[i + 2] = static_cast<std::uint8_t>(std::lround(255 * b));
        }
    return out;
}

// ---- tensors ------------------------------------------------------------

namespace {
constexpr char kTensorMagic[8] = {'R', 'S', 'T', 'E', 'N', '1', '\n', '\0'};
}

void write_tensor(const fs::path& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_tensor: cannot open " + path.string());
    f.write(kTensorMagic, 8);
    const std::uint32_t nd = static_cast<std::uint32_t>(t.ndim());
    f.write(reinterpret_cast<const char*>(&nd), 4);
    for (int i = 0; i < t.ndim(); ++i) {
        const std::int64_t d = t.dim(i);
        f.write(reinterpret_cast<const char*>(&d), 8);
    }
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor read_tensor(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("read_tensor: cannot open " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kTensorMagic, 8) != 0)
        throw ConfigError("read_tensor: bad magic in " + path.string());
    std::uint32_t nd = 0;
    f.read(reinterpret_cast<char*>(&nd), 4);
    if (nd > 8) throw ConfigError("read_tensor: too many dimensions");
    std::vector<int> shape(nd);
    for (std::uint32_t i = 0; i < nd; ++i) {
        std::int64_t d = 0;
        f.read(reinterpret_cast<char*>(&d), 8);
        shape[i] = static_cast<int>(d);
    }
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw ConfigError("read_tensor: truncated file " + path.string());
    return t;
}

// ---- text ---------------------------------------------------------------

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_text: cannot open " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("read_text: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace restyle::io
