#include "hashnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "hashnet/error.hpp"

namespace fs = std::filesystem;

namespace hashnet {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::size_t parse_label(const std::string& tok, const std::string& where) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
        throw Error(where + ": label '" + tok + "' is not a non-negative integer");
    }
    if (pos != tok.size()) {
        throw Error(where + ": label '" + tok + "' is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest '" + path + "'");
    const fs::path base = fs::path(path).parent_path();

    DatasetManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> ids;
    std::size_t max_label = 0;
    std::vector<std::size_t> label_seen;

    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            std::vector<std::string> header = split_csv(line);
            if (header.size() != 3 || header[0] != "id" || header[1] != "path" ||
                header[2] != "label") {
                throw Error("manifest '" + path + "': expected header 'id,path,label'");
            }
            continue;
        }
        if (line.empty() || line == "\r") continue;
        const std::string where = "manifest '" + path + "', line " + std::to_string(line_no);
        std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 3) throw Error(where + ": expected 3 fields 'id,path,label'");
        if (fields[0].empty()) throw Error(where + ": empty id");
        if (fields[1].empty()) throw Error(where + ": empty path");
        if (!ids.insert(fields[0]).second) {
            throw Error(where + ": duplicate image id '" + fields[0] + "'");
        }
        ManifestRecord rec;
        rec.id = fields[0];
        fs::path p(fields[1]);
        rec.path = p.is_absolute() ? p.string() : (base / p).string();
        rec.label = parse_label(fields[2], where);
        max_label = std::max(max_label, rec.label);
        if (label_seen.size() <= rec.label) label_seen.resize(rec.label + 1, 0);
        ++label_seen[rec.label];
        manifest.records.push_back(std::move(rec));
    }
    if (manifest.records.empty()) {
        throw Error("manifest '" + path + "': no records (empty dataset)");
    }
    for (std::size_t c = 0; c <= max_label; ++c) {
        if (label_seen[c] == 0) {
            throw Error("manifest '" + path + "': label " + std::to_string(c) +
                        " unused; labels must be dense in [0," + std::to_string(max_label + 1) +
                        ")");
        }
    }
    manifest.num_classes = max_label + 1;
    for (std::size_t c = 0; c < manifest.num_classes; ++c) {
        manifest.label_names.push_back("class" + std::to_string(c));
    }
    return manifest;
}

namespace {

/// Reads the next PNM header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF) throw Error("image '" + path + "': truncated header");
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok += static_cast<char>(c);
        c = in.get();
    }
    // The single whitespace byte after the last header token was just
    // consumed; binary data starts here.
    return tok;
}

std::size_t pnm_number(std::istream& in, const std::string& path, const char* what) {
    const std::string tok = pnm_token(in, path);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
        throw Error("image '" + path + "': bad " + what + " '" + tok + "'");
    }
    if (pos != tok.size()) {
        throw Error("image '" + path + "': bad " + what + " '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

Tensor decode_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image '" + path + "'");

    const std::string magic = pnm_token(in, path);
    if (magic != "P6" && magic != "P5") {
        throw Error("image '" + path + "': unsupported magic '" + magic +
                    "' (binary PPM/PGM only)");
    }
    const bool color = magic == "P6";
    const std::size_t width = pnm_number(in, path, "width");
    const std::size_t height = pnm_number(in, path, "height");
    const std::size_t maxval = pnm_number(in, path, "maxval");
    if (width == 0 || height == 0) throw Error("image '" + path + "': zero extent");
    if (maxval == 0 || maxval > 255) {
        throw Error("image '" + path + "': maxval " + std::to_string(maxval) +
                    " unsupported (8-bit only)");
    }

    const std::size_t samples = width * height * (color ? 3 : 1);
    std::vector<unsigned char> raw(samples);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(samples));
    if (static_cast<std::size_t>(in.gcount()) != samples) {
        throw Error("image '" + path + "': truncated pixel data");
    }

    Tensor t = Tensor::zeros({3, height, width});
    // Divide rather than multiply by a precomputed reciprocal: sample/maxval
    // is then the exact same double the synthetic generator's grid snap
    // produces, keeping write/reload round trips bit-exact.
    const double maxd = static_cast<double>(maxval);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            if (color) {
                const std::size_t o = (y * width + x) * 3;
                t(0, y, x) = raw[o] / maxd;
                t(1, y, x) = raw[o + 1] / maxd;
                t(2, y, x) = raw[o + 2] / maxd;
            } else {
                const double v = raw[y * width + x] / maxd;
                t(0, y, x) = v;
                t(1, y, x) = v;
                t(2, y, x) = v;
            }
        }
    }
    return t;
}

void write_ppm(const std::string& path, const Tensor& chw) {
    if (chw.rank() != 3 || chw.extent(0) != 3) {
        throw Error("write_ppm: expected a [3,H,W] tensor");
    }
    const std::size_t height = chw.extent(1), width = chw.extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> raw(height * width * 3);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = chw(c, y, x);
                if (!(v >= 0.0 && v <= 1.0)) {
                    throw Error("write_ppm: sample outside [0,1] at channel " +
                                std::to_string(c));
                }
                raw[(y * width + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error("write to '" + path + "' failed");
}

Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w) {
    if (chw.rank() != 3) throw Error("resize_bilinear: expected a [C,H,W] tensor");
    const std::size_t channels = chw.extent(0);
    const std::size_t in_h = chw.extent(1), in_w = chw.extent(2);
    if (out_h == 0 || out_w == 0) throw Error("resize_bilinear: zero target extent");
    if (in_h == out_h && in_w == out_w) return chw;

    Tensor out = Tensor::zeros({channels, out_h, out_w});
    const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
    for (std::size_t y = 0; y < out_h; ++y) {
        const double fy = y * sy;
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - y0;
        for (std::size_t x = 0; x < out_w; ++x) {
            const double fx = x * sx;
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - x0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double top = chw(c, y0, x0) * (1.0 - wx) + chw(c, y0, x1) * wx;
                const double bot = chw(c, y1, x0) * (1.0 - wx) + chw(c, y1, x1) * wx;
                out(c, y, x) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Dataset load_dataset(const DatasetManifest& manifest, std::size_t height, std::size_t width) {
    Dataset data;
    data.num_classes = manifest.num_classes;
    data.label_names = manifest.label_names;
    data.items.reserve(manifest.records.size());
    for (const ManifestRecord& rec : manifest.records) {
        Tensor img = [&] {
            try {
                return resize_bilinear(decode_image(rec.path), height, width);
            } catch (const Error& e) {
                throw Error("record '" + rec.id + "': " + e.what());
            }
        }();
        for (std::size_t i = 0; i < img.size(); ++i) {
            if (!(img[i] >= 0.0 && img[i] <= 1.0)) {
                throw Error("record '" + rec.id + "': sample outside [0,1]");
            }
        }
        data.items.push_back({rec.id, rec.label, std::move(img)});
    }
    return data;
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Well-separated class color: hue from the golden-angle sequence.
void class_color(std::size_t cls, double rgb[3]) {
    const double h = std::fmod(static_cast<double>(cls) * 0.61803398875, 1.0) * 6.0;
    const double s = 0.85, v = 0.9;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - static_cast<int>(h);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

} // namespace

Dataset generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t size,
                           std::uint64_t seed) {
    if (classes < 2) throw Error("generate_synthetic: need at least 2 classes");
    if (per_class < 1) throw Error("generate_synthetic: need at least 1 image per class");
    if (size < 8) throw Error("generate_synthetic: image size must be >= 8");

    std::mt19937_64 rng(seed);
    Dataset data;
    data.num_classes = classes;
    for (std::size_t c = 0; c < classes; ++c) {
        data.label_names.push_back("class" + std::to_string(c));
    }

    const double half = static_cast<double>(size) / 2.0;
    for (std::size_t c = 0; c < classes; ++c) {
        double base[3];
        class_color(c, base);
        for (std::size_t n = 0; n < per_class; ++n) {
            const double cx = half + (uniform01(rng) * 2.0 - 1.0) * 0.1 * size;
            const double cy = half + (uniform01(rng) * 2.0 - 1.0) * 0.1 * size;
            const double radius = (0.28 + (uniform01(rng) * 2.0 - 1.0) * 0.02) * size;
            double color[3];
            for (int ch = 0; ch < 3; ++ch) {
                color[ch] =
                    std::clamp(base[ch] + (uniform01(rng) * 2.0 - 1.0) * 0.05, 0.0, 1.0);
            }
            Tensor img = Tensor::zeros({3, size, size});
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
                    const bool inside = dx * dx + dy * dy <= radius * radius;
                    for (int ch = 0; ch < 3; ++ch) {
                        double v = inside ? color[ch] : 0.15;
                        v += (uniform01(rng) * 2.0 - 1.0) * 0.06;
                        v = std::clamp(v, 0.0, 1.0);
                        // Snap to the 8-bit grid so a PPM round trip is exact.
                        img(static_cast<std::size_t>(ch), y, x) =
                            std::lround(v * 255.0) / 255.0;
                    }
                }
            }
            std::ostringstream id;
            id << "synth-c" << c << "-" << n;
            data.items.push_back({id.str(), c, std::move(img)});
        }
    }
    return data;
}

void write_dataset(const Dataset& data, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw Error("cannot open '" + dir + "/manifest.csv' for writing");
    manifest << "id,path,label\n";
    for (const ImageRecord& item : data.items) {
        const std::string filename = item.id + ".ppm";
        write_ppm((fs::path(dir) / filename).string(), item.chw);
        manifest << item.id << "," << filename << "," << item.label << "\n";
    }
    if (!manifest) throw Error("write to '" + dir + "/manifest.csv' failed");
}

} // namespace hashnet
