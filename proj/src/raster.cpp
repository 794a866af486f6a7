#include "plume/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace plume {

namespace fs = std::filesystem;
using json = nlohmann::json;

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      values_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    if (width <= 0 || height <= 0) throw ValidationError("mask dimensions must be positive");
}

std::size_t BinaryMask::countTrue() const {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

NormalizedField::NormalizedField(int width, int height, double fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) throw ValidationError("field dimensions must be positive");
}

double NormalizedField::maxValue() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, v);
    return m;
}

void Scene::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("scene dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    for (int b = 0; b < kBandCount; ++b) {
        if (bands[b].size() != n) {
            throw ValidationError("band '" + std::string(kBandNames[b]) + "' has " +
                                  std::to_string(bands[b].size()) + " samples, expected " +
                                  std::to_string(n));
        }
    }
    if (label && (label->width() != width || label->height() != height)) {
        throw ValidationError("label dimensions do not match image dimensions");
    }
}

namespace {

std::vector<std::uint16_t> readBandFile(const fs::path& path, std::size_t expectedSamples) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open band file: " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() != expectedSamples * 2) {
        throw ValidationError("size mismatch between manifest and band payload: " + path.string() +
                              " has " + std::to_string(raw.size()) + " bytes, expected " +
                              std::to_string(expectedSamples * 2));
    }
    std::vector<std::uint16_t> samples(expectedSamples);
    for (std::size_t i = 0; i < expectedSamples; ++i) {
        const auto lo = static_cast<std::uint8_t>(raw[2 * i]);
        const auto hi = static_cast<std::uint8_t>(raw[2 * i + 1]);
        samples[i] = static_cast<std::uint16_t>(lo | (hi << 8));
    }
    return samples;
}

void writeBandFile(const fs::path& path, const std::vector<std::uint16_t>& samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write band file: " + path.string());
    std::vector<char> raw(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        raw[2 * i] = static_cast<char>(samples[i] & 0xff);
        raw[2 * i + 1] = static_cast<char>(samples[i] >> 8);
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!out) throw ValidationError("short write on band file: " + path.string());
}

}  // namespace

Scene loadScene(const fs::path& manifestPath) {
    std::ifstream in(manifestPath);
    if (!in) throw ValidationError("cannot open scene manifest: " + manifestPath.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed scene manifest " + manifestPath.string() + ": " + e.what());
    }

    Scene scene;
    try {
        scene.id = doc.at("id").get<std::string>();
        scene.width = doc.at("width").get<int>();
        scene.height = doc.at("height").get<int>();
        scene.gsdMeters = doc.value("gsd_m", 0.0);
        if (doc.at("dtype").get<std::string>() != "u16")
            throw ValidationError("unsupported dtype (expected \"u16\")");
        if (doc.at("byte_order").get<std::string>() != "little")
            throw ValidationError("unsupported byte_order (expected \"little\")");

        const auto& bands = doc.at("bands");
        if (!bands.is_array() || bands.size() != kBandCount) {
            throw ValidationError("band count must be 4, got " + std::to_string(bands.size()));
        }
        if (scene.width <= 0 || scene.height <= 0)
            throw ValidationError("scene dimensions must be positive");

        const fs::path dir = manifestPath.parent_path();
        const std::size_t n = static_cast<std::size_t>(scene.width) * scene.height;
        for (int b = 0; b < kBandCount; ++b) {
            const auto name = bands[b].at("name").get<std::string>();
            if (name != kBandNames[b]) {
                throw ValidationError("band " + std::to_string(b) + " must be '" +
                                      kBandNames[b] + "', got '" + name + "'");
            }
            scene.bands[b] = readBandFile(dir / bands[b].at("file").get<std::string>(), n);
        }
        if (doc.contains("label") && !doc["label"].is_null()) {
            scene.label = loadMask(dir / doc["label"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ValidationError("invalid scene manifest " + manifestPath.string() + ": " + e.what());
    }
    scene.validate();
    return scene;
}

void saveScene(const Scene& scene, const fs::path& manifestPath) {
    scene.validate();
    const fs::path dir = manifestPath.parent_path();
    if (!dir.empty()) fs::create_directories(dir);

    json doc;
    doc["id"] = scene.id;
    doc["width"] = scene.width;
    doc["height"] = scene.height;
    doc["dtype"] = "u16";
    doc["byte_order"] = "little";
    doc["gsd_m"] = scene.gsdMeters;
    doc["bands"] = json::array();
    for (int b = 0; b < kBandCount; ++b) {
        const std::string file = scene.id + "." + kBandNames[b] + ".u16";
        writeBandFile(dir / file, scene.bands[b]);
        doc["bands"].push_back({{"name", kBandNames[b]}, {"file", file}});
    }
    if (scene.label) {
        const std::string file = scene.id + ".label.pgm";
        saveMask(*scene.label, dir / file);
        doc["label"] = file;
    }

    std::ofstream out(manifestPath, std::ios::trunc);
    if (!out) throw ValidationError("cannot write scene manifest: " + manifestPath.string());
    out << doc.dump(2) << "\n";
}

namespace {

// Skips PGM whitespace and '#' comment lines.
void skipPgmSeparators(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

long readPgmInt(std::istream& in, const fs::path& path) {
    skipPgmSeparators(in);
    long v = 0;
    if (!(in >> v)) throw ValidationError("malformed PGM header: " + path.string());
    return v;
}

}  // namespace

BinaryMask loadMask(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open mask file: " + path.string());

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw ValidationError("malformed PGM header (expected P5): " + path.string());

    const long width = readPgmInt(in, path);
    const long height = readPgmInt(in, path);
    const long maxval = readPgmInt(in, path);
    if (width <= 0 || height <= 0)
        throw ValidationError("malformed PGM header (bad dimensions): " + path.string());
    if (maxval != 255)
        throw ValidationError("mask PGM maxval must be 255: " + path.string());
    in.get();  // single separator byte before payload
    if (!in) throw ValidationError("malformed PGM header: " + path.string());

    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<char> payload(n);
    in.read(payload.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw ValidationError("truncated PGM payload: " + path.string());

    BinaryMask mask(static_cast<int>(width), static_cast<int>(height));
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::uint8_t>(payload[i]);
        if (v != 0 && v != 255)
            throw ValidationError("mask pixel value must be 0 or 255, got " + std::to_string(v) +
                                  ": " + path.string());
        mask.values()[i] = (v == 255) ? 1 : 0;
    }
    return mask;
}

void saveMask(const BinaryMask& mask, const fs::path& path) {
    if (mask.width() <= 0 || mask.height() <= 0)
        throw ValidationError("cannot save empty mask");
    const fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write mask file: " + path.string());
    out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
    std::vector<char> payload(mask.pixelCount());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        payload[i] = mask.values()[i] ? static_cast<char>(0xff) : 0;
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw ValidationError("short write on mask file: " + path.string());
}

std::array<NormalizedField, kBandCount> normalize(const Scene& scene) {
    scene.validate();
    std::array<NormalizedField, kBandCount> fields;
    for (int b = 0; b < kBandCount; ++b) {
        fields[b] = normalizeBand(scene, static_cast<Band>(b));
    }
    return fields;
}

NormalizedField normalizeBand(const Scene& scene, Band b) {
    NormalizedField field(scene.width, scene.height);
    const auto& band = scene.band(b);
    for (std::size_t i = 0; i < band.size(); ++i) {
        field.values()[i] = static_cast<double>(band[i]) / kSampleMax;
    }
    return field;
}

Scene downsample(const Scene& scene, int factor) {
    scene.validate();
    if (factor < 1) throw ValidationError("downsample factor must be >= 1");
    if (factor == 1) return scene;

    const int outW = scene.width / factor;
    const int outH = scene.height / factor;
    if (outW < 1 || outH < 1) throw ValidationError("downsample factor exceeds scene dimensions");

    Scene out;
    out.id = scene.id;
    out.width = outW;
    out.height = outH;
    out.gsdMeters = scene.gsdMeters * factor;

    const int block = factor * factor;
    for (int b = 0; b < kBandCount; ++b) {
        out.bands[b].resize(static_cast<std::size_t>(outW) * outH);
        for (int oy = 0; oy < outH; ++oy) {
            for (int ox = 0; ox < outW; ++ox) {
                std::uint64_t sum = 0;
                for (int dy = 0; dy < factor; ++dy) {
                    const std::size_t row = static_cast<std::size_t>(oy * factor + dy) * scene.width;
                    for (int dx = 0; dx < factor; ++dx) {
                        sum += scene.bands[b][row + ox * factor + dx];
                    }
                }
                const double mean = static_cast<double>(sum) / block;
                out.bands[b][static_cast<std::size_t>(oy) * outW + ox] =
                    static_cast<std::uint16_t>(std::llround(mean));
            }
        }
    }

    if (scene.label) {
        BinaryMask label(outW, outH);
        for (int oy = 0; oy < outH; ++oy) {
            for (int ox = 0; ox < outW; ++ox) {
                int trues = 0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        if (scene.label->at(ox * factor + dx, oy * factor + dy)) ++trues;
                    }
                }
                label.set(ox, oy, 2 * trues >= block);  // tie resolves to plume
            }
        }
        out.label = std::move(label);
    }
    return out;
}

}  // namespace plume
