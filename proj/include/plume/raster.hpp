#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plume/common.hpp"

namespace plume {

inline constexpr int kBandCount = 4;
inline constexpr std::uint16_t kSampleMax = 65535;

enum class Band : int { Red = 0, Green = 1, Blue = 2, Nir = 3 };

inline constexpr std::array<const char*, kBandCount> kBandNames = {"red", "green", "blue", "nir"};

// Per-pixel plume/non-plume map, row-major.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixelCount() const { return values_.size(); }

    bool inFrame(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

    bool at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { values_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    // Out-of-frame reads count as background.
    bool atClamped(int x, int y) const { return inFrame(x, y) && at(x, y); }

    std::size_t countTrue() const;

    const std::vector<std::uint8_t>& values() const { return values_; }
    std::vector<std::uint8_t>& values() { return values_; }

    bool operator==(const BinaryMask&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> values_;
};

// Per-pixel reals in [0,1], row-major.
class NormalizedField {
public:
    NormalizedField() = default;
    NormalizedField(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }

    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, double v) { values_[static_cast<std::size_t>(y) * width_ + x] = v; }

    double maxValue() const;

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

// A 4-band u16 raster (red, green, blue, nir) with optional ground-truth
// label. The unit of every experiment.
struct Scene {
    std::string id;
    int width = 0;
    int height = 0;
    std::array<std::vector<std::uint16_t>, kBandCount> bands;
    std::optional<BinaryMask> label;
    double gsdMeters = 0.0;

    const std::vector<std::uint16_t>& band(Band b) const { return bands[static_cast<int>(b)]; }
    std::vector<std::uint16_t>& band(Band b) { return bands[static_cast<int>(b)]; }

    std::size_t pixelCount() const { return static_cast<std::size_t>(width) * height; }
    bool inFrame(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    std::uint16_t sample(Band b, int x, int y) const {
        return bands[static_cast<int>(b)][static_cast<std::size_t>(y) * width + x];
    }

    // Throws ValidationError if the band/label shape invariants are broken.
    void validate() const;
};

// Scene IO: sidecar JSON manifest plus raw little-endian u16 band planes.
Scene loadScene(const std::filesystem::path& manifestPath);
void saveScene(const Scene& scene, const std::filesystem::path& manifestPath);

// Masks are binary PGM (P5), maxval 255, values restricted to {0,255}.
BinaryMask loadMask(const std::filesystem::path& path);
void saveMask(const BinaryMask& mask, const std::filesystem::path& path);

// Raw band samples divided by the dtype maximum (65535).
std::array<NormalizedField, kBandCount> normalize(const Scene& scene);
NormalizedField normalizeBand(const Scene& scene, Band b);

// Block-mean downsampling (bands) and majority vote (label, ties -> plume).
// Trailing partial blocks are dropped.
Scene downsample(const Scene& scene, int factor);

}  // namespace plume
