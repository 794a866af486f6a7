#include "plume/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace plume {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLabelFraction = 0.25;
// Band scale factors in storage order red, green, blue, nir.
constexpr double kBandScale[kBandCount] = {0.9, 0.8, 1.0, 0.3};
constexpr double kDefaultGsdMeters = 0.5;

// sqrt(2 ln 4): converts a half-diameter to the sigma whose Gaussian falls
// to 1/4 at that distance.
const double kHalfWidthToSigma = std::sqrt(2.0 * std::log(4.0));

struct RidgeFrame {
    Vec2 along;
    Vec2 cross;
    double sigmaT;
    double sigmaS;
};

RidgeFrame ridgeFrame(const PlumeParams& params) {
    RidgeFrame frame;
    frame.along = Vec2{std::cos(params.axisAngle), std::sin(params.axisAngle)};
    frame.cross = Vec2{-frame.along.y, frame.along.x};
    frame.sigmaT = (params.length / 2.0) / kHalfWidthToSigma;
    frame.sigmaS = (params.thickness / 2.0) / kHalfWidthToSigma;
    return frame;
}

bool pointInFrame(const Vec2& p, int width, int height) {
    return p.x >= 0.0 && p.x <= width - 1.0 && p.y >= 0.0 && p.y <= height - 1.0;
}

void requireFootprintInFrame(int width, int height, const PlumeParams& params) {
    const RidgeFrame frame = ridgeFrame(params);
    const double halfLength = params.length / 2.0;
    const double halfThickness = params.thickness / 2.0;
    for (double t = -halfLength; t <= halfLength + 1e-9; t += 0.5) {
        const double bend = params.curvature * t * t;
        for (double side : {-1.0, 1.0}) {
            const double s = bend + side * halfThickness;
            const Vec2 p{params.centroid.x + t * frame.along.x + s * frame.cross.x,
                         params.centroid.y + t * frame.along.y + s * frame.cross.y};
            if (!pointInFrame(p, width, height))
                throw ValidationError("plume footprint out of frame");
        }
    }
}

}  // namespace

void PlumeParams::validate() const {
    if (!(thickness > 0.0)) throw ValidationError("thickness must be > 0");
    if (!(length > thickness)) throw ValidationError("length must exceed thickness");
    if (!(peakIntensity > 0.0 && peakIntensity <= 1.0))
        throw ValidationError("peakIntensity must be in (0, 1]");
    if (!(noiseSigma >= 0.0)) throw ValidationError("noiseSigma must be >= 0");
    if (!std::isfinite(centroid.x) || !std::isfinite(centroid.y) || !std::isfinite(axisAngle) ||
        !std::isfinite(curvature))
        throw ValidationError("plume parameters must be finite");
}

double ridgeIntensity(const PlumeParams& params, double x, double y) {
    const RidgeFrame frame = ridgeFrame(params);
    const double rx = x - params.centroid.x;
    const double ry = y - params.centroid.y;
    const double t = rx * frame.along.x + ry * frame.along.y;
    const double s = rx * frame.cross.x + ry * frame.cross.y;
    const double d = s - params.curvature * t * t;
    const double qt = t / frame.sigmaT;
    const double qs = d / frame.sigmaS;
    return params.peakIntensity * std::exp(-0.5 * (qt * qt + qs * qs));
}

Scene generateScene(int width, int height, const PlumeParams& params) {
    if (width < 1 || height < 1) throw ValidationError("frame dimensions must be positive");
    params.validate();
    requireFootprintInFrame(width, height, params);

    Scene scene;
    scene.id = "synth-" + std::to_string(params.seed);
    scene.width = width;
    scene.height = height;
    scene.gsdMeters = kDefaultGsdMeters;

    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<double> ridge(count);
    BinaryMask label(width, height);
    const double threshold = kLabelFraction * params.peakIntensity;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double value = ridgeIntensity(params, x, y);
            ridge[static_cast<std::size_t>(y) * width + x] = value;
            label.set(x, y, value > threshold);
        }
    }
    scene.label = std::move(label);

    // Noise draws are band-major, row-major, so a given seed always produces
    // the same pixel values.
    Rng rng(params.seed);
    for (int band = 0; band < kBandCount; ++band) {
        std::vector<std::uint16_t>& samples = scene.bands[static_cast<std::size_t>(band)];
        samples.resize(count);
        const double scale = kBandScale[band];
        for (std::size_t i = 0; i < count; ++i) {
            double value = scale * ridge[i];
            if (params.noiseSigma > 0.0) value += params.noiseSigma * rng.normal();
            value = std::clamp(value, 0.0, 1.0);
            samples[i] = static_cast<std::uint16_t>(std::llround(value * kSampleMax));
        }
    }
    return scene;
}

std::vector<Scene> generateDataset(int sceneCount, std::uint64_t baseSeed, int width, int height) {
    if (sceneCount < 1) throw ValidationError("sceneCount must be >= 1");
    if (width < 16 || height < 16) throw ValidationError("frame too small for dataset generation");

    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(sceneCount));
    for (int i = 0; i < sceneCount; ++i) {
        Rng draw(deriveSeed(baseSeed, static_cast<std::uint64_t>(i)));
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const double coverage = draw.uniform(0.05, 0.10);
            const double aspect = draw.uniform(3.0, 6.0);
            // Ellipse area pi*L*T/4 = coverage * frame area.
            const double thickness =
                std::sqrt(4.0 * coverage * width * height / (kPi * aspect));
            const double length = aspect * thickness;
            const double halfLength = length / 2.0;
            const double maxBendOffset = 0.3 * thickness;
            const double curvatureLimit = maxBendOffset / (halfLength * halfLength);

            PlumeParams params;
            params.axisAngle = draw.uniform(0.0, kPi);
            params.length = length;
            params.thickness = thickness;
            params.curvature = draw.uniform(-curvatureLimit, curvatureLimit);
            params.peakIntensity = draw.uniform(0.6, 0.9);
            params.noiseSigma = draw.uniform(0.06, 0.15);
            params.seed = deriveSeed(baseSeed, 0x5EED0000ULL + static_cast<std::uint64_t>(i));

            // Footprint extents projected onto the image axes; using the
            // actual orientation keeps the legal centroid box as wide as the
            // frame allows instead of pinning every plume to the center.
            const double crossReach = thickness / 2.0 + maxBendOffset;
            const double absCos = std::abs(std::cos(params.axisAngle));
            const double absSin = std::abs(std::sin(params.axisAngle));
            const double marginX = halfLength * absCos + crossReach * absSin + 2.0;
            const double marginY = halfLength * absSin + crossReach * absCos + 2.0;
            if (2.0 * marginX >= width - 1.0 || 2.0 * marginY >= height - 1.0) continue;
            params.centroid = Vec2{draw.uniform(marginX, width - 1.0 - marginX),
                                   draw.uniform(marginY, height - 1.0 - marginY)};

            try {
                Scene scene = generateScene(width, height, params);
                char name[32];
                std::snprintf(name, sizeof(name), "scene-%03d", i);
                scene.id = name;
                scenes.push_back(std::move(scene));
                placed = true;
            } catch (const ValidationError&) {
                continue;
            }
        }
        if (!placed)
            throw ValidationError("frame too small to place a plume at the target coverage");
    }
    return scenes;
}

}  // namespace plume
