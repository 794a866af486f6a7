#include <doctest.h>

#include <cmath>

#include "plume/morphology.hpp"
#include "plume/synthgen.hpp"
#include "test_util.hpp"

using namespace plume;

namespace {

PlumeParams straightPlume() {
    PlumeParams params;
    params.centroid = {64.0, 64.0};
    params.axisAngle = 0.0;
    params.length = 60.0;
    params.thickness = 12.0;
    params.curvature = 0.0;
    params.peakIntensity = 0.8;
    params.noiseSigma = 0.0;
    params.seed = 21;
    return params;
}

}  // namespace

TEST_CASE("generation is a pure function of dims and params") {
    PlumeParams params = straightPlume();
    params.noiseSigma = 0.05;
    const Scene a = generateScene(128, 128, params);
    const Scene b = generateScene(128, 128, params);
    for (int band = 0; band < kBandCount; ++band) CHECK(a.bands[band] == b.bands[band]);
    CHECK(*a.label == *b.label);

    const auto dsA = generateDataset(3, 99, 96, 96);
    const auto dsB = generateDataset(3, 99, 96, 96);
    REQUIRE(dsA.size() == dsB.size());
    for (std::size_t i = 0; i < dsA.size(); ++i) {
        CHECK(dsA[i].id == dsB[i].id);
        CHECK(dsA[i].bands == dsB[i].bands);
    }
}

TEST_CASE("axis-aligned noiseless plume has a mirror-symmetric label") {
    const Scene scene = generateScene(128, 128, straightPlume());
    const BinaryMask& label = *scene.label;
    for (int dy = 1; dy < 64; ++dy)
        for (int x = 0; x < 128; ++x)
            CHECK(label.at(x, 64 + dy) == label.at(x, 64 - dy));
}

TEST_CASE("label area matches the elliptical footprint") {
    PlumeParams params;
    params.centroid = {256.0, 256.0};
    params.axisAngle = 0.6;
    params.length = 200.0;
    params.thickness = 30.0;
    params.curvature = 0.0;
    params.peakIntensity = 0.8;
    params.noiseSigma = 0.0;
    params.seed = 5;
    const Scene scene = generateScene(512, 512, params);
    const double area = static_cast<double>(scene.label->countTrue());
    const double ellipse = 3.141592653589793 * (params.length / 2.0) * (params.thickness / 2.0);
    CHECK(area > 0.8 * ellipse);
    CHECK(area < 1.2 * ellipse);
}

TEST_CASE("every labeled pixel is strictly above the intensity threshold") {
    PlumeParams params = straightPlume();
    params.axisAngle = 1.1;
    params.curvature = 0.004;
    params.noiseSigma = 0.1;
    const Scene scene = generateScene(128, 128, params);
    const double threshold = 0.25 * params.peakIntensity;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            if (scene.label->at(x, y)) CHECK(ridgeIntensity(params, x, y) > threshold);
}

TEST_CASE("straight noiseless label is one 8-connected component") {
    for (double angle : {0.0, 0.7, 1.5707963, 2.9}) {
        PlumeParams params = straightPlume();
        params.axisAngle = angle;
        const Scene scene = generateScene(128, 128, params);
        CHECK(componentCount(*scene.label) == 1);
    }
}

TEST_CASE("plume core follows the documented band ratios") {
    const Scene scene = generateScene(128, 128, straightPlume());
    const double blue = scene.sample(Band::Blue, 64, 64) / 65535.0;
    CHECK(blue == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(scene.sample(Band::Red, 64, 64) / 65535.0 == doctest::Approx(0.9 * blue).epsilon(1e-3));
    CHECK(scene.sample(Band::Green, 64, 64) / 65535.0 == doctest::Approx(0.8 * blue).epsilon(1e-3));
    CHECK(scene.sample(Band::Nir, 64, 64) / 65535.0 == doctest::Approx(0.3 * blue).epsilon(1e-3));
}

TEST_CASE("default-dimension dataset hits the 5-15% coverage window") {
    const auto scenes = generateDataset(38, 0, 256, 256);
    REQUIRE(scenes.size() == 38);
    double meanCoverage = 0.0;
    for (const Scene& scene : scenes) {
        REQUIRE(scene.label.has_value());
        const double coverage =
            static_cast<double>(scene.label->countTrue()) / scene.pixelCount();
        CHECK(coverage > 0.03);
        CHECK(coverage < 0.13);
        meanCoverage += coverage;
    }
    meanCoverage /= static_cast<double>(scenes.size());
    CHECK(meanCoverage > 0.05);
    CHECK(meanCoverage < 0.15);
}

TEST_CASE("invalid parameters and impossible placements are rejected") {
    PlumeParams params = straightPlume();

    params.thickness = 0.0;
    CHECK_THROWS_AS(generateScene(128, 128, params), ValidationError);

    params = straightPlume();
    params.length = params.thickness;
    CHECK_THROWS_AS(generateScene(128, 128, params), ValidationError);

    params = straightPlume();
    params.peakIntensity = 1.5;
    CHECK_THROWS_AS(generateScene(128, 128, params), ValidationError);

    params = straightPlume();
    CHECK_THROWS_AS(generateScene(48, 48, params), ValidationError);  // footprint out of frame

    CHECK_THROWS_AS(generateScene(0, 128, straightPlume()), ValidationError);
    CHECK_THROWS_AS(generateDataset(0, 1, 96, 96), ValidationError);
}
