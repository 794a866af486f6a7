#pragma once

#include <cstdint>
#include <vector>

#include "plume/common.hpp"
#include "plume/raster.hpp"

namespace plume {

// Anisotropic Gaussian ridge with a quadratic bend. With along/cross axis
// coordinates t and s relative to the centroid, the noiseless intensity is
//
//   I(t, s) = peak * exp(-((t/sigmaT)^2 + ((s - curvature*t^2)/sigmaS)^2) / 2)
//
// where sigmaT = (length/2)/sqrt(2 ln 4) and sigmaS = (thickness/2)/sqrt(2 ln 4),
// so the I > 0.25*peak level set is an ellipse with semi-axes length/2 and
// thickness/2, sheared by the bend (which preserves area). Band intensities
// scale the ridge (red 0.9, green 0.8, blue 1.0, nir 0.3) before independent
// per-pixel Gaussian noise, clamping to [0, 1], and 16-bit quantization.
struct PlumeParams {
    Vec2 centroid;
    double axisAngle = 0.0;      // radians, major axis direction
    double length = 0.0;         // label footprint major diameter, pixels
    double thickness = 0.0;      // label footprint minor diameter, pixels
    double curvature = 0.0;      // cross offset per along^2, 1/pixels
    double peakIntensity = 0.8;  // ridge peak in (0, 1]
    double noiseSigma = 0.0;     // per-band additive noise, >= 0
    std::uint64_t seed = 0;

    void validate() const;
};

// Noiseless ridge intensity at pixel center (x, y).
double ridgeIntensity(const PlumeParams& params, double x, double y);

// Scene with four bands and a label mask at ridge > 0.25 * peakIntensity.
// Throws ValidationError when the label footprint does not fit in frame.
Scene generateScene(int width, int height, const PlumeParams& params);

// Scenes "scene-000".. with plume placement, orientation, coverage (target
// label fraction 0.05..0.15), bend, peak, and noise drawn per scene from
// seeds derived from baseSeed. Same inputs reproduce identical scenes.
std::vector<Scene> generateDataset(int sceneCount, std::uint64_t baseSeed, int width, int height);

}  // namespace plume
