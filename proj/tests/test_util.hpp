#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "plume/common.hpp"
#include "plume/raster.hpp"

namespace testutil {

using plume::Band;
using plume::BinaryMask;
using plume::Pixel;
using plume::Rng;
using plume::Scene;

inline BinaryMask randomMask(Rng& rng, int width, int height, double density) {
    BinaryMask mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) mask.set(x, y, rng.uniform01() < density);
    return mask;
}

// Rows of '.' (false) and any other character (true); all rows equal length.
inline BinaryMask maskFromRows(const std::vector<std::string>& rows) {
    const int height = static_cast<int>(rows.size());
    const int width = static_cast<int>(rows.front().size());
    BinaryMask mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) mask.set(x, y, rows[y][x] != '.');
    return mask;
}

inline BinaryMask complement(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) out.set(x, y, !mask.at(x, y));
    return out;
}

inline BinaryMask padFalse(const BinaryMask& mask, int margin) {
    BinaryMask out(mask.width() + 2 * margin, mask.height() + 2 * margin);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) out.set(x + margin, y + margin, mask.at(x, y));
    return out;
}

inline BinaryMask cropMargin(const BinaryMask& mask, int margin) {
    BinaryMask out(mask.width() - 2 * margin, mask.height() - 2 * margin);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) out.set(x, y, mask.at(x + margin, y + margin));
    return out;
}

// Direct 3x3 set definitions with out-of-frame treated as background.
inline BinaryMask bruteErode(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool all = true;
            for (int dy = -1; dy <= 1 && all; ++dy)
                for (int dx = -1; dx <= 1 && all; ++dx) all = mask.atClamped(x + dx, y + dy);
            out.set(x, y, all);
        }
    }
    return out;
}

inline BinaryMask bruteDilate(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool any = false;
            for (int dy = -1; dy <= 1 && !any; ++dy)
                for (int dx = -1; dx <= 1 && !any; ++dx) any = mask.atClamped(x + dx, y + dy);
            out.set(x, y, any);
        }
    }
    return out;
}

inline bool isSubset(const BinaryMask& inner, const BinaryMask& outer) {
    for (int y = 0; y < inner.height(); ++y)
        for (int x = 0; x < inner.width(); ++x)
            if (inner.at(x, y) && !outer.at(x, y)) return false;
    return true;
}

// Background pixels not 4-reachable from the frame border become foreground,
// so every component of the result is hole-free.
inline BinaryMask fillHoles(const BinaryMask& mask) {
    const int width = mask.width();
    const int height = mask.height();
    std::vector<char> outside(static_cast<std::size_t>(width) * height, 0);
    std::vector<Pixel> stack;
    const auto push = [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        if (!mask.at(x, y) && !outside[i]) {
            outside[i] = 1;
            stack.push_back({x, y});
        }
    };
    for (int x = 0; x < width; ++x) {
        push(x, 0);
        push(x, height - 1);
    }
    for (int y = 0; y < height; ++y) {
        push(0, y);
        push(width - 1, y);
    }
    while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        if (p.x > 0) push(p.x - 1, p.y);
        if (p.x + 1 < width) push(p.x + 1, p.y);
        if (p.y > 0) push(p.x, p.y - 1);
        if (p.y + 1 < height) push(p.x, p.y + 1);
    }
    BinaryMask out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.set(x, y, mask.at(x, y) || !outside[static_cast<std::size_t>(y) * width + x]);
    return out;
}

inline void stampEllipse(BinaryMask& mask, double cx, double cy, double rx, double ry,
                         double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double u = (dx * c + dy * s) / rx;
            const double v = (-dx * s + dy * c) / ry;
            if (u * u + v * v <= 1.0) mask.set(x, y, true);
        }
    }
}

// Union of a few overlapping filled ellipses with interior holes filled;
// always non-empty and hole-free.
inline BinaryMask randomBlob(Rng& rng, int width, int height) {
    BinaryMask mask(width, height);
    const double cx = rng.uniform(width * 0.3, width * 0.7);
    const double cy = rng.uniform(height * 0.3, height * 0.7);
    const int lobes = 1 + rng.uniformInt(3);
    for (int i = 0; i < lobes; ++i) {
        const double ex = cx + rng.uniform(-width * 0.15, width * 0.15);
        const double ey = cy + rng.uniform(-height * 0.15, height * 0.15);
        const double rx = rng.uniform(2.0, width * 0.2);
        const double ry = rng.uniform(2.0, height * 0.2);
        stampEllipse(mask, ex, ey, rx, ry, rng.uniform(0.0, 3.141592653589793));
    }
    if (mask.countTrue() == 0)
        mask.set(static_cast<int>(cx), static_cast<int>(cy), true);
    return fillHoles(mask);
}

// Scene whose bands come from a [0,1]-valued function; label optional.
template <typename BandFn>
Scene sceneFromFields(int width, int height, BandFn&& value) {
    Scene scene;
    scene.id = "test";
    scene.width = width;
    scene.height = height;
    scene.gsdMeters = 1.0;
    for (int b = 0; b < plume::kBandCount; ++b) {
        auto& plane = scene.bands[b];
        plane.resize(static_cast<std::size_t>(width) * height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                plane[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint16_t>(
                    std::llround(value(b, x, y) * plume::kSampleMax));
    }
    return scene;
}

inline double relativeError(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / denom;
}

}  // namespace testutil
