#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plume/common.hpp"
#include "plume/raster.hpp"

namespace plume {

// Ordered closed boundary of one 8-connected component. The contour is a
// chain of 8-adjacent pixels (first and last included); pixel-wide spurs are
// walked out and back, so points may repeat. Area counts the filled
// component, holes included.
struct PlumePolygon {
    std::vector<Pixel> contour;
    std::size_t area = 0;
    int componentId = 0;
};

struct DenoiseConfig {
    int maxMergeIterations = 10;
    double minAreaFraction = 0.001;  // of frame pixels
    // connectivity is fixed at 8 throughout

    void validate() const {
        if (maxMergeIterations < 0) throw ValidationError("maxMergeIterations must be >= 0");
        if (!(minAreaFraction >= 0.0 && minAreaFraction < 1.0))
            throw ValidationError("minAreaFraction must be in [0,1)");
    }
};

// Full 3x3 structuring element; out-of-frame neighbors count as background.
BinaryMask erode(const BinaryMask& mask);
BinaryMask dilate(const BinaryMask& mask);

// 8-connected component labels, -1 for background. Components are numbered
// in row-major order of their topmost-leftmost pixel.
std::vector<int> labelComponents(const BinaryMask& mask, int& componentCount);
int componentCount(const BinaryMask& mask);

// One polygon per 8-connected component, traced clockwise from the
// topmost-then-leftmost pixel. Hole boundaries are not emitted.
std::vector<PlumePolygon> getContours(const BinaryMask& mask);

// Fills a closed contour: boundary plus everything not 4-reachable from
// outside it. Throws ValidationError on out-of-frame contour points.
BinaryMask fillContour(const std::vector<Pixel>& contour, int width, int height);

// Repeated dilate-then-erode rounds; keeps the mask from the iteration with
// the fewest components (earliest on ties) and stops once the component
// count stops decreasing.
BinaryMask mergeByClosing(const BinaryMask& mask, int maxIterations);

// Keeps polygons with area >= minArea, preserving order.
std::vector<PlumePolygon> filterByArea(const std::vector<PlumePolygon>& polygons, double minArea);

BinaryMask reconstructMask(const std::vector<PlumePolygon>& polygons, int width, int height);

// mergeByClosing -> getContours -> filterByArea -> reconstructMask.
BinaryMask denoise(const BinaryMask& mask, const DenoiseConfig& config);

// Debug export: one "componentId,pointIndex,x,y" row per contour point.
std::string polygonsToCsv(const std::vector<PlumePolygon>& polygons);
void writePolygonsCsv(const std::vector<PlumePolygon>& polygons, const std::filesystem::path& path);

}  // namespace plume
