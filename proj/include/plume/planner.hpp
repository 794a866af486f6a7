#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plume/common.hpp"
#include "plume/morphology.hpp"

namespace plume {

enum class PlanAlgorithm {
    StraightNadir,
    NaiveTransect,
    TraceOutline,
    TrackCenter,
    DiagonalTransect,
    LawnmowerTransect,
};

const char* algorithmName(PlanAlgorithm algorithm);
PlanAlgorithm parseAlgorithm(const std::string& name);
bool usesPlumeMask(PlanAlgorithm algorithm);

struct Trajectory {
    std::vector<Pixel> waypoints;  // visit order, all in-frame
    std::string algorithm;
    int stepSize = 1;
    int transectWidth = 0;          // 0 when the algorithm has no transects
    std::vector<std::size_t> segmentStarts;  // waypoint index opening each contour/axis/transect
};

// Principal axis of a contour by total least squares.
struct MajorAxis {
    Vec2 centroid;
    Vec2 direction;  // unit; dy > 0, or dy == 0 and dx > 0
    double tMin = 0.0;
    double tMax = 0.0;  // extent of contour projections onto direction
};

// Along-track sampling interval: 1% of frame width, at least 1 pixel.
int computeStepSize(int frameWidth);
// Cross-transect spacing: twice the step size.
int transectSpacing(int stepSize);

MajorAxis majorAxis(const PlumePolygon& polygon);

Trajectory planStraightNadir(int width, int height, int stepSize);
Trajectory planNaiveTransect(int width, int height, int stepSize, int spacing);

// The mask-conditioned planners visit polygons in descending area order
// (ties by lower componentId) and skip nothing else; an empty polygon list
// yields an empty trajectory.
Trajectory planTraceOutline(const std::vector<PlumePolygon>& polygons, int stepSize, int width,
                            int height);
Trajectory planTrackCenter(const std::vector<PlumePolygon>& polygons, int stepSize, int width,
                           int height);
Trajectory planDiagonalTransect(const std::vector<PlumePolygon>& polygons, int stepSize,
                                int spacing, int width, int height);
Trajectory planLawnmowerTransect(const std::vector<PlumePolygon>& polygons, int stepSize,
                                 int spacing, int width, int height);

// Dispatch for the four mask-conditioned algorithms.
Trajectory planFromPolygons(PlanAlgorithm algorithm, const std::vector<PlumePolygon>& polygons,
                            int stepSize, int width, int height);

std::string trajectoryCsv(const Trajectory& trajectory);
void writeTrajectoryCsv(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory loadTrajectoryCsv(const std::filesystem::path& path);

}  // namespace plume
