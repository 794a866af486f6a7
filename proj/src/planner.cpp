#include "plume/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace plume {

namespace {

constexpr double kExtentEps = 1e-9;

struct NamedAlgorithm {
    PlanAlgorithm algorithm;
    const char* name;
};

constexpr NamedAlgorithm kAlgorithms[] = {
    {PlanAlgorithm::StraightNadir, "straight_nadir"},
    {PlanAlgorithm::NaiveTransect, "naive_transect"},
    {PlanAlgorithm::TraceOutline, "trace_outline"},
    {PlanAlgorithm::TrackCenter, "track_center"},
    {PlanAlgorithm::DiagonalTransect, "diagonal_transect"},
    {PlanAlgorithm::LawnmowerTransect, "lawnmower_transect"},
};

Pixel roundToPixel(const Vec2& position) {
    return Pixel{static_cast<int>(std::llround(position.x)), static_cast<int>(std::llround(position.y))};
}

Pixel clampToFrame(const Pixel& p, int width, int height) {
    return Pixel{std::clamp(p.x, 0, width - 1), std::clamp(p.y, 0, height - 1)};
}

void appendWaypoint(Trajectory& trajectory, const Pixel& p) {
    if (!trajectory.waypoints.empty() && trajectory.waypoints.back() == p) return;
    trajectory.waypoints.push_back(p);
}

void openSegment(Trajectory& trajectory) {
    trajectory.segmentStarts.push_back(trajectory.waypoints.size());
}

// Drops segment markers made redundant by consecutive-duplicate removal.
void finishSegments(Trajectory& trajectory) {
    std::vector<std::size_t> cleaned;
    for (std::size_t start : trajectory.segmentStarts) {
        if (start >= trajectory.waypoints.size()) continue;
        if (!cleaned.empty() && cleaned.back() == start) continue;
        cleaned.push_back(start);
    }
    trajectory.segmentStarts = std::move(cleaned);
}

std::vector<const PlumePolygon*> byDescendingArea(const std::vector<PlumePolygon>& polygons) {
    std::vector<const PlumePolygon*> order;
    order.reserve(polygons.size());
    for (const PlumePolygon& polygon : polygons) order.push_back(&polygon);
    std::sort(order.begin(), order.end(), [](const PlumePolygon* a, const PlumePolygon* b) {
        if (a->area != b->area) return a->area > b->area;
        return a->componentId < b->componentId;
    });
    return order;
}

bool singlePoint(const PlumePolygon& polygon) {
    for (const Pixel& p : polygon.contour) {
        if (!(p == polygon.contour.front())) return false;
    }
    return true;
}

Vec2 rotated(const Vec2& v, double radians) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    return Vec2{v.x * c - v.y * s, v.x * s + v.y * c};
}

// Longest run of integer offsets s around 0 whose rounded sample positions
// stay inside the region. Out-of-frame counts as outside, which also bounds
// the march. Returns {0, -1} when even the anchor is outside.
std::pair<long long, long long> chordExtent(const Vec2& anchor, const Vec2& direction,
                                            const BinaryMask& region) {
    const auto inside = [&region](const Vec2& position) {
        const Pixel p = roundToPixel(position);
        return p.x >= 0 && p.x < region.width() && p.y >= 0 && p.y < region.height() &&
               region.at(p.x, p.y);
    };
    if (!inside(anchor)) return {0, -1};
    long long lo = 0;
    while (inside(Vec2{anchor.x + (lo - 1) * direction.x, anchor.y + (lo - 1) * direction.y}))
        --lo;
    long long hi = 0;
    while (inside(Vec2{anchor.x + (hi + 1) * direction.x, anchor.y + (hi + 1) * direction.y}))
        ++hi;
    return {lo, hi};
}

void requireStep(int stepSize) {
    if (stepSize < 1) throw ValidationError("stepSize must be >= 1");
}

void requireSpacing(int spacing) {
    if (spacing < 1) throw ValidationError("transect spacing must be >= 1");
}

void requireFrame(int width, int height) {
    if (width < 1 || height < 1) throw ValidationError("frame dimensions must be positive");
}

}  // namespace

const char* algorithmName(PlanAlgorithm algorithm) {
    for (const NamedAlgorithm& entry : kAlgorithms) {
        if (entry.algorithm == algorithm) return entry.name;
    }
    throw ContractError("unknown algorithm");
}

PlanAlgorithm parseAlgorithm(const std::string& name) {
    for (const NamedAlgorithm& entry : kAlgorithms) {
        if (name == entry.name) return entry.algorithm;
    }
    throw ValidationError("unknown algorithm: " + name);
}

bool usesPlumeMask(PlanAlgorithm algorithm) {
    return algorithm != PlanAlgorithm::StraightNadir && algorithm != PlanAlgorithm::NaiveTransect;
}

int computeStepSize(int frameWidth) {
    if (frameWidth < 1) throw ValidationError("frame width must be positive");
    return std::max(1, static_cast<int>(std::llround(0.01 * frameWidth)));
}

int transectSpacing(int stepSize) {
    requireStep(stepSize);
    return 2 * stepSize;
}

MajorAxis majorAxis(const PlumePolygon& polygon) {
    if (polygon.contour.empty()) throw ValidationError("empty contour");
    if (singlePoint(polygon)) throw ValidationError("all contour points identical");

    const double n = static_cast<double>(polygon.contour.size());
    double mx = 0.0, my = 0.0;
    for (const Pixel& p : polygon.contour) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;

    double cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (const Pixel& p : polygon.contour) {
        const double dx = p.x - mx;
        const double dy = p.y - my;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    cxx /= n;
    cyy /= n;
    cxy /= n;

    // Leading eigenvector of the 2x2 covariance, canonicalized so results do
    // not depend on traversal order.
    const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    Vec2 direction{std::cos(theta), std::sin(theta)};
    if (direction.y < 0.0 || (direction.y == 0.0 && direction.x < 0.0)) {
        direction.x = -direction.x;
        direction.y = -direction.y;
    }

    MajorAxis axis;
    axis.centroid = Vec2{mx, my};
    axis.direction = direction;
    bool first = true;
    for (const Pixel& p : polygon.contour) {
        const double t = (p.x - mx) * direction.x + (p.y - my) * direction.y;
        if (first) {
            axis.tMin = axis.tMax = t;
            first = false;
        } else {
            axis.tMin = std::min(axis.tMin, t);
            axis.tMax = std::max(axis.tMax, t);
        }
    }
    return axis;
}

Trajectory planStraightNadir(int width, int height, int stepSize) {
    requireFrame(width, height);
    requireStep(stepSize);
    Trajectory trajectory;
    trajectory.algorithm = algorithmName(PlanAlgorithm::StraightNadir);
    trajectory.stepSize = stepSize;
    openSegment(trajectory);
    const int x = width / 2;
    for (int y = 0; y < height; y += stepSize) appendWaypoint(trajectory, Pixel{x, y});
    finishSegments(trajectory);
    return trajectory;
}

Trajectory planNaiveTransect(int width, int height, int stepSize, int spacing) {
    requireFrame(width, height);
    requireStep(stepSize);
    requireSpacing(spacing);
    Trajectory trajectory;
    trajectory.algorithm = algorithmName(PlanAlgorithm::NaiveTransect);
    trajectory.stepSize = stepSize;
    trajectory.transectWidth = spacing;
    int sweep = 0;
    for (int y = 0; y < height; y += spacing, ++sweep) {
        openSegment(trajectory);
        if (sweep % 2 == 0) {
            for (int x = 0; x < width; x += stepSize) appendWaypoint(trajectory, Pixel{x, y});
        } else {
            int last = 0;
            for (int x = 0; x < width; x += stepSize) last = x;
            for (int x = last; x >= 0; x -= stepSize) appendWaypoint(trajectory, Pixel{x, y});
        }
    }
    finishSegments(trajectory);
    return trajectory;
}

Trajectory planTraceOutline(const std::vector<PlumePolygon>& polygons, int stepSize, int width,
                            int height) {
    requireFrame(width, height);
    requireStep(stepSize);
    Trajectory trajectory;
    trajectory.algorithm = algorithmName(PlanAlgorithm::TraceOutline);
    trajectory.stepSize = stepSize;
    for (const PlumePolygon* polygon : byDescendingArea(polygons)) {
        openSegment(trajectory);
        for (std::size_t i = 0; i < polygon->contour.size();
             i += static_cast<std::size_t>(stepSize)) {
            const Pixel p = clampToFrame(polygon->contour[i], width, height);
            // A revisited sample means the chain walked a spur out and back;
            // the next sample can be up to 2*step away, so the spacing chain
            // restarts there.
            if (!trajectory.waypoints.empty() && trajectory.waypoints.back() == p) {
                openSegment(trajectory);
                continue;
            }
            appendWaypoint(trajectory, p);
        }
    }
    finishSegments(trajectory);
    return trajectory;
}

Trajectory planTrackCenter(const std::vector<PlumePolygon>& polygons, int stepSize, int width,
                           int height) {
    requireFrame(width, height);
    requireStep(stepSize);
    Trajectory trajectory;
    trajectory.algorithm = algorithmName(PlanAlgorithm::TrackCenter);
    trajectory.stepSize = stepSize;
    for (const PlumePolygon* polygon : byDescendingArea(polygons)) {
        openSegment(trajectory);
        if (singlePoint(*polygon)) {
            appendWaypoint(trajectory, clampToFrame(polygon->contour.front(), width, height));
            continue;
        }
        const MajorAxis axis = majorAxis(*polygon);
        const BinaryMask region = fillContour(polygon->contour, width, height);
        std::vector<double> stations;
        for (double t = axis.tMin; t <= axis.tMax + kExtentEps; t += stepSize) stations.push_back(t);
        if (stations.empty() || stations.back() < axis.tMax - kExtentEps)
            stations.push_back(axis.tMax);
        bool gap = false;
        for (double t : stations) {
            const Pixel p = clampToFrame(
                roundToPixel(Vec2{axis.centroid.x + t * axis.direction.x,
                                  axis.centroid.y + t * axis.direction.y}),
                width, height);
            // Stations can land off the component (axis tips, concave
            // regions); a skipped station ends the contiguous segment.
            if (!region.at(p.x, p.y)) {
                gap = true;
                continue;
            }
            if (gap) {
                openSegment(trajectory);
                gap = false;
            }
            appendWaypoint(trajectory, p);
        }
    }
    finishSegments(trajectory);
    return trajectory;
}

namespace {

Trajectory planTransects(const std::vector<PlumePolygon>& polygons, int stepSize, int spacing,
                         int width, int height, PlanAlgorithm algorithm, double crossAngle) {
    requireFrame(width, height);
    requireStep(stepSize);
    requireSpacing(spacing);
    Trajectory trajectory;
    trajectory.algorithm = algorithmName(algorithm);
    trajectory.stepSize = stepSize;
    trajectory.transectWidth = spacing;
    for (const PlumePolygon* polygon : byDescendingArea(polygons)) {
        if (singlePoint(*polygon)) {
            openSegment(trajectory);
            appendWaypoint(trajectory, clampToFrame(polygon->contour.front(), width, height));
            continue;
        }
        const MajorAxis axis = majorAxis(*polygon);
        const BinaryMask region = fillContour(polygon->contour, width, height);
        int transect = 0;
        for (double t = axis.tMin; t <= axis.tMax + kExtentEps; t += spacing, ++transect) {
            const Vec2 anchor{axis.centroid.x + t * axis.direction.x,
                              axis.centroid.y + t * axis.direction.y};
            // Alternate the cross direction so consecutive transects run
            // opposite ways.
            const double sign = (transect % 2 == 0) ? 1.0 : -1.0;
            const Vec2 cross = rotated(axis.direction, sign * crossAngle);
            const auto [lo, hi] = chordExtent(anchor, cross, region);
            if (lo > hi) continue;  // anchor rounds off the component
            openSegment(trajectory);
            for (long long s = lo; s <= hi; s += stepSize) {
                const Pixel p = clampToFrame(
                    roundToPixel(Vec2{anchor.x + s * cross.x, anchor.y + s * cross.y}), width,
                    height);
                if (region.at(p.x, p.y)) appendWaypoint(trajectory, p);
            }
        }
    }
    finishSegments(trajectory);
    return trajectory;
}

}  // namespace

Trajectory planDiagonalTransect(const std::vector<PlumePolygon>& polygons, int stepSize,
                                int spacing, int width, int height) {
    constexpr double kQuarterTurn = 3.14159265358979323846 / 4.0;
    return planTransects(polygons, stepSize, spacing, width, height,
                         PlanAlgorithm::DiagonalTransect, kQuarterTurn);
}

Trajectory planLawnmowerTransect(const std::vector<PlumePolygon>& polygons, int stepSize,
                                 int spacing, int width, int height) {
    constexpr double kHalfTurn = 3.14159265358979323846 / 2.0;
    return planTransects(polygons, stepSize, spacing, width, height,
                         PlanAlgorithm::LawnmowerTransect, kHalfTurn);
}

Trajectory planFromPolygons(PlanAlgorithm algorithm, const std::vector<PlumePolygon>& polygons,
                            int stepSize, int width, int height) {
    switch (algorithm) {
        case PlanAlgorithm::TraceOutline:
            return planTraceOutline(polygons, stepSize, width, height);
        case PlanAlgorithm::TrackCenter:
            return planTrackCenter(polygons, stepSize, width, height);
        case PlanAlgorithm::DiagonalTransect:
            return planDiagonalTransect(polygons, stepSize, transectSpacing(stepSize), width,
                                        height);
        case PlanAlgorithm::LawnmowerTransect:
            return planLawnmowerTransect(polygons, stepSize, transectSpacing(stepSize), width,
                                         height);
        default:
            throw ContractError("algorithm does not take polygons");
    }
}

std::string trajectoryCsv(const Trajectory& trajectory) {
    std::ostringstream out;
    out << "order,x,y,algorithm,step,width\n";
    for (std::size_t i = 0; i < trajectory.waypoints.size(); ++i) {
        out << i << ',' << trajectory.waypoints[i].x << ',' << trajectory.waypoints[i].y << ','
            << trajectory.algorithm << ',' << trajectory.stepSize << ',' << trajectory.transectWidth
            << '\n';
    }
    return out.str();
}

void writeTrajectoryCsv(const Trajectory& trajectory, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open for writing: " + path.string());
    file << trajectoryCsv(trajectory);
}

Trajectory loadTrajectoryCsv(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open trajectory csv: " + path.string());
    std::string header;
    if (!std::getline(file, header)) throw ValidationError("empty trajectory csv");
    if (header != "order,x,y,algorithm,step,width")
        throw ValidationError("unexpected trajectory csv header: " + header);

    Trajectory trajectory;
    std::string line;
    std::size_t expectedOrder = 0;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 6) throw ValidationError("malformed trajectory row: " + line);
        try {
            if (std::stoull(fields[0]) != expectedOrder)
                throw ValidationError("trajectory rows out of order");
            trajectory.waypoints.push_back(Pixel{std::stoi(fields[1]), std::stoi(fields[2])});
            trajectory.algorithm = fields[3];
            trajectory.stepSize = std::stoi(fields[4]);
            trajectory.transectWidth = std::stoi(fields[5]);
        } catch (const std::logic_error&) {
            throw ValidationError("malformed trajectory row: " + line);
        }
        ++expectedOrder;
    }
    return trajectory;
}

}  // namespace plume
