#include "plume/morphology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace plume {

namespace {

// Moore neighborhood in clockwise order for y-down images, starting east.
constexpr int kDx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};

int directionIndex(const Pixel& from, const Pixel& to) {
    for (int d = 0; d < 8; ++d) {
        if (from.x + kDx8[d] == to.x && from.y + kDy8[d] == to.y) return d;
    }
    throw ContractError("direction lookup between non-adjacent pixels");
}

// Clockwise Moore boundary trace. start must be the topmost-then-leftmost
// pixel of its component so the west neighbor is guaranteed background.
std::vector<Pixel> traceBoundary(const BinaryMask& mask, const Pixel& start) {
    std::vector<Pixel> contour{start};
    Pixel current = start;
    Pixel backtrack{start.x - 1, start.y};
    Pixel firstMove{0, 0};
    bool haveFirstMove = false;

    const std::size_t maxSteps = 4 * mask.pixelCount() + 8;
    for (std::size_t step = 0; step < maxSteps; ++step) {
        const int backDir = directionIndex(current, backtrack);
        Pixel lastBackground = backtrack;
        Pixel next{0, 0};
        bool found = false;
        for (int k = 1; k <= 8; ++k) {
            const int d = (backDir + k) % 8;
            const Pixel candidate{current.x + kDx8[d], current.y + kDy8[d]};
            if (mask.atClamped(candidate.x, candidate.y)) {
                next = candidate;
                found = true;
                break;
            }
            lastBackground = candidate;
        }
        if (!found) return contour;  // isolated pixel

        if (!haveFirstMove) {
            firstMove = next;
            haveFirstMove = true;
        } else if (current == start && next == firstMove) {
            // Cycle closed; drop the duplicated start appended last step.
            if (contour.size() > 1 && contour.back() == contour.front()) contour.pop_back();
            return contour;
        }
        contour.push_back(next);
        backtrack = lastBackground;
        current = next;
    }
    throw ContractError("boundary trace failed to close");
}

}  // namespace

BinaryMask erode(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool all = true;
            for (int d = 0; all && d < 8; ++d) all = mask.atClamped(x + kDx8[d], y + kDy8[d]);
            out.set(x, y, all && mask.at(x, y));
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool any = mask.at(x, y);
            for (int d = 0; !any && d < 8; ++d) any = mask.atClamped(x + kDx8[d], y + kDy8[d]);
            out.set(x, y, any);
        }
    }
    return out;
}

std::vector<int> labelComponents(const BinaryMask& mask, int& componentCount) {
    std::vector<int> labels(mask.pixelCount(), -1);
    std::vector<std::size_t> stack;
    int nextLabel = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * mask.width() + x;
            if (!mask.at(x, y) || labels[idx] >= 0) continue;
            labels[idx] = nextLabel;
            stack.assign(1, idx);
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                const int cx = static_cast<int>(cur % mask.width());
                const int cy = static_cast<int>(cur / mask.width());
                for (int d = 0; d < 8; ++d) {
                    const int nx = cx + kDx8[d];
                    const int ny = cy + kDy8[d];
                    if (!mask.inFrame(nx, ny) || !mask.at(nx, ny)) continue;
                    const std::size_t nIdx = static_cast<std::size_t>(ny) * mask.width() + nx;
                    if (labels[nIdx] < 0) {
                        labels[nIdx] = nextLabel;
                        stack.push_back(nIdx);
                    }
                }
            }
            ++nextLabel;
        }
    }
    componentCount = nextLabel;
    return labels;
}

int componentCount(const BinaryMask& mask) {
    int count = 0;
    labelComponents(mask, count);
    return count;
}

std::vector<PlumePolygon> getContours(const BinaryMask& mask) {
    int count = 0;
    const std::vector<int> labels = labelComponents(mask, count);

    // Row-major scan meets each component first at its topmost-leftmost pixel.
    std::vector<Pixel> starts(static_cast<std::size_t>(count), Pixel{-1, -1});
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const int label = labels[static_cast<std::size_t>(y) * mask.width() + x];
            if (label >= 0 && starts[static_cast<std::size_t>(label)].x < 0)
                starts[static_cast<std::size_t>(label)] = Pixel{x, y};
        }
    }

    std::vector<PlumePolygon> polygons;
    polygons.reserve(starts.size());
    for (int id = 0; id < count; ++id) {
        PlumePolygon polygon;
        polygon.componentId = id;
        polygon.contour = traceBoundary(mask, starts[static_cast<std::size_t>(id)]);
        polygon.area = fillContour(polygon.contour, mask.width(), mask.height()).countTrue();
        polygons.push_back(std::move(polygon));
    }
    return polygons;
}

BinaryMask fillContour(const std::vector<Pixel>& contour, int width, int height) {
    BinaryMask out(width, height);
    if (contour.empty()) return out;

    int minX = contour[0].x, maxX = contour[0].x;
    int minY = contour[0].y, maxY = contour[0].y;
    for (const Pixel& p : contour) {
        if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
            throw ValidationError("contour point out of frame");
        minX = std::min(minX, p.x);
        maxX = std::max(maxX, p.x);
        minY = std::min(minY, p.y);
        maxY = std::max(maxY, p.y);
    }

    // Work on the bounding box plus a one-pixel margin; flood the exterior
    // 4-connectedly from the margin. An 8-connected boundary cannot be
    // crossed by a 4-connected flood, so unreached cells are the fill.
    const int gw = maxX - minX + 3;
    const int gh = maxY - minY + 3;
    std::vector<std::uint8_t> boundary(static_cast<std::size_t>(gw) * gh, 0);
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(gw) * gh, 0);
    for (const Pixel& p : contour)
        boundary[static_cast<std::size_t>(p.y - minY + 1) * gw + (p.x - minX + 1)] = 1;

    std::vector<int> stack{0};
    outside[0] = 1;
    constexpr int kDx4[4] = {1, -1, 0, 0};
    constexpr int kDy4[4] = {0, 0, 1, -1};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % gw;
        const int cy = cur / gw;
        for (int d = 0; d < 4; ++d) {
            const int nx = cx + kDx4[d];
            const int ny = cy + kDy4[d];
            if (nx < 0 || nx >= gw || ny < 0 || ny >= gh) continue;
            const int nIdx = ny * gw + nx;
            if (outside[static_cast<std::size_t>(nIdx)] || boundary[static_cast<std::size_t>(nIdx)]) continue;
            outside[static_cast<std::size_t>(nIdx)] = 1;
            stack.push_back(nIdx);
        }
    }

    for (int gy = 1; gy < gh - 1; ++gy) {
        for (int gx = 1; gx < gw - 1; ++gx) {
            if (!outside[static_cast<std::size_t>(gy) * gw + gx])
                out.set(gx + minX - 1, gy + minY - 1, true);
        }
    }
    return out;
}

BinaryMask mergeByClosing(const BinaryMask& mask, int maxIterations) {
    if (maxIterations < 0) throw ValidationError("maxIterations must be >= 0");
    BinaryMask best = mask;
    int bestCount = componentCount(mask);
    BinaryMask current = mask;
    int previousCount = bestCount;
    for (int i = 0; i < maxIterations; ++i) {
        current = erode(dilate(current));
        const int count = componentCount(current);
        if (count < bestCount) {
            best = current;
            bestCount = count;
        }
        if (count >= previousCount) break;
        previousCount = count;
    }
    return best;
}

std::vector<PlumePolygon> filterByArea(const std::vector<PlumePolygon>& polygons, double minArea) {
    std::vector<PlumePolygon> kept;
    for (const PlumePolygon& polygon : polygons) {
        if (static_cast<double>(polygon.area) >= minArea) kept.push_back(polygon);
    }
    return kept;
}

BinaryMask reconstructMask(const std::vector<PlumePolygon>& polygons, int width, int height) {
    BinaryMask out(width, height);
    for (const PlumePolygon& polygon : polygons) {
        const BinaryMask filled = fillContour(polygon.contour, width, height);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (filled.at(x, y)) out.set(x, y, true);
            }
        }
    }
    return out;
}

BinaryMask denoise(const BinaryMask& mask, const DenoiseConfig& config) {
    config.validate();
    const BinaryMask merged = mergeByClosing(mask, config.maxMergeIterations);
    const std::vector<PlumePolygon> polygons = getContours(merged);
    const double minArea = config.minAreaFraction * static_cast<double>(mask.pixelCount());
    return reconstructMask(filterByArea(polygons, minArea), mask.width(), mask.height());
}

std::string polygonsToCsv(const std::vector<PlumePolygon>& polygons) {
    std::ostringstream out;
    out << "component_id,point_index,x,y\n";
    for (const PlumePolygon& polygon : polygons) {
        for (std::size_t i = 0; i < polygon.contour.size(); ++i) {
            out << polygon.componentId << ',' << i << ',' << polygon.contour[i].x << ','
                << polygon.contour[i].y << '\n';
        }
    }
    return out.str();
}

void writePolygonsCsv(const std::vector<PlumePolygon>& polygons, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open for writing: " + path.string());
    file << polygonsToCsv(polygons);
}

}  // namespace plume
