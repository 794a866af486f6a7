#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "plume/harness.hpp"
#include "plume/synthgen.hpp"
#include "test_util.hpp"

using namespace plume;

namespace {

namespace fs = std::filesystem;

fs::path freshDir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string readBytes(const fs::path& path) {
    std::ifstream file(path, std::ios::binary);
    REQUIRE(file.good());
    return {std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
}

// Uniform bands with the label down the left half of the frame.
Scene halfScene(int width, int height) {
    Scene scene = testutil::sceneFromFields(width, height, [](int, int, int) { return 0.5; });
    BinaryMask label(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width / 2; ++x) label.set(x, y, true);
    scene.label = label;
    return scene;
}

Trajectory fromPoints(std::vector<Pixel> points) {
    Trajectory t;
    t.algorithm = "fixed";
    t.waypoints = std::move(points);
    t.segmentStarts = {0};
    return t;
}

std::vector<std::vector<std::string>> parseCsv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        rows.push_back(fields);
    }
    return rows;
}

}  // namespace

TEST_CASE("intensity field masks the blue band by the label") {
    SUBCASE("all-false label zeroes the field") {
        Scene scene = halfScene(12, 10);
        scene.label = BinaryMask(12, 10);
        const NormalizedField field = intensityField(scene);
        for (double v : field.values()) CHECK(v == 0.0);
    }

    SUBCASE("uniform blue normalizes to one on the label") {
        const Scene scene = halfScene(12, 10);
        const NormalizedField field = intensityField(scene);
        for (int y = 0; y < 10; ++y) {
            for (int x = 0; x < 12; ++x) {
                CHECK(field.at(x, y) == (x < 6 ? 1.0 : 0.0));
            }
        }
    }

    SUBCASE("maximum is exactly one for any nonempty label") {
        const auto scenes = generateDataset(1, 71, 64, 64);
        const NormalizedField field = intensityField(scenes.front());
        CHECK(field.maxValue() == 1.0);
    }

    SUBCASE("a label is required") {
        Scene scene = halfScene(8, 8);
        scene.label.reset();
        CHECK_THROWS_AS(intensityField(scene), ValidationError);
    }
}

TEST_CASE("gradient field applies a smoothed derivative") {
    SUBCASE("constant fields have zero gradient") {
        NormalizedField flat(9, 7, 0.4);
        const NormalizedField g = gradientField(flat);
        for (double v : g.values()) CHECK(v == 0.0);
    }

    SUBCASE("a linear ramp normalizes to one away from the borders") {
        NormalizedField ramp(16, 12);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x) ramp.set(x, y, x / 16.0);
        const NormalizedField g = gradientField(ramp);
        for (int y = 0; y < 12; ++y) {
            for (int x = 2; x <= 13; ++x) CHECK(g.at(x, y) == 1.0);
        }
        for (double v : g.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    SUBCASE("a sharp edge peaks within two pixels of the edge") {
        NormalizedField step(20, 10);
        for (int y = 0; y < 10; ++y)
            for (int x = 8; x < 20; ++x) step.set(x, y, 1.0);
        const NormalizedField g = gradientField(step);
        for (int y = 0; y < 10; ++y) {
            int best = 0;
            for (int x = 1; x < 20; ++x)
                if (g.at(x, y) > g.at(best, y)) best = x;
            CHECK(best >= 6);
            CHECK(best <= 10);
        }
    }
}

TEST_CASE("trajectory evaluation counts label hits") {
    const Scene scene = halfScene(20, 20);
    const UtilityFields fields = computeUtilityFields(scene);

    SUBCASE("fully on-plume trajectory") {
        const auto m =
            evaluateTrajectory(fromPoints({{1, 1}, {2, 3}, {4, 5}}), scene, fields);
        CHECK(m.ratioPlume == 1.0);
        CHECK(m.pixelsObserved == 3);
        CHECK(m.uniquePixels == 3);
        CHECK_FALSE(m.degenerate);
    }

    SUBCASE("empty trajectory is degenerate") {
        const auto m = evaluateTrajectory(fromPoints({}), scene, fields);
        CHECK(m.pixelsObserved == 0);
        CHECK(m.uniquePixels == 0);
        CHECK(m.ratioPlume == 0.0);
        CHECK(m.meanIntensity == 0.0);
        CHECK(m.meanGradient == 0.0);
        CHECK(m.degenerate);
    }

    SUBCASE("four of ten waypoints on the label") {
        std::vector<Pixel> points;
        for (int i = 0; i < 4; ++i) points.push_back({2, 2 + i});
        for (int i = 0; i < 6; ++i) points.push_back({15, 2 + i});
        const auto m = evaluateTrajectory(fromPoints(points), scene, fields);
        CHECK(m.ratioPlume == doctest::Approx(0.4));
    }

    SUBCASE("revisited pixels collapse in the deduplicated count") {
        const auto m =
            evaluateTrajectory(fromPoints({{1, 1}, {2, 2}, {1, 1}}), scene, fields);
        CHECK(m.pixelsObserved == 3);
        CHECK(m.uniquePixels == 2);
    }

    SUBCASE("out-of-frame waypoints violate the planner contract") {
        CHECK_THROWS_AS(evaluateTrajectory(fromPoints({{20, 0}}), scene, fields),
                        ContractError);
    }

    SUBCASE("mismatched fields violate the pipeline contract") {
        const UtilityFields other = computeUtilityFields(halfScene(10, 10));
        CHECK_THROWS_AS(evaluateTrajectory(fromPoints({{1, 1}}), scene, other),
                        ContractError);
    }

    SUBCASE("mean intensity never exceeds the plume ratio") {
        const auto scenes = generateDataset(2, 72, 64, 64);
        Rng rng(73);
        for (const Scene& s : scenes) {
            const UtilityFields f = computeUtilityFields(s);
            std::vector<Pixel> points;
            for (int i = 0; i < 40; ++i)
                points.push_back({static_cast<int>(rng.uniformInt(64)),
                                  static_cast<int>(rng.uniformInt(64))});
            const auto m = evaluateTrajectory(fromPoints(std::move(points)), s, f);
            CHECK(m.meanIntensity <= m.ratioPlume + 1e-12);
        }
    }
}

TEST_CASE("pipeline composition equals staged execution") {
    const auto scenes = generateDataset(1, 74, 96, 96);
    const Scene& scene = scenes.front();
    const PipelineConfig config;

    const Model model = trainClassifier(ModelKind::DecisionTree, {&scene}, HyperParams{});
    const MaskSource source = MaskSource::fromModel(model);
    const PipelineResult piped =
        runPipeline(scene, source, PlanAlgorithm::LawnmowerTransect, config);

    const BinaryMask raw = predictMask(model, scene);
    const BinaryMask cleaned = denoise(raw, config.denoise);
    const int step = computeStepSize(scene.width);
    const Trajectory planned = planFromPolygons(PlanAlgorithm::LawnmowerTransect,
                                                getContours(cleaned), step, scene.width,
                                                scene.height);
    const TrajectoryMetrics staged =
        evaluateTrajectory(planned, scene, computeUtilityFields(scene));

    CHECK(piped.rawMask == raw);
    CHECK(piped.denoisedMask == cleaned);
    CHECK(piped.trajectory.waypoints == planned.waypoints);
    CHECK(piped.report.metrics.pixelsObserved == staged.pixelsObserved);
    CHECK(piped.report.metrics.uniquePixels == staged.uniquePixels);
    CHECK(piped.report.metrics.ratioPlume == staged.ratioPlume);
    CHECK(piped.report.metrics.meanIntensity == staged.meanIntensity);
    CHECK(piped.report.metrics.meanGradient == staged.meanGradient);
    CHECK(piped.report.classifierName == "decision_tree");
    CHECK(piped.report.algorithmName == "lawnmower_transect");

    SUBCASE("baselines bypass the mask stages") {
        const PipelineResult nadir =
            runPipeline(scene, MaskSource::none(), PlanAlgorithm::StraightNadir, config);
        const Trajectory direct = planStraightNadir(scene.width, scene.height, step);
        CHECK(nadir.trajectory.waypoints == direct.waypoints);
        CHECK(nadir.report.classifierName == "N/A");
        CHECK(nadir.rawMask.pixelCount() == 0);
    }

    SUBCASE("mask-conditioned algorithms demand a mask source") {
        CHECK_THROWS_AS(
            runPipeline(scene, MaskSource::none(), PlanAlgorithm::TraceOutline, config),
            ValidationError);
    }
}

TEST_CASE("oracle-guided planning beats the nadir baseline") {
    const auto scenes = generateDataset(6, 75, 96, 96);
    const PipelineConfig config;
    double lawnmowerSum = 0.0;
    for (const Scene& scene : scenes) {
        const UtilityFields fields = computeUtilityFields(scene);
        const double nadirRatio = runPipeline(scene, MaskSource::none(),
                                              PlanAlgorithm::StraightNadir, config, &fields)
                                      .report.metrics.ratioPlume;
        CHECK(nadirRatio < 1.0);
        for (PlanAlgorithm algorithm :
             {PlanAlgorithm::TraceOutline, PlanAlgorithm::TrackCenter,
              PlanAlgorithm::DiagonalTransect, PlanAlgorithm::LawnmowerTransect}) {
            const double ratio =
                runPipeline(scene, MaskSource::oracle(), algorithm, config, &fields)
                    .report.metrics.ratioPlume;
            CHECK(ratio >= nadirRatio);
            if (algorithm == PlanAlgorithm::LawnmowerTransect) lawnmowerSum += ratio;
        }
    }
    CHECK(lawnmowerSum / 6.0 >= 0.6);
}

TEST_CASE("nadir plume ratio sits near the dataset coverage") {
    const auto scenes = generateDataset(30, 42, 96, 96);
    const PipelineConfig config;
    double sum = 0.0;
    for (const Scene& scene : scenes) {
        sum += runPipeline(scene, MaskSource::none(), PlanAlgorithm::StraightNadir, config)
                   .report.metrics.ratioPlume;
    }
    const double mean = sum / 30.0;
    CHECK(mean >= 0.03);
    CHECK(mean <= 0.15);
}

TEST_CASE("experiments split scenes and aggregate per cell") {
    const auto scenes = generateDataset(8, 76, 48, 48);
    ExperimentConfig config;
    config.seed = 5;
    config.classifiers = {ModelKind::DecisionTree};
    config.algorithms = {PlanAlgorithm::LawnmowerTransect};
    config.includeBaselines = false;

    const ExperimentResult result = runExperiment(scenes, config);

    SUBCASE("train and test indices partition the dataset") {
        std::set<std::size_t> all;
        for (std::size_t i : result.trainIndices) CHECK(all.insert(i).second);
        for (std::size_t i : result.testIndices) CHECK(all.insert(i).second);
        CHECK(all.size() == 8);
        CHECK(*all.rbegin() == 7);
        CHECK(result.trainIndices.size() == 4);  // round(8 * 21/38)
    }

    SUBCASE("one classifier and one algorithm yield one aggregate row") {
        CHECK(result.reports.size() == result.testIndices.size());
        const auto rows = aggregateReports(result.reports);
        REQUIRE(rows.size() == 1);
        CHECK(rows.front().classifierName == "decision_tree");
        CHECK(rows.front().algorithmName == "lawnmower_transect");
        CHECK(rows.front().sceneCount == result.testIndices.size());
    }

    SUBCASE("aggregate means match the detail rows") {
        const auto dir = freshDir("plume_experiment_mean");
        writeReports(result, config, dir);
        const auto detail = parseCsv(readBytes(dir / "detail.csv"));
        const auto aggregate = parseCsv(readBytes(dir / "aggregate.csv"));
        REQUIRE(aggregate.size() == 2);
        REQUIRE(detail.size() >= 2);
        double ratioSum = 0.0;
        for (std::size_t i = 1; i < detail.size(); ++i)
            ratioSum += std::stod(detail[i][5]);
        const double meanFromDetail = ratioSum / static_cast<double>(detail.size() - 1);
        CHECK(std::abs(std::stod(aggregate[1][5]) - meanFromDetail) < 1e-12);
    }

    SUBCASE("baselines get their own rows ahead of the grid") {
        ExperimentConfig withBaselines = config;
        withBaselines.includeBaselines = true;
        const ExperimentResult full = runExperiment(scenes, withBaselines);
        const auto rows = aggregateReports(full.reports);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].algorithmName == "straight_nadir");
        CHECK(rows[0].classifierName == "N/A");
        CHECK(rows[1].algorithmName == "naive_transect");
        CHECK(rows[2].algorithmName == "lawnmower_transect");
    }

    SUBCASE("datasets too small to split are rejected") {
        const auto one = generateDataset(1, 77, 48, 48);
        CHECK_THROWS_AS(runExperiment(one, config), ValidationError);
    }
}

TEST_CASE("identical seeds reproduce the metric reports byte for byte") {
    const auto scenes = generateDataset(5, 78, 48, 48);
    ExperimentConfig config;
    config.seed = 17;
    config.classifiers = {ModelKind::BandThreshold, ModelKind::GaussianNb};
    config.algorithms = {PlanAlgorithm::TraceOutline, PlanAlgorithm::TrackCenter};

    const auto dirA = freshDir("plume_experiment_a");
    const auto dirB = freshDir("plume_experiment_b");
    writeReports(runExperiment(scenes, config), config, dirA);
    writeReports(runExperiment(scenes, config), config, dirB);

    CHECK(readBytes(dirA / "detail.csv") == readBytes(dirB / "detail.csv"));
    CHECK(readBytes(dirA / "aggregate.csv") == readBytes(dirB / "aggregate.csv"));
    CHECK(readBytes(dirA / "run_config.json") == readBytes(dirB / "run_config.json"));

    SUBCASE("the rendered table lists every cell") {
        const std::string table = renderReportDirectory(dirA);
        CHECK(table.find("straight_nadir") != std::string::npos);
        CHECK(table.find("trace_outline") != std::string::npos);
        CHECK(table.find("track_center") != std::string::npos);
        CHECK(table.find("gaussian_nb") != std::string::npos);
        CHECK(table.find("onboard_s") != std::string::npos);
    }
}

TEST_CASE("overlay images mark waypoints in red") {
    const auto scenes = generateDataset(1, 79, 48, 48);
    const Scene& scene = scenes.front();
    const auto dir = freshDir("plume_overlay");

    const PipelineResult run = runPipeline(scene, MaskSource::oracle(),
                                           PlanAlgorithm::LawnmowerTransect, PipelineConfig{});
    REQUIRE(!run.trajectory.waypoints.empty());

    const auto path = dir / "overlay.ppm";
    emitOverlay(scene, run.trajectory, run.denoisedMask, path);

    const std::string bytes = readBytes(path);
    const std::string header = "P6\n48 48\n255\n";
    REQUIRE(bytes.substr(0, header.size()) == header);
    REQUIRE(bytes.size() == header.size() + 3u * 48 * 48);

    std::size_t redCount = 0;
    for (std::size_t i = header.size(); i + 2 < bytes.size(); i += 3) {
        if (static_cast<unsigned char>(bytes[i]) == 255 && bytes[i + 1] == 0 &&
            bytes[i + 2] == 0)
            ++redCount;
    }
    std::set<std::pair<int, int>> distinct;
    for (const Pixel& p : run.trajectory.waypoints) distinct.insert({p.x, p.y});
    CHECK(redCount == distinct.size());
    CHECK(fs::exists(dir / "overlay.ppm.waypoints.csv"));

    SUBCASE("an empty trajectory draws no red pixels") {
        const auto emptyPath = dir / "empty.ppm";
        emitOverlay(scene, Trajectory{}, BinaryMask(), emptyPath);
        const std::string empty = readBytes(emptyPath);
        std::size_t reds = 0;
        for (std::size_t i = header.size(); i + 2 < empty.size(); i += 3) {
            if (static_cast<unsigned char>(empty[i]) == 255 && empty[i + 1] == 0 &&
                empty[i + 2] == 0)
                ++reds;
        }
        CHECK(reds == 0);
    }
}

TEST_CASE("mask sources produce what they promise") {
    const auto scenes = generateDataset(1, 80, 32, 32);
    const Scene& scene = scenes.front();

    CHECK(MaskSource::oracle().produce(scene) == *scene.label);
    CHECK(MaskSource::none().empty());
    CHECK(MaskSource::none().name() == "N/A");
    CHECK_THROWS_AS(MaskSource::none().produce(scene), ContractError);

    const BinaryMask wrong(16, 16);
    CHECK_THROWS_AS(MaskSource::fixed(wrong, "external").produce(scene), ValidationError);

    Rng rng(81);
    const BinaryMask right = testutil::randomMask(rng, 32, 32, 0.2);
    const MaskSource fixed = MaskSource::fixed(right, "external");
    CHECK(fixed.name() == "external");
    CHECK(fixed.produce(scene) == right);
}

TEST_CASE("dataset manifests load the scenes they list") {
    const auto dir = freshDir("plume_dataset_manifest");
    const auto scenes = generateDataset(2, 82, 24, 24);
    saveScene(scenes[0], dir / "scene_000.json");
    saveScene(scenes[1], dir / "scene_001.json");
    saveDatasetManifest({"scene_000.json", "scene_001.json"}, dir / "dataset.json");

    const auto loaded = loadDataset(dir / "dataset.json");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == scenes[0].id);
    CHECK(loaded[1].id == scenes[1].id);
    CHECK(loaded[0].bands == scenes[0].bands);
    CHECK(*loaded[1].label == *scenes[1].label);

    CHECK_THROWS_AS(loadDataset(dir / "missing.json"), ValidationError);
    saveDatasetManifest({}, dir / "empty.json");
    CHECK_THROWS_AS(loadDataset(dir / "empty.json"), ValidationError);
}
