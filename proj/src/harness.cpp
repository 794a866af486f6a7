#include "plume/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace plume {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start, Clock::time_point end) {
    return std::chrono::duration<double>(end - start).count();
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

std::vector<std::string> splitCsvRow(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, ',')) fields.push_back(field);
    return fields;
}

std::vector<std::vector<std::string>> readCsv(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open csv: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(file, line)) {
        if (!line.empty()) rows.push_back(splitCsvRow(line));
    }
    return rows;
}

std::ofstream openForWriting(const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open for writing: " + path.string());
    return file;
}

}  // namespace

NormalizedField intensityField(const Scene& scene) {
    if (!scene.label) throw ValidationError("scene has no label: " + scene.id);
    NormalizedField field(scene.width, scene.height);
    const std::vector<std::uint16_t>& blue = scene.bands[static_cast<std::size_t>(Band::Blue)];
    double maximum = 0.0;
    for (std::size_t i = 0; i < scene.pixelCount(); ++i) {
        const double value =
            scene.label->values()[i] != 0 ? static_cast<double>(blue[i]) / kSampleMax : 0.0;
        field.values()[i] = value;
        maximum = std::max(maximum, value);
    }
    if (maximum > 0.0) {
        for (double& value : field.values()) value /= maximum;
    }
    return field;
}

NormalizedField gradientField(const NormalizedField& intensity) {
    // 5x5 Sobel = outer product of the binomial smoother [1 4 6 4 1] with the
    // derivative [-1 -2 0 2 1]. The derivative is applied to differences of
    // smoothed lines so a constant field cancels exactly to zero.
    static constexpr int kSmooth[5] = {1, 4, 6, 4, 1};

    const int width = intensity.width();
    const int height = intensity.height();
    NormalizedField field(width, height);
    double maximum = 0.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double column[5];
            double row[5];
            for (int k = -2; k <= 2; ++k) {
                double columnSum = 0.0;
                double rowSum = 0.0;
                for (int j = -2; j <= 2; ++j) {
                    columnSum +=
                        kSmooth[j + 2] *
                        intensity.at(reflect101(x + k, width), reflect101(y + j, height));
                    rowSum += kSmooth[j + 2] *
                              intensity.at(reflect101(x + j, width), reflect101(y + k, height));
                }
                column[k + 2] = columnSum;
                row[k + 2] = rowSum;
            }
            const double gx = 2.0 * (column[3] - column[1]) + (column[4] - column[0]);
            const double gy = 2.0 * (row[3] - row[1]) + (row[4] - row[0]);
            const double magnitude = std::hypot(gx, gy);
            field.set(x, y, magnitude);
            maximum = std::max(maximum, magnitude);
        }
    }
    if (maximum > 0.0) {
        for (double& value : field.values()) value /= maximum;
    }
    return field;
}

UtilityFields computeUtilityFields(const Scene& scene) {
    UtilityFields fields;
    fields.intensity = intensityField(scene);
    fields.gradient = gradientField(fields.intensity);
    return fields;
}

TrajectoryMetrics evaluateTrajectory(const Trajectory& trajectory, const Scene& scene,
                                     const UtilityFields& fields) {
    if (!scene.label) throw ValidationError("scene has no label: " + scene.id);
    if (fields.intensity.width() != scene.width || fields.intensity.height() != scene.height)
        throw ContractError("utility fields do not match scene dimensions");

    TrajectoryMetrics metrics;
    metrics.pixelsObserved = trajectory.waypoints.size();
    if (trajectory.waypoints.empty()) {
        metrics.degenerate = true;
        return metrics;
    }

    std::size_t onLabel = 0;
    double intensitySum = 0.0;
    double gradientSum = 0.0;
    std::set<std::pair<int, int>> visited;
    for (const Pixel& p : trajectory.waypoints) {
        if (!scene.label->inFrame(p.x, p.y))
            throw ContractError("out-of-frame waypoint (planner contract violation)");
        if (scene.label->at(p.x, p.y)) ++onLabel;
        intensitySum += fields.intensity.at(p.x, p.y);
        gradientSum += fields.gradient.at(p.x, p.y);
        visited.emplace(p.x, p.y);
    }
    metrics.uniquePixels = visited.size();
    const double count = static_cast<double>(trajectory.waypoints.size());
    metrics.ratioPlume = static_cast<double>(onLabel) / count;
    metrics.meanIntensity = intensitySum / count;
    metrics.meanGradient = gradientSum / count;
    return metrics;
}

MaskSource MaskSource::none() { return MaskSource(); }

MaskSource MaskSource::fromModel(Model model) {
    return fromModel(std::move(model), "");
}

MaskSource MaskSource::fromModel(Model model, std::string name) {
    MaskSource source;
    source.kind_ = Kind::Model;
    source.name_ = name.empty() ? modelKindName(model.kind) : std::move(name);
    source.model_ = std::move(model);
    return source;
}

MaskSource MaskSource::oracle() {
    MaskSource source;
    source.kind_ = Kind::Oracle;
    source.name_ = "oracle";
    return source;
}

MaskSource MaskSource::fixed(BinaryMask mask, std::string name) {
    MaskSource source;
    source.kind_ = Kind::Fixed;
    source.name_ = std::move(name);
    source.mask_ = std::move(mask);
    return source;
}

BinaryMask MaskSource::produce(const Scene& scene) const {
    switch (kind_) {
        case Kind::None:
            throw ContractError("baseline mask source cannot produce a mask");
        case Kind::Model:
            return predictMask(*model_, scene);
        case Kind::Oracle:
            if (!scene.label) throw ValidationError("scene has no label: " + scene.id);
            return *scene.label;
        case Kind::Fixed:
            if (mask_->width() != scene.width || mask_->height() != scene.height)
                throw ValidationError("external mask dimensions do not match the scene");
            return *mask_;
    }
    throw ContractError("unknown mask source kind");
}

PipelineResult runPipeline(const Scene& scene, const MaskSource& source, PlanAlgorithm algorithm,
                           const PipelineConfig& config, const UtilityFields* precomputedFields) {
    scene.validate();
    config.denoise.validate();
    if (usesPlumeMask(algorithm) && source.empty())
        throw ValidationError("algorithm requires a plume mask source");

    PipelineResult result;
    const int step = computeStepSize(scene.width);

    const Clock::time_point start = Clock::now();
    Clock::time_point afterClassify = start;
    Clock::time_point afterDenoise = start;
    if (usesPlumeMask(algorithm)) {
        result.rawMask = source.produce(scene);
        afterClassify = Clock::now();
        result.denoisedMask = denoise(result.rawMask, config.denoise);
        afterDenoise = Clock::now();
        result.trajectory = planFromPolygons(algorithm, getContours(result.denoisedMask), step,
                                             scene.width, scene.height);
    } else if (algorithm == PlanAlgorithm::StraightNadir) {
        result.trajectory = planStraightNadir(scene.width, scene.height, step);
    } else {
        result.trajectory =
            planNaiveTransect(scene.width, scene.height, step, transectSpacing(step));
    }
    const Clock::time_point afterPlan = Clock::now();

    result.report.sceneId = scene.id;
    result.report.classifierName = usesPlumeMask(algorithm) ? source.name() : "N/A";
    result.report.algorithmName = algorithmName(algorithm);
    result.report.timing.classifySeconds = secondsSince(start, afterClassify);
    result.report.timing.denoiseSeconds = secondsSince(afterClassify, afterDenoise);
    result.report.timing.planSeconds = secondsSince(afterDenoise, afterPlan);

    if (precomputedFields) {
        result.report.metrics = evaluateTrajectory(result.trajectory, scene, *precomputedFields);
    } else {
        const UtilityFields fields = computeUtilityFields(scene);
        result.report.metrics = evaluateTrajectory(result.trajectory, scene, fields);
    }
    return result;
}

ExperimentResult runExperiment(const std::vector<Scene>& scenes, const ExperimentConfig& config) {
    if (!(config.trainFraction > 0.0 && config.trainFraction < 1.0))
        throw ValidationError("trainFraction must be in (0, 1)");
    if (scenes.size() < 2) throw ValidationError("empty test split");
    config.pipeline.denoise.validate();
    config.hyper.validate();

    Rng splitRng(deriveSeed(config.seed, 0x59117000ULL));
    const std::vector<int> permutation =
        shuffledIndices(static_cast<int>(scenes.size()), splitRng);
    const std::size_t trainCount = std::clamp<std::size_t>(
        static_cast<std::size_t>(
            std::llround(config.trainFraction * static_cast<double>(scenes.size()))),
        1, scenes.size() - 1);

    ExperimentResult result;
    result.trainIndices.assign(permutation.begin(), permutation.begin() + trainCount);
    result.testIndices.assign(permutation.begin() + trainCount, permutation.end());
    std::sort(result.trainIndices.begin(), result.trainIndices.end());
    std::sort(result.testIndices.begin(), result.testIndices.end());

    std::vector<const Scene*> trainScenes;
    for (std::size_t index : result.trainIndices) trainScenes.push_back(&scenes[index]);

    std::vector<MaskSource> sources;
    for (std::size_t k = 0; k < config.classifiers.size(); ++k) {
        HyperParams hyper = config.hyper;
        hyper.seed = deriveSeed(config.seed, 0x7A110000ULL + k);
        sources.push_back(
            MaskSource::fromModel(trainClassifier(config.classifiers[k], trainScenes, hyper)));
    }

    for (std::size_t index : result.testIndices) {
        const Scene& scene = scenes[index];
        const UtilityFields fields = computeUtilityFields(scene);
        if (config.includeBaselines) {
            result.reports.push_back(runPipeline(scene, MaskSource::none(),
                                                 PlanAlgorithm::StraightNadir, config.pipeline,
                                                 &fields)
                                         .report);
            result.reports.push_back(runPipeline(scene, MaskSource::none(),
                                                 PlanAlgorithm::NaiveTransect, config.pipeline,
                                                 &fields)
                                         .report);
        }
        for (PlanAlgorithm algorithm : config.algorithms) {
            for (const MaskSource& source : sources) {
                result.reports.push_back(
                    runPipeline(scene, source, algorithm, config.pipeline, &fields).report);
            }
        }
    }
    return result;
}

std::vector<AggregateRow> aggregateReports(const std::vector<RunReport>& reports) {
    std::vector<AggregateRow> rows;
    const auto find = [&rows](const RunReport& report) -> AggregateRow& {
        for (AggregateRow& row : rows) {
            if (row.classifierName == report.classifierName &&
                row.algorithmName == report.algorithmName)
                return row;
        }
        AggregateRow row;
        row.classifierName = report.classifierName;
        row.algorithmName = report.algorithmName;
        rows.push_back(row);
        return rows.back();
    };
    for (const RunReport& report : reports) {
        AggregateRow& row = find(report);
        row.sceneCount += 1;
        row.meanPixelsObserved += static_cast<double>(report.metrics.pixelsObserved);
        row.meanUniquePixels += static_cast<double>(report.metrics.uniquePixels);
        row.meanRatioPlume += report.metrics.ratioPlume;
        row.meanIntensity += report.metrics.meanIntensity;
        row.meanGradient += report.metrics.meanGradient;
        row.meanOnboardSeconds += report.timing.onboardSeconds();
    }
    for (AggregateRow& row : rows) {
        const double n = static_cast<double>(row.sceneCount);
        row.meanPixelsObserved /= n;
        row.meanUniquePixels /= n;
        row.meanRatioPlume /= n;
        row.meanIntensity /= n;
        row.meanGradient /= n;
        row.meanOnboardSeconds /= n;
    }
    return rows;
}

void writeReports(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);

    {
        std::ofstream detail = openForWriting(directory / "detail.csv");
        detail << "scene_id,classifier,algorithm,pixels_observed,unique_pixels,ratio_plume,"
                  "mean_intensity,mean_gradient,degenerate\n";
        for (const RunReport& report : result.reports) {
            detail << report.sceneId << ',' << report.classifierName << ','
                   << report.algorithmName << ',' << report.metrics.pixelsObserved << ','
                   << report.metrics.uniquePixels << ','
                   << formatDouble(report.metrics.ratioPlume) << ','
                   << formatDouble(report.metrics.meanIntensity) << ','
                   << formatDouble(report.metrics.meanGradient) << ','
                   << (report.metrics.degenerate ? 1 : 0) << '\n';
        }
    }
    {
        std::ofstream aggregate = openForWriting(directory / "aggregate.csv");
        aggregate << "classifier,algorithm,scenes,mean_pixels_observed,mean_unique_pixels,"
                     "mean_ratio_plume,mean_intensity,mean_gradient\n";
        for (const AggregateRow& row : aggregateReports(result.reports)) {
            aggregate << row.classifierName << ',' << row.algorithmName << ',' << row.sceneCount
                      << ',' << formatDouble(row.meanPixelsObserved) << ','
                      << formatDouble(row.meanUniquePixels) << ','
                      << formatDouble(row.meanRatioPlume) << ',' << formatDouble(row.meanIntensity)
                      << ',' << formatDouble(row.meanGradient) << '\n';
        }
    }
    {
        std::ofstream timing = openForWriting(directory / "timing.csv");
        timing << "scene_id,classifier,algorithm,classify_seconds,denoise_seconds,plan_seconds,"
                  "onboard_seconds\n";
        for (const RunReport& report : result.reports) {
            timing << report.sceneId << ',' << report.classifierName << ',' << report.algorithmName
                   << ',' << formatDouble(report.timing.classifySeconds) << ','
                   << formatDouble(report.timing.denoiseSeconds) << ','
                   << formatDouble(report.timing.planSeconds) << ','
                   << formatDouble(report.timing.onboardSeconds()) << '\n';
        }
    }
    {
        std::ofstream timing = openForWriting(directory / "timing_aggregate.csv");
        timing << "classifier,algorithm,mean_onboard_seconds\n";
        for (const AggregateRow& row : aggregateReports(result.reports)) {
            timing << row.classifierName << ',' << row.algorithmName << ','
                   << formatDouble(row.meanOnboardSeconds) << '\n';
        }
    }
    {
        json j;
        j["seed"] = config.seed;
        j["train_fraction"] = config.trainFraction;
        j["denoise"] = {{"max_merge_iterations", config.pipeline.denoise.maxMergeIterations},
                        {"min_area_fraction", config.pipeline.denoise.minAreaFraction}};
        j["hyper"] = {{"threshold_grid_size", config.hyper.thresholdGridSize},
                      {"lr_learning_rate", config.hyper.lrLearningRate},
                      {"lr_epochs", config.hyper.lrEpochs},
                      {"tree_max_depth", config.hyper.treeMaxDepth},
                      {"tree_min_leaf", config.hyper.treeMinLeaf},
                      {"forest_tree_count", config.hyper.forestTreeCount},
                      {"forest_features_per_split", config.hyper.forestFeaturesPerSplit},
                      {"mlp_hidden_units", config.hyper.mlpHiddenUnits},
                      {"mlp_learning_rate", config.hyper.mlpLearningRate},
                      {"mlp_epochs", config.hyper.mlpEpochs},
                      {"mlp_init_sigma", config.hyper.mlpInitSigma},
                      {"seed", config.hyper.seed}};
        json classifiers = json::array();
        for (ModelKind kind : config.classifiers) classifiers.push_back(modelKindName(kind));
        j["classifiers"] = classifiers;
        json algorithms = json::array();
        for (PlanAlgorithm algorithm : config.algorithms)
            algorithms.push_back(algorithmName(algorithm));
        j["algorithms"] = algorithms;
        j["include_baselines"] = config.includeBaselines;
        j["train_scene_indices"] = result.trainIndices;
        j["test_scene_indices"] = result.testIndices;
        std::ofstream file = openForWriting(directory / "run_config.json");
        file << j.dump(2) << '\n';
    }
}

std::string renderReportDirectory(const std::filesystem::path& directory) {
    const std::vector<std::vector<std::string>> aggregate = readCsv(directory / "aggregate.csv");
    if (aggregate.size() < 1) throw ValidationError("aggregate.csv is empty");

    std::vector<std::vector<std::string>> timing;
    const std::filesystem::path timingPath = directory / "timing_aggregate.csv";
    if (std::filesystem::exists(timingPath)) timing = readCsv(timingPath);

    const auto timingFor = [&timing](const std::string& classifier,
                                     const std::string& algorithm) -> std::string {
        for (std::size_t i = 1; i < timing.size(); ++i) {
            if (timing[i].size() >= 3 && timing[i][0] == classifier && timing[i][1] == algorithm)
                return timing[i][2];
        }
        return "";
    };

    const auto fixed = [](const std::string& text, int decimals) {
        try {
            std::ostringstream out;
            out << std::fixed << std::setprecision(decimals) << std::stod(text);
            return out.str();
        } catch (const std::logic_error&) {
            return text;
        }
    };

    std::vector<std::vector<std::string>> table;
    table.push_back({"algorithm", "classifier", "scenes", "pixels", "ratio_plume", "intensity",
                     "gradient", "onboard_s"});
    for (std::size_t i = 1; i < aggregate.size(); ++i) {
        const std::vector<std::string>& row = aggregate[i];
        if (row.size() < 8) throw ValidationError("malformed aggregate.csv row");
        table.push_back({row[1], row[0], row[2], fixed(row[3], 3), fixed(row[5], 3),
                         fixed(row[6], 3), fixed(row[7], 3), fixed(timingFor(row[0], row[1]), 4)});
    }

    std::vector<std::size_t> widths(table[0].size(), 0);
    for (const auto& row : table)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream out;
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t c = 0; c < table[r].size(); ++c) {
            out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << table[r][c];
        }
        out << '\n';
        if (r == 0) {
            for (std::size_t c = 0; c < widths.size(); ++c)
                out << std::string(widths[c], '-') << "  ";
            out << '\n';
        }
    }
    return out.str();
}

void emitOverlay(const Scene& scene, const Trajectory& trajectory, const BinaryMask& denoisedMask,
                 const std::filesystem::path& path) {
    scene.validate();
    const bool haveMask = denoisedMask.pixelCount() > 0;
    if (haveMask && (denoisedMask.width() != scene.width || denoisedMask.height() != scene.height))
        throw ValidationError("overlay mask dimensions do not match the scene");

    const std::vector<std::uint16_t>& blue = scene.bands[static_cast<std::size_t>(Band::Blue)];
    std::vector<std::uint8_t> rgb(scene.pixelCount() * 3);
    for (std::size_t i = 0; i < scene.pixelCount(); ++i) {
        const std::uint8_t gray =
            static_cast<std::uint8_t>(std::llround(255.0 * blue[i] / kSampleMax));
        std::uint8_t r = gray, g = gray, b = gray;
        if (haveMask && denoisedMask.values()[i] != 0)
            g = static_cast<std::uint8_t>(128 + gray / 2);
        rgb[3 * i] = r;
        rgb[3 * i + 1] = g;
        rgb[3 * i + 2] = b;
    }
    for (const Pixel& p : trajectory.waypoints) {
        if (!scene.inFrame(p.x, p.y)) throw ContractError("out-of-frame waypoint in overlay");
        const std::size_t i = static_cast<std::size_t>(p.y) * scene.width + p.x;
        rgb[3 * i] = 255;
        rgb[3 * i + 1] = 0;
        rgb[3 * i + 2] = 0;
    }

    std::ofstream file = openForWriting(path);
    file << "P6\n" << scene.width << ' ' << scene.height << "\n255\n";
    file.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!file) throw ValidationError("failed writing overlay: " + path.string());

    writeTrajectoryCsv(trajectory, path.string() + ".waypoints.csv");
}

void saveDatasetManifest(const std::vector<std::string>& sceneManifests,
                         const std::filesystem::path& path) {
    json j;
    j["scenes"] = sceneManifests;
    std::ofstream file = openForWriting(path);
    file << j.dump(2) << '\n';
}

std::vector<Scene> loadDataset(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open dataset manifest: " + path.string());
    json j;
    try {
        file >> j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid dataset manifest: ") + e.what());
    }
    if (!j.contains("scenes") || !j["scenes"].is_array())
        throw ValidationError("dataset manifest must contain a scenes array");
    std::vector<Scene> scenes;
    const std::filesystem::path base = path.parent_path();
    for (const json& entry : j["scenes"]) {
        if (!entry.is_string()) throw ValidationError("dataset scene entries must be paths");
        scenes.push_back(loadScene(base / entry.get<std::string>()));
    }
    if (scenes.empty()) throw ValidationError("dataset manifest lists no scenes");
    return scenes;
}

}  // namespace plume
