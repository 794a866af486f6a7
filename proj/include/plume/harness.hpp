#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plume/classify.hpp"
#include "plume/common.hpp"
#include "plume/morphology.hpp"
#include "plume/planner.hpp"
#include "plume/raster.hpp"

namespace plume {

struct UtilityFields {
    NormalizedField intensity;  // label-masked blue band, max-normalized
    NormalizedField gradient;   // 5x5 Sobel magnitude of intensity, max-normalized
};

NormalizedField intensityField(const Scene& scene);
// 5x5 Sobel (3x3 Sobel smoothed with a 3x3 binomial), reflect-101 borders,
// magnitude normalized by the field maximum.
NormalizedField gradientField(const NormalizedField& intensity);
UtilityFields computeUtilityFields(const Scene& scene);

struct TrajectoryMetrics {
    std::size_t pixelsObserved = 0;  // waypoint count; transect crossings revisit pixels
    std::size_t uniquePixels = 0;    // deduplicated variant of pixelsObserved
    double ratioPlume = 0.0;     // waypoints inside the label / all waypoints
    double meanIntensity = 0.0;  // over all waypoints; off-plume contributes 0
    double meanGradient = 0.0;
    bool degenerate = false;  // empty trajectory
};

TrajectoryMetrics evaluateTrajectory(const Trajectory& trajectory, const Scene& scene,
                                     const UtilityFields& fields);

struct StageTiming {
    double classifySeconds = 0.0;
    double denoiseSeconds = 0.0;
    double planSeconds = 0.0;

    // Stages a spacecraft would run; ground-truth evaluation is excluded.
    double onboardSeconds() const { return classifySeconds + denoiseSeconds + planSeconds; }
};

struct RunReport {
    std::string sceneId;
    std::string classifierName;
    std::string algorithmName;
    TrajectoryMetrics metrics;
    StageTiming timing;
};

// Where the pipeline's plume mask comes from: a trained model, the
// ground-truth label (oracle), an imported mask, or nothing (baselines).
class MaskSource {
  public:
    static MaskSource none();
    static MaskSource fromModel(Model model);
    static MaskSource fromModel(Model model, std::string name);
    static MaskSource oracle();
    static MaskSource fixed(BinaryMask mask, std::string name);

    bool empty() const { return kind_ == Kind::None; }
    const std::string& name() const { return name_; }
    BinaryMask produce(const Scene& scene) const;

  private:
    enum class Kind { None, Model, Oracle, Fixed };

    MaskSource() = default;

    Kind kind_ = Kind::None;
    std::string name_ = "N/A";
    std::optional<Model> model_;
    std::optional<BinaryMask> mask_;
};

struct PipelineConfig {
    DenoiseConfig denoise;
};

struct PipelineResult {
    Trajectory trajectory;
    RunReport report;
    BinaryMask rawMask;       // empty for baseline algorithms
    BinaryMask denoisedMask;  // empty for baseline algorithms
};

// classify -> denoise -> plan -> evaluate. Baseline algorithms skip the mask
// stages. Pass precomputed fields to avoid recomputing them per cell.
PipelineResult runPipeline(const Scene& scene, const MaskSource& source, PlanAlgorithm algorithm,
                           const PipelineConfig& config,
                           const UtilityFields* precomputedFields = nullptr);

struct ExperimentConfig {
    std::uint64_t seed = 0;
    double trainFraction = 21.0 / 38.0;
    PipelineConfig pipeline;
    HyperParams hyper;
    std::vector<ModelKind> classifiers = allModelKinds();
    std::vector<PlanAlgorithm> algorithms = {
        PlanAlgorithm::TraceOutline,
        PlanAlgorithm::TrackCenter,
        PlanAlgorithm::DiagonalTransect,
        PlanAlgorithm::LawnmowerTransect,
    };
    bool includeBaselines = true;
};

struct ExperimentResult {
    std::vector<std::size_t> trainIndices;
    std::vector<std::size_t> testIndices;
    std::vector<RunReport> reports;  // test-scene major, then cell order
};

ExperimentResult runExperiment(const std::vector<Scene>& scenes, const ExperimentConfig& config);

struct AggregateRow {
    std::string classifierName;
    std::string algorithmName;
    std::size_t sceneCount = 0;
    double meanPixelsObserved = 0.0;
    double meanUniquePixels = 0.0;
    double meanRatioPlume = 0.0;
    double meanIntensity = 0.0;
    double meanGradient = 0.0;
    double meanOnboardSeconds = 0.0;
};

// One row per (algorithm, classifier) cell, baselines first, then cells in
// configured order.
std::vector<AggregateRow> aggregateReports(const std::vector<RunReport>& reports);

// detail.csv and aggregate.csv hold only deterministic metrics; wall-clock
// timings go to timing.csv / timing_aggregate.csv so fixed seeds reproduce
// the metric files byte for byte.
void writeReports(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& directory);

// Renders aggregate.csv (+ timing_aggregate.csv if present) as a text table.
std::string renderReportDirectory(const std::filesystem::path& directory);

// Grayscale blue band, denoised mask tinted, waypoints in red; visit order
// goes to <path>.waypoints.csv.
void emitOverlay(const Scene& scene, const Trajectory& trajectory, const BinaryMask& denoisedMask,
                 const std::filesystem::path& path);

// Dataset manifest: JSON list of scene manifest paths relative to it.
void saveDatasetManifest(const std::vector<std::string>& sceneManifests,
                         const std::filesystem::path& path);
std::vector<Scene> loadDataset(const std::filesystem::path& path);

}  // namespace plume
