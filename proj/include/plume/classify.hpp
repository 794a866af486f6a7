#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "plume/common.hpp"
#include "plume/morphology.hpp"
#include "plume/raster.hpp"

namespace plume {

struct PixelSample {
    std::array<double, kBandCount> features{};  // normalized red, green, blue, nir
    bool truth = false;
};

enum class ModelKind {
    BandThreshold,
    GaussianNb,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Mlp,
};

const char* modelKindName(ModelKind kind);
ModelKind parseModelKind(const std::string& name);
std::vector<ModelKind> allModelKinds();

// Plume iff blue >= blueMin and nir <= nirMax.
struct BandThresholdParams {
    double blueMin = 1.0;
    double nirMax = 0.0;
    bool degenerateFit = false;  // set when fitted on all-background labels
};

struct GaussianNbParams {
    // Index 0 = background, 1 = plume.
    std::array<std::array<double, kBandCount>, 2> mean{};
    std::array<std::array<double, kBandCount>, 2> variance{};
    std::array<double, 2> prior{};
};

struct LogisticRegressionParams {
    std::array<double, kBandCount> weights{};
    double bias = 0.0;
};

struct TreeNode {
    int featureIndex = -1;  // -1 marks a leaf
    double splitValue = 0.0;
    int left = -1;
    int right = -1;
    double leafProbability = 0.0;
};

struct DecisionTreeParams {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct RandomForestParams {
    std::vector<DecisionTreeParams> trees;
};

struct MlpParams {
    // One hidden layer, logistic activations throughout.
    std::vector<std::array<double, kBandCount>> hiddenWeights;  // [unit][feature]
    std::vector<double> hiddenBias;
    std::vector<double> outputWeights;
    double outputBias = 0.0;
};

struct Model {
    ModelKind kind = ModelKind::BandThreshold;
    std::variant<BandThresholdParams, GaussianNbParams, LogisticRegressionParams,
                 DecisionTreeParams, RandomForestParams, MlpParams>
        params = BandThresholdParams{};
};

struct HyperParams {
    int thresholdGridSize = 51;  // thresholds i/(gridSize-1)
    double lrLearningRate = 0.1;
    int lrEpochs = 500;
    int treeMaxDepth = 12;
    int treeMinLeaf = 5;
    int forestTreeCount = 20;
    int forestFeaturesPerSplit = 2;
    int mlpHiddenUnits = 16;
    double mlpLearningRate = 0.5;
    int mlpEpochs = 300;
    double mlpInitSigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClassMetrics {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double iou = 0.0;  // plume intersection over union
    bool degenerate = false;  // some ratio had an empty denominator (reported as 0)

    static ClassMetrics fromCounts(long long tp, long long fp, long long tn, long long fn);
};

// All pixels of a labeled scene as normalized feature vectors.
void appendSamples(const Scene& scene, std::vector<PixelSample>& out);
std::vector<PixelSample> extractSamples(const Scene& scene);

// Grid search over blue/nir threshold pairs maximizing mean per-scene plume
// IoU; ties prefer smaller blueMin, then larger nirMax. All-background
// training labels yield the (1.0, 0.0) classify-nothing sentinel with
// degenerateFit set.
BandThresholdParams fitBandThreshold(const std::vector<const Scene*>& scenes,
                                     const HyperParams& hyper = {});

// Trains a pixel-sample model; BandThreshold is scene-fitted, use
// fitBandThreshold or trainClassifier for it.
Model trainModel(ModelKind kind, const std::vector<PixelSample>& samples,
                 const HyperParams& hyper);

// Scene-level entry point covering all six kinds.
Model trainClassifier(ModelKind kind, const std::vector<const Scene*>& scenes,
                      const HyperParams& hyper);

double predictProbability(const Model& model, const std::array<double, kBandCount>& features);
bool predictPixel(const Model& model, const std::array<double, kBandCount>& features);
BinaryMask predictMask(const Model& model, const Scene& scene);

ClassMetrics classificationMetrics(const BinaryMask& predicted, const BinaryMask& truth);

struct FoldMetrics {
    std::vector<int> testSceneIndices;
    ClassMetrics raw;       // pooled pixel counts over the fold's test scenes
    ClassMetrics denoised;  // same, after mask denoising
};

struct CrossValidationResult {
    std::vector<FoldMetrics> folds;
    ClassMetrics meanRaw;       // ratio metrics averaged over folds, counts summed
    ClassMetrics meanDenoised;
};

CrossValidationResult crossValidate(ModelKind kind, const std::vector<Scene>& scenes, int folds,
                                    std::uint64_t seed, const HyperParams& hyper,
                                    const DenoiseConfig& denoiseConfig);

// PGM mask whose dimensions must match the scene's.
BinaryMask importExternalMask(const std::filesystem::path& path, int expectedWidth,
                              int expectedHeight);

// Versioned JSON round trip.
std::string modelToJson(const Model& model);
Model modelFromJson(const std::string& text);
void saveModel(const Model& model, const std::filesystem::path& path);
Model loadModel(const std::filesystem::path& path);

// Loss/gradient probes for numeric verification of the trainers. Parameters
// flatten as [weights..., bias] for logistic regression and
// [hiddenWeights row-major, hiddenBias, outputWeights, outputBias] for the MLP.
std::vector<double> flattenParams(const LogisticRegressionParams& params);
LogisticRegressionParams unflattenLogistic(const std::vector<double>& flat);
std::vector<double> flattenParams(const MlpParams& params);
MlpParams unflattenMlp(const std::vector<double>& flat, int hiddenUnits);

double logisticLoss(const LogisticRegressionParams& params,
                    const std::vector<PixelSample>& samples);
std::vector<double> logisticLossGradient(const LogisticRegressionParams& params,
                                         const std::vector<PixelSample>& samples);
double mlpLoss(const MlpParams& params, const std::vector<PixelSample>& samples);
std::vector<double> mlpLossGradient(const MlpParams& params,
                                    const std::vector<PixelSample>& samples);

}  // namespace plume
