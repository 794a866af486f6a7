#include "plume/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace plume {

namespace {

using nlohmann::json;

constexpr double kVarianceFloor = 1e-9;

struct NamedKind {
    ModelKind kind;
    const char* name;
};

constexpr NamedKind kKinds[] = {
    {ModelKind::BandThreshold, "band_threshold"},
    {ModelKind::GaussianNb, "gaussian_nb"},
    {ModelKind::LogisticRegression, "logistic_regression"},
    {ModelKind::DecisionTree, "decision_tree"},
    {ModelKind::RandomForest, "random_forest"},
    {ModelKind::Mlp, "mlp"},
};

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logGaussian(double x, double mean, double variance) {
    constexpr double kLog2Pi = 1.8378770664093453;
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(variance)) - d * d / (2.0 * variance);
}

void requireBothClasses(const std::vector<PixelSample>& samples, const char* kindName) {
    bool anyTrue = false, anyFalse = false;
    for (const PixelSample& sample : samples) {
        (sample.truth ? anyTrue : anyFalse) = true;
        if (anyTrue && anyFalse) return;
    }
    throw ValidationError(std::string(kindName) + " requires samples from both classes");
}

// ---- decision tree fitting -------------------------------------------------

double giniImpurity(long long positives, long long total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(positives) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

// CART splitter over pre-sorted per-feature index arrays. Child ranges are
// carved out with stable partitions, so sort order never has to be rebuilt.
struct TreeBuilder {
    const HyperParams& hyper;
    bool sampleFeatures = false;
    Rng* rng = nullptr;

    std::array<std::vector<double>, kBandCount> col;
    std::vector<std::uint8_t> truth;
    std::array<std::vector<std::int32_t>, kBandCount> order;
    std::vector<std::int32_t> scratch;
    std::vector<std::uint8_t> goesLeft;
    std::vector<TreeNode> nodes;

    explicit TreeBuilder(const HyperParams& hp) : hyper(hp) {}

    void init(const std::vector<PixelSample>& samples, const std::vector<std::int32_t>& slots) {
        const std::size_t n = slots.size();
        for (int f = 0; f < kBandCount; ++f) {
            col[static_cast<std::size_t>(f)].resize(n);
            order[static_cast<std::size_t>(f)].resize(n);
        }
        truth.resize(n);
        goesLeft.resize(n);
        scratch.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const PixelSample& sample = samples[static_cast<std::size_t>(slots[i])];
            for (int f = 0; f < kBandCount; ++f)
                col[static_cast<std::size_t>(f)][i] = sample.features[static_cast<std::size_t>(f)];
            truth[i] = sample.truth ? 1 : 0;
        }
        for (int f = 0; f < kBandCount; ++f) {
            auto& ord = order[static_cast<std::size_t>(f)];
            std::iota(ord.begin(), ord.end(), 0);
            const std::vector<double>& values = col[static_cast<std::size_t>(f)];
            std::sort(ord.begin(), ord.end(), [&values](std::int32_t a, std::int32_t b) {
                if (values[static_cast<std::size_t>(a)] != values[static_cast<std::size_t>(b)])
                    return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
                return a < b;
            });
        }
    }

    DecisionTreeParams build() {
        nodes.clear();
        buildNode(0, static_cast<std::int64_t>(truth.size()), 0);
        return DecisionTreeParams{nodes};
    }

    int selectCandidates(std::array<int, kBandCount>& candidates) {
        if (!sampleFeatures) {
            for (int f = 0; f < kBandCount; ++f) candidates[static_cast<std::size_t>(f)] = f;
            return kBandCount;
        }
        const int m = std::clamp(hyper.forestFeaturesPerSplit, 1, kBandCount);
        std::array<int, kBandCount> pool{};
        for (int f = 0; f < kBandCount; ++f) pool[static_cast<std::size_t>(f)] = f;
        for (int i = 0; i < m; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) + rng->uniformInt(static_cast<std::uint64_t>(kBandCount - i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        std::sort(pool.begin(), pool.begin() + m);
        candidates = pool;
        return m;
    }

    int buildNode(std::int64_t lo, std::int64_t hi, int depth) {
        const std::int64_t n = hi - lo;
        long long positives = 0;
        const auto& scan = order[0];
        for (std::int64_t i = lo; i < hi; ++i)
            positives += truth[static_cast<std::size_t>(scan[static_cast<std::size_t>(i)])];

        const int nodeIndex = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{});
        nodes.back().leafProbability = static_cast<double>(positives) / static_cast<double>(n);

        const bool pure = (positives == 0 || positives == n);
        if (pure || depth >= hyper.treeMaxDepth || n < 2 * static_cast<std::int64_t>(hyper.treeMinLeaf))
            return nodeIndex;

        // Feature sampling consumes RNG draws even if no split is found, so
        // tree shape stays a pure function of the seed.
        std::array<int, kBandCount> candidates{};
        const int candidateCount = selectCandidates(candidates);

        int bestFeature = -1;
        double bestSplit = 0.0;
        double bestScore = std::numeric_limits<double>::infinity();
        std::int64_t bestLeftCount = 0;

        for (int c = 0; c < candidateCount; ++c) {
            const int f = candidates[static_cast<std::size_t>(c)];
            const std::vector<double>& values = col[static_cast<std::size_t>(f)];
            const auto& ord = order[static_cast<std::size_t>(f)];
            long long leftPositives = 0;
            for (std::int64_t i = lo; i + 1 < hi; ++i) {
                const std::int32_t slot = ord[static_cast<std::size_t>(i)];
                leftPositives += truth[static_cast<std::size_t>(slot)];
                const double a = values[static_cast<std::size_t>(slot)];
                const double b = values[static_cast<std::size_t>(ord[static_cast<std::size_t>(i + 1)])];
                if (!(a < b)) continue;
                const std::int64_t k = i - lo + 1;
                if (k < hyper.treeMinLeaf || n - k < hyper.treeMinLeaf) continue;
                const double score = (static_cast<double>(k) * giniImpurity(leftPositives, k) +
                                      static_cast<double>(n - k) *
                                          giniImpurity(positives - leftPositives, n - k)) /
                                     static_cast<double>(n);
                if (score < bestScore) {
                    double split = a + (b - a) / 2.0;
                    // Midpoints can round onto b; pin the cut strictly below
                    // the right group.
                    if (!(split >= a && split < b)) split = a;
                    bestScore = score;
                    bestFeature = f;
                    bestSplit = split;
                    bestLeftCount = k;
                }
            }
        }

        if (bestFeature < 0) return nodeIndex;

        const std::vector<double>& splitValues = col[static_cast<std::size_t>(bestFeature)];
        for (std::int64_t i = lo; i < hi; ++i) {
            const std::int32_t slot = order[0][static_cast<std::size_t>(i)];
            goesLeft[static_cast<std::size_t>(slot)] =
                splitValues[static_cast<std::size_t>(slot)] <= bestSplit ? 1 : 0;
        }
        for (int f = 0; f < kBandCount; ++f) {
            auto& ord = order[static_cast<std::size_t>(f)];
            std::int64_t l = 0;
            std::int64_t r = bestLeftCount;
            for (std::int64_t i = lo; i < hi; ++i) {
                const std::int32_t slot = ord[static_cast<std::size_t>(i)];
                if (goesLeft[static_cast<std::size_t>(slot)])
                    scratch[static_cast<std::size_t>(l++)] = slot;
                else
                    scratch[static_cast<std::size_t>(r++)] = slot;
            }
            if (l != bestLeftCount || r != n) throw ContractError("tree partition count mismatch");
            std::copy(scratch.begin(), scratch.begin() + n, ord.begin() + lo);
        }

        nodes[static_cast<std::size_t>(nodeIndex)].featureIndex = bestFeature;
        nodes[static_cast<std::size_t>(nodeIndex)].splitValue = bestSplit;
        const int left = buildNode(lo, lo + bestLeftCount, depth + 1);
        const int right = buildNode(lo + bestLeftCount, hi, depth + 1);
        nodes[static_cast<std::size_t>(nodeIndex)].left = left;
        nodes[static_cast<std::size_t>(nodeIndex)].right = right;
        return nodeIndex;
    }
};

double treeProbability(const DecisionTreeParams& tree,
                       const std::array<double, kBandCount>& features) {
    if (tree.nodes.empty()) throw ContractError("empty decision tree");
    int index = 0;
    while (tree.nodes[static_cast<std::size_t>(index)].featureIndex >= 0) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
        index = features[static_cast<std::size_t>(node.featureIndex)] <= node.splitValue
                    ? node.left
                    : node.right;
        if (index < 0 || index >= static_cast<int>(tree.nodes.size()))
            throw ContractError("decision tree child index out of range");
    }
    return tree.nodes[static_cast<std::size_t>(index)].leafProbability;
}

long long forestVotes(const RandomForestParams& forest,
                      const std::array<double, kBandCount>& features) {
    long long votes = 0;
    for (const DecisionTreeParams& tree : forest.trees)
        if (treeProbability(tree, features) >= 0.5) ++votes;
    return votes;
}

// ---- trainers ---------------------------------------------------------------

GaussianNbParams fitGaussianNb(const std::vector<PixelSample>& samples) {
    GaussianNbParams params;
    std::array<long long, 2> counts{0, 0};
    for (const PixelSample& sample : samples) {
        const std::size_t c = sample.truth ? 1 : 0;
        ++counts[c];
        for (int f = 0; f < kBandCount; ++f)
            params.mean[c][static_cast<std::size_t>(f)] += sample.features[static_cast<std::size_t>(f)];
    }
    for (std::size_t c = 0; c < 2; ++c) {
        params.prior[c] = static_cast<double>(counts[c]) / static_cast<double>(samples.size());
        if (counts[c] == 0) {
            params.mean[c].fill(0.0);
            params.variance[c].fill(1.0);
            continue;
        }
        for (int f = 0; f < kBandCount; ++f)
            params.mean[c][static_cast<std::size_t>(f)] /= static_cast<double>(counts[c]);
    }
    for (const PixelSample& sample : samples) {
        const std::size_t c = sample.truth ? 1 : 0;
        for (int f = 0; f < kBandCount; ++f) {
            const double d =
                sample.features[static_cast<std::size_t>(f)] - params.mean[c][static_cast<std::size_t>(f)];
            params.variance[c][static_cast<std::size_t>(f)] += d * d;
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        if (counts[c] == 0) continue;
        for (int f = 0; f < kBandCount; ++f) {
            double& v = params.variance[c][static_cast<std::size_t>(f)];
            v = std::max(v / static_cast<double>(counts[c]), kVarianceFloor);
        }
    }
    return params;
}

LogisticRegressionParams fitLogisticRegression(const std::vector<PixelSample>& samples,
                                               const HyperParams& hyper) {
    requireBothClasses(samples, "logistic regression");
    LogisticRegressionParams params;
    for (int epoch = 0; epoch < hyper.lrEpochs; ++epoch) {
        const std::vector<double> grad = logisticLossGradient(params, samples);
        for (int f = 0; f < kBandCount; ++f)
            params.weights[static_cast<std::size_t>(f)] -=
                hyper.lrLearningRate * grad[static_cast<std::size_t>(f)];
        params.bias -= hyper.lrLearningRate * grad[kBandCount];
    }
    return params;
}

DecisionTreeParams fitDecisionTree(const std::vector<PixelSample>& samples,
                                   const HyperParams& hyper) {
    TreeBuilder builder(hyper);
    std::vector<std::int32_t> slots(samples.size());
    std::iota(slots.begin(), slots.end(), 0);
    builder.init(samples, slots);
    return builder.build();
}

RandomForestParams fitRandomForest(const std::vector<PixelSample>& samples,
                                   const HyperParams& hyper) {
    RandomForestParams forest;
    forest.trees.reserve(static_cast<std::size_t>(hyper.forestTreeCount));
    const std::size_t n = samples.size();
    for (int t = 0; t < hyper.forestTreeCount; ++t) {
        Rng treeRng(deriveSeed(hyper.seed, 0xF0000000ULL + static_cast<std::uint64_t>(t)));
        std::vector<std::int32_t> slots(n);
        for (std::size_t i = 0; i < n; ++i)
            slots[i] = static_cast<std::int32_t>(treeRng.uniformInt(static_cast<std::uint64_t>(n)));
        TreeBuilder builder(hyper);
        builder.sampleFeatures = true;
        builder.rng = &treeRng;
        builder.init(samples, slots);
        forest.trees.push_back(builder.build());
    }
    return forest;
}

MlpParams fitMlp(const std::vector<PixelSample>& samples, const HyperParams& hyper) {
    requireBothClasses(samples, "mlp");
    Rng initRng(deriveSeed(hyper.seed, 0x313C0000ULL));
    MlpParams params;
    const int h = hyper.mlpHiddenUnits;
    params.hiddenWeights.resize(static_cast<std::size_t>(h));
    params.hiddenBias.resize(static_cast<std::size_t>(h));
    params.outputWeights.resize(static_cast<std::size_t>(h));
    for (int u = 0; u < h; ++u)
        for (int f = 0; f < kBandCount; ++f)
            params.hiddenWeights[static_cast<std::size_t>(u)][static_cast<std::size_t>(f)] =
                hyper.mlpInitSigma * initRng.normal();
    for (int u = 0; u < h; ++u)
        params.hiddenBias[static_cast<std::size_t>(u)] = hyper.mlpInitSigma * initRng.normal();
    for (int u = 0; u < h; ++u)
        params.outputWeights[static_cast<std::size_t>(u)] = hyper.mlpInitSigma * initRng.normal();
    params.outputBias = hyper.mlpInitSigma * initRng.normal();

    for (int epoch = 0; epoch < hyper.mlpEpochs; ++epoch) {
        const std::vector<double> grad = mlpLossGradient(params, samples);
        std::vector<double> flat = flattenParams(params);
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= hyper.mlpLearningRate * grad[i];
        params = unflattenMlp(flat, h);
    }
    return params;
}

double mlpForward(const MlpParams& params, const std::array<double, kBandCount>& features,
                  std::vector<double>* hiddenOut) {
    const std::size_t h = params.hiddenWeights.size();
    double z = params.outputBias;
    for (std::size_t u = 0; u < h; ++u) {
        double a = params.hiddenBias[u];
        for (int f = 0; f < kBandCount; ++f)
            a += params.hiddenWeights[u][static_cast<std::size_t>(f)] *
                 features[static_cast<std::size_t>(f)];
        const double act = sigmoid(a);
        if (hiddenOut) (*hiddenOut)[u] = act;
        z += params.outputWeights[u] * act;
    }
    return z;
}

// ---- serialization helpers --------------------------------------------------

json treeToJson(const DecisionTreeParams& tree) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes) {
        nodes.push_back({{"feature", node.featureIndex},
                         {"split", node.splitValue},
                         {"left", node.left},
                         {"right", node.right},
                         {"prob", node.leafProbability}});
    }
    return json{{"nodes", nodes}};
}

DecisionTreeParams treeFromJson(const json& j) {
    DecisionTreeParams tree;
    for (const json& n : j.at("nodes")) {
        TreeNode node;
        node.featureIndex = n.at("feature").get<int>();
        node.splitValue = n.at("split").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.leafProbability = n.at("prob").get<double>();
        if (node.featureIndex < -1 || node.featureIndex >= kBandCount)
            throw ValidationError("decision tree feature index out of range");
        tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw ValidationError("decision tree has no nodes");
    const int count = static_cast<int>(tree.nodes.size());
    for (const TreeNode& node : tree.nodes) {
        if (node.featureIndex < 0) continue;
        if (node.left < 0 || node.left >= count || node.right < 0 || node.right >= count)
            throw ValidationError("decision tree child index out of range");
    }
    return tree;
}

}  // namespace

void HyperParams::validate() const {
    if (thresholdGridSize < 2) throw ValidationError("thresholdGridSize must be >= 2");
    if (!(lrLearningRate > 0.0)) throw ValidationError("lrLearningRate must be > 0");
    if (lrEpochs < 0) throw ValidationError("lrEpochs must be >= 0");
    if (treeMaxDepth < 1) throw ValidationError("treeMaxDepth must be >= 1");
    if (treeMinLeaf < 1) throw ValidationError("treeMinLeaf must be >= 1");
    if (forestTreeCount < 1) throw ValidationError("forestTreeCount must be >= 1");
    if (forestFeaturesPerSplit < 1 || forestFeaturesPerSplit > kBandCount)
        throw ValidationError("forestFeaturesPerSplit must be in [1, 4]");
    if (mlpHiddenUnits < 1) throw ValidationError("mlpHiddenUnits must be >= 1");
    if (!(mlpLearningRate > 0.0)) throw ValidationError("mlpLearningRate must be > 0");
    if (mlpEpochs < 0) throw ValidationError("mlpEpochs must be >= 0");
    if (!(mlpInitSigma >= 0.0)) throw ValidationError("mlpInitSigma must be >= 0");
}

const char* modelKindName(ModelKind kind) {
    for (const NamedKind& entry : kKinds) {
        if (entry.kind == kind) return entry.name;
    }
    throw ContractError("unknown model kind");
}

ModelKind parseModelKind(const std::string& name) {
    for (const NamedKind& entry : kKinds) {
        if (name == entry.name) return entry.kind;
    }
    throw ValidationError("unknown classifier: " + name);
}

std::vector<ModelKind> allModelKinds() {
    std::vector<ModelKind> kinds;
    for (const NamedKind& entry : kKinds) kinds.push_back(entry.kind);
    return kinds;
}

void appendSamples(const Scene& scene, std::vector<PixelSample>& out) {
    if (!scene.label) throw ValidationError("scene has no label: " + scene.id);
    const std::size_t count = scene.pixelCount();
    out.reserve(out.size() + count);
    for (std::size_t i = 0; i < count; ++i) {
        PixelSample sample;
        for (int b = 0; b < kBandCount; ++b)
            sample.features[static_cast<std::size_t>(b)] =
                static_cast<double>(scene.bands[static_cast<std::size_t>(b)][i]) / kSampleMax;
        sample.truth = scene.label->values()[i] != 0;
        out.push_back(sample);
    }
}

std::vector<PixelSample> extractSamples(const Scene& scene) {
    std::vector<PixelSample> samples;
    appendSamples(scene, samples);
    return samples;
}

BandThresholdParams fitBandThreshold(const std::vector<const Scene*>& scenes,
                                     const HyperParams& hyper) {
    hyper.validate();
    if (scenes.empty()) throw ValidationError("no training scenes");
    const int grid = hyper.thresholdGridSize;
    const auto value = [grid](int i) { return static_cast<double>(i) / (grid - 1); };

    long long totalPositives = 0;
    std::vector<double> meanIou(static_cast<std::size_t>(grid) * grid, 0.0);
    std::vector<long long> posHist(static_cast<std::size_t>(grid) * grid);
    std::vector<long long> negHist(static_cast<std::size_t>(grid) * grid);
    std::vector<long long> posCum(static_cast<std::size_t>(grid) * grid);
    std::vector<long long> negCum(static_cast<std::size_t>(grid) * grid);

    for (const Scene* scene : scenes) {
        if (!scene->label) throw ValidationError("scene has no label: " + scene->id);
        std::fill(posHist.begin(), posHist.end(), 0);
        std::fill(negHist.begin(), negHist.end(), 0);
        const std::size_t count = scene->pixelCount();
        const std::vector<std::uint16_t>& blue = scene->bands[static_cast<std::size_t>(Band::Blue)];
        const std::vector<std::uint16_t>& nir = scene->bands[static_cast<std::size_t>(Band::Nir)];
        long long scenePositives = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const double blueValue = static_cast<double>(blue[i]) / kSampleMax;
            const double nirValue = static_cast<double>(nir[i]) / kSampleMax;
            // Largest threshold index at or below blue.
            int bi = std::clamp(static_cast<int>(std::floor(blueValue * (grid - 1))), 0, grid - 1);
            while (bi > 0 && value(bi) > blueValue) --bi;
            while (bi + 1 <= grid - 1 && value(bi + 1) <= blueValue) ++bi;
            // Smallest threshold index at or above nir.
            int ni = std::clamp(static_cast<int>(std::ceil(nirValue * (grid - 1))), 0, grid - 1);
            while (ni < grid - 1 && value(ni) < nirValue) ++ni;
            while (ni > 0 && value(ni - 1) >= nirValue) --ni;

            const std::size_t bin = static_cast<std::size_t>(bi) * grid + ni;
            if (scene->label->values()[i] != 0) {
                ++posHist[bin];
                ++scenePositives;
            } else {
                ++negHist[bin];
            }
        }
        totalPositives += scenePositives;

        // posCum[i][j] counts pixels with blue bin >= i and nir bin <= j,
        // i.e. true positives of the (value(i), value(j)) threshold pair.
        for (int i = grid - 1; i >= 0; --i) {
            for (int j = 0; j < grid; ++j) {
                const std::size_t bin = static_cast<std::size_t>(i) * grid + j;
                long long pos = posHist[bin];
                long long neg = negHist[bin];
                if (i + 1 < grid) {
                    pos += posCum[bin + static_cast<std::size_t>(grid)];
                    neg += negCum[bin + static_cast<std::size_t>(grid)];
                }
                if (j > 0) {
                    pos += posCum[bin - 1];
                    neg += negCum[bin - 1];
                }
                if (i + 1 < grid && j > 0) {
                    pos -= posCum[bin + static_cast<std::size_t>(grid) - 1];
                    neg -= negCum[bin + static_cast<std::size_t>(grid) - 1];
                }
                posCum[bin] = pos;
                negCum[bin] = neg;
            }
        }
        for (std::size_t bin = 0; bin < meanIou.size(); ++bin) {
            const long long tp = posCum[bin];
            const long long denominator = tp + negCum[bin] + (scenePositives - tp);
            const double iou =
                denominator > 0 ? static_cast<double>(tp) / static_cast<double>(denominator) : 0.0;
            meanIou[bin] += iou / static_cast<double>(scenes.size());
        }
    }

    if (totalPositives == 0) {
        BandThresholdParams params;
        params.blueMin = 1.0;
        params.nirMax = 0.0;
        params.degenerateFit = true;
        return params;
    }

    BandThresholdParams best;
    double bestIou = -1.0;
    for (int i = 0; i < grid; ++i) {
        for (int j = grid - 1; j >= 0; --j) {
            const double candidate = meanIou[static_cast<std::size_t>(i) * grid + j];
            if (candidate > bestIou) {
                bestIou = candidate;
                best.blueMin = value(i);
                best.nirMax = value(j);
            }
        }
    }
    return best;
}

Model trainModel(ModelKind kind, const std::vector<PixelSample>& samples,
                 const HyperParams& hyper) {
    hyper.validate();
    if (samples.empty()) throw ValidationError("empty sample set");
    Model model;
    model.kind = kind;
    switch (kind) {
        case ModelKind::BandThreshold:
            throw ContractError("band threshold is fitted from scenes, not pixel samples");
        case ModelKind::GaussianNb:
            model.params = fitGaussianNb(samples);
            break;
        case ModelKind::LogisticRegression:
            model.params = fitLogisticRegression(samples, hyper);
            break;
        case ModelKind::DecisionTree:
            model.params = fitDecisionTree(samples, hyper);
            break;
        case ModelKind::RandomForest:
            model.params = fitRandomForest(samples, hyper);
            break;
        case ModelKind::Mlp:
            model.params = fitMlp(samples, hyper);
            break;
    }
    return model;
}

Model trainClassifier(ModelKind kind, const std::vector<const Scene*>& scenes,
                      const HyperParams& hyper) {
    if (kind == ModelKind::BandThreshold) {
        Model model;
        model.kind = kind;
        model.params = fitBandThreshold(scenes, hyper);
        return model;
    }
    std::vector<PixelSample> samples;
    std::size_t total = 0;
    for (const Scene* scene : scenes) total += scene->pixelCount();
    samples.reserve(total);
    for (const Scene* scene : scenes) appendSamples(*scene, samples);
    return trainModel(kind, samples, hyper);
}

double predictProbability(const Model& model, const std::array<double, kBandCount>& features) {
    switch (model.kind) {
        case ModelKind::BandThreshold: {
            const auto& p = std::get<BandThresholdParams>(model.params);
            if (p.blueMin < 0.0 || p.blueMin > 1.0 || p.nirMax < 0.0 || p.nirMax > 1.0)
                throw ValidationError("threshold out of range");
            return (features[static_cast<std::size_t>(Band::Blue)] >= p.blueMin &&
                    features[static_cast<std::size_t>(Band::Nir)] <= p.nirMax)
                       ? 1.0
                       : 0.0;
        }
        case ModelKind::GaussianNb: {
            const auto& p = std::get<GaussianNbParams>(model.params);
            if (p.prior[1] <= 0.0) return 0.0;
            if (p.prior[0] <= 0.0) return 1.0;
            double logOdds = std::log(p.prior[1]) - std::log(p.prior[0]);
            for (int f = 0; f < kBandCount; ++f) {
                const std::size_t fi = static_cast<std::size_t>(f);
                logOdds += logGaussian(features[fi], p.mean[1][fi], p.variance[1][fi]) -
                           logGaussian(features[fi], p.mean[0][fi], p.variance[0][fi]);
            }
            return sigmoid(logOdds);
        }
        case ModelKind::LogisticRegression: {
            const auto& p = std::get<LogisticRegressionParams>(model.params);
            double z = p.bias;
            for (int f = 0; f < kBandCount; ++f)
                z += p.weights[static_cast<std::size_t>(f)] * features[static_cast<std::size_t>(f)];
            return sigmoid(z);
        }
        case ModelKind::DecisionTree:
            return treeProbability(std::get<DecisionTreeParams>(model.params), features);
        case ModelKind::RandomForest: {
            const auto& p = std::get<RandomForestParams>(model.params);
            if (p.trees.empty()) throw ContractError("empty random forest");
            return static_cast<double>(forestVotes(p, features)) /
                   static_cast<double>(p.trees.size());
        }
        case ModelKind::Mlp:
            return sigmoid(mlpForward(std::get<MlpParams>(model.params), features, nullptr));
    }
    throw ContractError("unknown model kind");
}

bool predictPixel(const Model& model, const std::array<double, kBandCount>& features) {
    if (model.kind == ModelKind::RandomForest) {
        const auto& p = std::get<RandomForestParams>(model.params);
        if (p.trees.empty()) throw ContractError("empty random forest");
        // Vote ties go to plume.
        return 2 * forestVotes(p, features) >= static_cast<long long>(p.trees.size());
    }
    return predictProbability(model, features) >= 0.5;
}

BinaryMask predictMask(const Model& model, const Scene& scene) {
    scene.validate();
    BinaryMask out(scene.width, scene.height);
    const std::size_t count = scene.pixelCount();
    std::array<double, kBandCount> features{};
    for (std::size_t i = 0; i < count; ++i) {
        for (int b = 0; b < kBandCount; ++b)
            features[static_cast<std::size_t>(b)] =
                static_cast<double>(scene.bands[static_cast<std::size_t>(b)][i]) / kSampleMax;
        if (predictPixel(model, features))
            out.set(static_cast<int>(i % scene.width), static_cast<int>(i / scene.width), true);
    }
    return out;
}

ClassMetrics ClassMetrics::fromCounts(long long tp, long long fp, long long tn, long long fn) {
    ClassMetrics m;
    m.tp = tp;
    m.fp = fp;
    m.tn = tn;
    m.fn = fn;
    const long long total = tp + fp + tn + fn;
    const auto ratio = [&m](long long numerator, long long denominator) {
        if (denominator == 0) {
            m.degenerate = true;
            return 0.0;
        }
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    };
    m.accuracy = ratio(tp + tn, total);
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.iou = ratio(tp, tp + fp + fn);
    return m;
}

ClassMetrics classificationMetrics(const BinaryMask& predicted, const BinaryMask& truth) {
    if (predicted.width() != truth.width() || predicted.height() != truth.height())
        throw ValidationError("mask dimensions do not match");
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.pixelCount(); ++i) {
        const bool p = predicted.values()[i] != 0;
        const bool t = truth.values()[i] != 0;
        if (p && t)
            ++tp;
        else if (p && !t)
            ++fp;
        else if (!p && t)
            ++fn;
        else
            ++tn;
    }
    return ClassMetrics::fromCounts(tp, fp, tn, fn);
}

CrossValidationResult crossValidate(ModelKind kind, const std::vector<Scene>& scenes, int folds,
                                    std::uint64_t seed, const HyperParams& hyper,
                                    const DenoiseConfig& denoiseConfig) {
    if (folds < 2) throw ValidationError("folds must be >= 2");
    if (static_cast<int>(scenes.size()) < folds)
        throw ValidationError("fewer scenes than folds");
    denoiseConfig.validate();

    Rng foldRng(deriveSeed(seed, 0xF01D5000ULL));
    const std::vector<int> permutation =
        shuffledIndices(static_cast<int>(scenes.size()), foldRng);

    CrossValidationResult result;
    const std::size_t base = scenes.size() / static_cast<std::size_t>(folds);
    const std::size_t extra = scenes.size() % static_cast<std::size_t>(folds);
    std::size_t cursor = 0;
    for (int fold = 0; fold < folds; ++fold) {
        const std::size_t size = base + (static_cast<std::size_t>(fold) < extra ? 1 : 0);
        FoldMetrics foldMetrics;
        for (std::size_t i = cursor; i < cursor + size; ++i)
            foldMetrics.testSceneIndices.push_back(static_cast<int>(permutation[i]));

        std::vector<const Scene*> train;
        for (std::size_t i = 0; i < permutation.size(); ++i) {
            if (i < cursor || i >= cursor + size) train.push_back(&scenes[permutation[i]]);
        }
        cursor += size;

        HyperParams foldHyper = hyper;
        foldHyper.seed = deriveSeed(hyper.seed, 0xCF000000ULL + static_cast<std::uint64_t>(fold));
        const Model model = trainClassifier(kind, train, foldHyper);

        long long rawTp = 0, rawFp = 0, rawTn = 0, rawFn = 0;
        long long denTp = 0, denFp = 0, denTn = 0, denFn = 0;
        for (int index : foldMetrics.testSceneIndices) {
            const Scene& scene = scenes[static_cast<std::size_t>(index)];
            if (!scene.label) throw ValidationError("scene has no label: " + scene.id);
            const BinaryMask predicted = predictMask(model, scene);
            const ClassMetrics raw = classificationMetrics(predicted, *scene.label);
            rawTp += raw.tp;
            rawFp += raw.fp;
            rawTn += raw.tn;
            rawFn += raw.fn;
            const ClassMetrics den =
                classificationMetrics(denoise(predicted, denoiseConfig), *scene.label);
            denTp += den.tp;
            denFp += den.fp;
            denTn += den.tn;
            denFn += den.fn;
        }
        foldMetrics.raw = ClassMetrics::fromCounts(rawTp, rawFp, rawTn, rawFn);
        foldMetrics.denoised = ClassMetrics::fromCounts(denTp, denFp, denTn, denFn);
        result.folds.push_back(std::move(foldMetrics));
    }

    const auto meanOf = [&result](bool denoised) {
        ClassMetrics mean;
        for (const FoldMetrics& fold : result.folds) {
            const ClassMetrics& m = denoised ? fold.denoised : fold.raw;
            mean.tp += m.tp;
            mean.fp += m.fp;
            mean.tn += m.tn;
            mean.fn += m.fn;
            mean.accuracy += m.accuracy;
            mean.precision += m.precision;
            mean.recall += m.recall;
            mean.iou += m.iou;
            mean.degenerate = mean.degenerate || m.degenerate;
        }
        const double k = static_cast<double>(result.folds.size());
        mean.accuracy /= k;
        mean.precision /= k;
        mean.recall /= k;
        mean.iou /= k;
        return mean;
    };
    result.meanRaw = meanOf(false);
    result.meanDenoised = meanOf(true);
    return result;
}

BinaryMask importExternalMask(const std::filesystem::path& path, int expectedWidth,
                              int expectedHeight) {
    BinaryMask mask = loadMask(path);
    if (mask.width() != expectedWidth || mask.height() != expectedHeight)
        throw ValidationError("external mask dimensions do not match the scene");
    return mask;
}

std::string modelToJson(const Model& model) {
    json j;
    j["format_version"] = 1;
    j["kind"] = modelKindName(model.kind);
    switch (model.kind) {
        case ModelKind::BandThreshold: {
            const auto& p = std::get<BandThresholdParams>(model.params);
            j["params"] = {{"blue_min", p.blueMin},
                           {"nir_max", p.nirMax},
                           {"degenerate_fit", p.degenerateFit}};
            break;
        }
        case ModelKind::GaussianNb: {
            const auto& p = std::get<GaussianNbParams>(model.params);
            j["params"] = {{"mean", p.mean}, {"variance", p.variance}, {"prior", p.prior}};
            break;
        }
        case ModelKind::LogisticRegression: {
            const auto& p = std::get<LogisticRegressionParams>(model.params);
            j["params"] = {{"weights", p.weights}, {"bias", p.bias}};
            break;
        }
        case ModelKind::DecisionTree:
            j["params"] = treeToJson(std::get<DecisionTreeParams>(model.params));
            break;
        case ModelKind::RandomForest: {
            const auto& p = std::get<RandomForestParams>(model.params);
            json trees = json::array();
            for (const DecisionTreeParams& tree : p.trees) trees.push_back(treeToJson(tree));
            j["params"] = {{"trees", trees}};
            break;
        }
        case ModelKind::Mlp: {
            const auto& p = std::get<MlpParams>(model.params);
            j["params"] = {{"hidden_weights", p.hiddenWeights},
                           {"hidden_bias", p.hiddenBias},
                           {"output_weights", p.outputWeights},
                           {"output_bias", p.outputBias}};
            break;
        }
    }
    return j.dump(2);
}

Model modelFromJson(const std::string& text) {
    try {
        const json j = json::parse(text);
        const int version = j.at("format_version").get<int>();
        if (version != 1)
            throw ValidationError("unsupported model format_version: " + std::to_string(version));
        Model model;
        model.kind = parseModelKind(j.at("kind").get<std::string>());
        const json& p = j.at("params");
        switch (model.kind) {
            case ModelKind::BandThreshold: {
                BandThresholdParams params;
                params.blueMin = p.at("blue_min").get<double>();
                params.nirMax = p.at("nir_max").get<double>();
                params.degenerateFit = p.at("degenerate_fit").get<bool>();
                model.params = params;
                break;
            }
            case ModelKind::GaussianNb: {
                GaussianNbParams params;
                params.mean = p.at("mean").get<std::array<std::array<double, kBandCount>, 2>>();
                params.variance =
                    p.at("variance").get<std::array<std::array<double, kBandCount>, 2>>();
                params.prior = p.at("prior").get<std::array<double, 2>>();
                model.params = params;
                break;
            }
            case ModelKind::LogisticRegression: {
                LogisticRegressionParams params;
                params.weights = p.at("weights").get<std::array<double, kBandCount>>();
                params.bias = p.at("bias").get<double>();
                model.params = params;
                break;
            }
            case ModelKind::DecisionTree:
                model.params = treeFromJson(p);
                break;
            case ModelKind::RandomForest: {
                RandomForestParams params;
                for (const json& tree : p.at("trees")) params.trees.push_back(treeFromJson(tree));
                if (params.trees.empty()) throw ValidationError("random forest has no trees");
                model.params = params;
                break;
            }
            case ModelKind::Mlp: {
                MlpParams params;
                params.hiddenWeights =
                    p.at("hidden_weights").get<std::vector<std::array<double, kBandCount>>>();
                params.hiddenBias = p.at("hidden_bias").get<std::vector<double>>();
                params.outputWeights = p.at("output_weights").get<std::vector<double>>();
                params.outputBias = p.at("output_bias").get<double>();
                if (params.hiddenWeights.empty() ||
                    params.hiddenBias.size() != params.hiddenWeights.size() ||
                    params.outputWeights.size() != params.hiddenWeights.size())
                    throw ValidationError("mlp layer sizes are inconsistent");
                model.params = params;
                break;
            }
        }
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid model json: ") + e.what());
    }
}

void saveModel(const Model& model, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open for writing: " + path.string());
    file << modelToJson(model) << '\n';
}

Model loadModel(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot open model file: " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return modelFromJson(buffer.str());
}

std::vector<double> flattenParams(const LogisticRegressionParams& params) {
    std::vector<double> flat(params.weights.begin(), params.weights.end());
    flat.push_back(params.bias);
    return flat;
}

LogisticRegressionParams unflattenLogistic(const std::vector<double>& flat) {
    if (flat.size() != kBandCount + 1)
        throw ContractError("logistic parameter vector has wrong size");
    LogisticRegressionParams params;
    std::copy(flat.begin(), flat.begin() + kBandCount, params.weights.begin());
    params.bias = flat[kBandCount];
    return params;
}

std::vector<double> flattenParams(const MlpParams& params) {
    std::vector<double> flat;
    flat.reserve(params.hiddenWeights.size() * (kBandCount + 2) + 1);
    for (const auto& row : params.hiddenWeights) flat.insert(flat.end(), row.begin(), row.end());
    flat.insert(flat.end(), params.hiddenBias.begin(), params.hiddenBias.end());
    flat.insert(flat.end(), params.outputWeights.begin(), params.outputWeights.end());
    flat.push_back(params.outputBias);
    return flat;
}

MlpParams unflattenMlp(const std::vector<double>& flat, int hiddenUnits) {
    const std::size_t h = static_cast<std::size_t>(hiddenUnits);
    if (flat.size() != h * (kBandCount + 2) + 1)
        throw ContractError("mlp parameter vector has wrong size");
    MlpParams params;
    params.hiddenWeights.resize(h);
    params.hiddenBias.resize(h);
    params.outputWeights.resize(h);
    std::size_t cursor = 0;
    for (std::size_t u = 0; u < h; ++u)
        for (int f = 0; f < kBandCount; ++f) params.hiddenWeights[u][static_cast<std::size_t>(f)] = flat[cursor++];
    for (std::size_t u = 0; u < h; ++u) params.hiddenBias[u] = flat[cursor++];
    for (std::size_t u = 0; u < h; ++u) params.outputWeights[u] = flat[cursor++];
    params.outputBias = flat[cursor];
    return params;
}

double logisticLoss(const LogisticRegressionParams& params,
                    const std::vector<PixelSample>& samples) {
    if (samples.empty()) throw ValidationError("empty sample set");
    double loss = 0.0;
    for (const PixelSample& sample : samples) {
        double z = params.bias;
        for (int f = 0; f < kBandCount; ++f)
            z += params.weights[static_cast<std::size_t>(f)] *
                 sample.features[static_cast<std::size_t>(f)];
        // Cross entropy: softplus(-z) + (1 - y) z.
        loss += softplus(-z) + (sample.truth ? 0.0 : z);
    }
    return loss / static_cast<double>(samples.size());
}

std::vector<double> logisticLossGradient(const LogisticRegressionParams& params,
                                         const std::vector<PixelSample>& samples) {
    if (samples.empty()) throw ValidationError("empty sample set");
    std::vector<double> grad(kBandCount + 1, 0.0);
    for (const PixelSample& sample : samples) {
        double z = params.bias;
        for (int f = 0; f < kBandCount; ++f)
            z += params.weights[static_cast<std::size_t>(f)] *
                 sample.features[static_cast<std::size_t>(f)];
        const double delta = sigmoid(z) - (sample.truth ? 1.0 : 0.0);
        for (int f = 0; f < kBandCount; ++f)
            grad[static_cast<std::size_t>(f)] += delta * sample.features[static_cast<std::size_t>(f)];
        grad[kBandCount] += delta;
    }
    for (double& g : grad) g /= static_cast<double>(samples.size());
    return grad;
}

double mlpLoss(const MlpParams& params, const std::vector<PixelSample>& samples) {
    if (samples.empty()) throw ValidationError("empty sample set");
    double loss = 0.0;
    for (const PixelSample& sample : samples) {
        const double z = mlpForward(params, sample.features, nullptr);
        loss += softplus(-z) + (sample.truth ? 0.0 : z);
    }
    return loss / static_cast<double>(samples.size());
}

std::vector<double> mlpLossGradient(const MlpParams& params,
                                    const std::vector<PixelSample>& samples) {
    if (samples.empty()) throw ValidationError("empty sample set");
    const std::size_t h = params.hiddenWeights.size();
    std::vector<double> hidden(h);
    std::vector<double> gradHiddenWeights(h * kBandCount, 0.0);
    std::vector<double> gradHiddenBias(h, 0.0);
    std::vector<double> gradOutputWeights(h, 0.0);
    double gradOutputBias = 0.0;

    for (const PixelSample& sample : samples) {
        const double z = mlpForward(params, sample.features, &hidden);
        const double delta = sigmoid(z) - (sample.truth ? 1.0 : 0.0);
        gradOutputBias += delta;
        for (std::size_t u = 0; u < h; ++u) {
            gradOutputWeights[u] += delta * hidden[u];
            const double deltaHidden =
                delta * params.outputWeights[u] * hidden[u] * (1.0 - hidden[u]);
            gradHiddenBias[u] += deltaHidden;
            for (int f = 0; f < kBandCount; ++f)
                gradHiddenWeights[u * kBandCount + static_cast<std::size_t>(f)] +=
                    deltaHidden * sample.features[static_cast<std::size_t>(f)];
        }
    }

    const double n = static_cast<double>(samples.size());
    std::vector<double> flat;
    flat.reserve(h * (kBandCount + 2) + 1);
    for (double g : gradHiddenWeights) flat.push_back(g / n);
    for (double g : gradHiddenBias) flat.push_back(g / n);
    for (double g : gradOutputWeights) flat.push_back(g / n);
    flat.push_back(gradOutputBias / n);
    return flat;
}

}  // namespace plume
