#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plume/classify.hpp"
#include "plume/common.hpp"
#include "plume/harness.hpp"
#include "plume/morphology.hpp"
#include "plume/planner.hpp"
#include "plume/raster.hpp"
#include "plume/synthgen.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SynthOptions {
    int count = 38;
    std::uint64_t seed = 0;
    int width = 256;
    int height = 256;
    std::string outDir;
};

struct TrainOptions {
    std::string classifier;
    std::string trainManifest;
    std::string modelOut;
    std::uint64_t seed = 0;
};

struct ClassifyOptions {
    std::string modelPath;
    std::string scenePath;
    std::string maskOut;
};

struct DenoiseOptions {
    std::string maskPath;
    int maxIters = 10;
    double minAreaFraction = 0.001;
    std::string outPath;
};

struct PlanOptions {
    std::string maskPath;
    std::string algorithm;
    int sceneWidth = 0;  // 0: use the mask width
    std::string trajOut;
};

struct EvalOptions {
    std::string scenePath;
    std::string trajPath;
    std::string reportOut;
};

struct RunOptions {
    std::string scenePath;
    std::string modelPath;
    bool oracle = false;
    std::string externalMaskPath;
    std::string algorithm;
    int maxIters = 10;
    double minAreaFraction = 0.001;
    int downsampleFactor = 1;
    std::string trajOut;
    std::string reportOut;
    std::string overlayOut;
};

struct ExperimentOptions {
    std::string datasetPath;
    std::uint64_t seed = 0;
    std::string reportDir;
    double trainFraction = 21.0 / 38.0;
    int maxIters = 10;
    double minAreaFraction = 0.001;
    int downsampleFactor = 1;
    std::vector<std::string> classifiers;
    std::vector<std::string> algorithms;
    bool noBaselines = false;
};

json metricsJson(const plume::RunReport& report) {
    return json{{"scene_id", report.sceneId},
                {"classifier", report.classifierName},
                {"algorithm", report.algorithmName},
                {"pixels_observed", report.metrics.pixelsObserved},
                {"ratio_plume", report.metrics.ratioPlume},
                {"mean_intensity", report.metrics.meanIntensity},
                {"mean_gradient", report.metrics.meanGradient},
                {"degenerate", report.metrics.degenerate},
                {"classify_seconds", report.timing.classifySeconds},
                {"denoise_seconds", report.timing.denoiseSeconds},
                {"plan_seconds", report.timing.planSeconds},
                {"onboard_seconds", report.timing.onboardSeconds()}};
}

void writeJsonFile(const json& j, const fs::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw plume::ValidationError("cannot open for writing: " + path.string());
    file << j.dump(2) << '\n';
}

void printReportLine(const plume::RunReport& report) {
    std::cout << report.sceneId << " " << report.algorithmName << " (" << report.classifierName
              << "): pixels=" << report.metrics.pixelsObserved
              << " ratio_plume=" << plume::formatDouble(report.metrics.ratioPlume)
              << " intensity=" << plume::formatDouble(report.metrics.meanIntensity)
              << " gradient=" << plume::formatDouble(report.metrics.meanGradient)
              << " onboard_s=" << plume::formatDouble(report.timing.onboardSeconds()) << "\n";
}

void runSynth(const SynthOptions& options) {
    const std::vector<plume::Scene> scenes =
        plume::generateDataset(options.count, options.seed, options.width, options.height);
    const fs::path outDir(options.outDir);
    fs::create_directories(outDir);
    std::vector<std::string> manifests;
    for (const plume::Scene& scene : scenes) {
        const fs::path sceneDir = outDir / scene.id;
        fs::create_directories(sceneDir);
        plume::saveScene(scene, sceneDir / "manifest.json");
        manifests.push_back(scene.id + "/manifest.json");
    }
    plume::saveDatasetManifest(manifests, outDir / "dataset.json");
    std::cout << "wrote " << scenes.size() << " scenes to " << outDir.string() << "\n";
}

void runTrain(const TrainOptions& options) {
    const plume::ModelKind kind = plume::parseModelKind(options.classifier);
    const std::vector<plume::Scene> scenes = plume::loadDataset(options.trainManifest);
    std::vector<const plume::Scene*> pointers;
    for (const plume::Scene& scene : scenes) pointers.push_back(&scene);
    plume::HyperParams hyper;
    hyper.seed = options.seed;
    const plume::Model model = plume::trainClassifier(kind, pointers, hyper);
    plume::saveModel(model, options.modelOut);
    std::cout << "trained " << plume::modelKindName(kind) << " on " << scenes.size()
              << " scenes -> " << options.modelOut << "\n";
}

void runClassify(const ClassifyOptions& options) {
    const plume::Model model = plume::loadModel(options.modelPath);
    const plume::Scene scene = plume::loadScene(options.scenePath);
    const plume::BinaryMask mask = plume::predictMask(model, scene);
    plume::saveMask(mask, options.maskOut);
    std::cout << "classified " << scene.id << ": " << mask.countTrue() << " plume pixels -> "
              << options.maskOut << "\n";
}

void runDenoise(const DenoiseOptions& options) {
    const plume::BinaryMask mask = plume::loadMask(options.maskPath);
    plume::DenoiseConfig config;
    config.maxMergeIterations = options.maxIters;
    config.minAreaFraction = options.minAreaFraction;
    const plume::BinaryMask cleaned = plume::denoise(mask, config);
    plume::saveMask(cleaned, options.outPath);
    std::cout << "denoised: " << mask.countTrue() << " -> " << cleaned.countTrue()
              << " plume pixels, " << plume::componentCount(cleaned) << " components -> "
              << options.outPath << "\n";
}

void runPlan(const PlanOptions& options) {
    const plume::BinaryMask mask = plume::loadMask(options.maskPath);
    const plume::PlanAlgorithm algorithm = plume::parseAlgorithm(options.algorithm);
    const int widthForStep = options.sceneWidth > 0 ? options.sceneWidth : mask.width();
    const int step = plume::computeStepSize(widthForStep);
    plume::Trajectory trajectory;
    if (algorithm == plume::PlanAlgorithm::StraightNadir) {
        trajectory = plume::planStraightNadir(mask.width(), mask.height(), step);
    } else if (algorithm == plume::PlanAlgorithm::NaiveTransect) {
        trajectory = plume::planNaiveTransect(mask.width(), mask.height(), step,
                                              plume::transectSpacing(step));
    } else {
        trajectory = plume::planFromPolygons(algorithm, plume::getContours(mask), step,
                                             mask.width(), mask.height());
    }
    plume::writeTrajectoryCsv(trajectory, options.trajOut);
    std::cout << "planned " << trajectory.waypoints.size() << " waypoints ("
              << trajectory.algorithm << ", step " << trajectory.stepSize << ") -> "
              << options.trajOut << "\n";
}

void runEval(const EvalOptions& options) {
    const plume::Scene scene = plume::loadScene(options.scenePath);
    const plume::Trajectory trajectory = plume::loadTrajectoryCsv(options.trajPath);
    const plume::UtilityFields fields = plume::computeUtilityFields(scene);
    plume::RunReport report;
    report.sceneId = scene.id;
    report.classifierName = "N/A";
    report.algorithmName = trajectory.algorithm;
    report.metrics = plume::evaluateTrajectory(trajectory, scene, fields);
    if (!options.reportOut.empty()) writeJsonFile(metricsJson(report), options.reportOut);
    printReportLine(report);
}

void runRun(const RunOptions& options) {
    plume::Scene scene = plume::loadScene(options.scenePath);
    if (options.downsampleFactor > 1) scene = plume::downsample(scene, options.downsampleFactor);

    const plume::PlanAlgorithm algorithm = plume::parseAlgorithm(options.algorithm);
    const int sourceCount = static_cast<int>(!options.modelPath.empty()) +
                            static_cast<int>(options.oracle) +
                            static_cast<int>(!options.externalMaskPath.empty());
    plume::MaskSource source = plume::MaskSource::none();
    if (plume::usesPlumeMask(algorithm)) {
        if (sourceCount != 1)
            throw plume::ValidationError(
                "choose exactly one of --model, --oracle, --external-mask");
        if (!options.modelPath.empty()) {
            source = plume::MaskSource::fromModel(plume::loadModel(options.modelPath));
        } else if (options.oracle) {
            source = plume::MaskSource::oracle();
        } else {
            source = plume::MaskSource::fixed(
                plume::importExternalMask(options.externalMaskPath, scene.width, scene.height),
                "external");
        }
    } else if (sourceCount != 0) {
        throw plume::ValidationError("baseline algorithms take no mask source");
    }

    plume::PipelineConfig config;
    config.denoise.maxMergeIterations = options.maxIters;
    config.denoise.minAreaFraction = options.minAreaFraction;
    const plume::PipelineResult result = plume::runPipeline(scene, source, algorithm, config);

    if (!options.trajOut.empty()) plume::writeTrajectoryCsv(result.trajectory, options.trajOut);
    if (!options.reportOut.empty()) writeJsonFile(metricsJson(result.report), options.reportOut);
    if (!options.overlayOut.empty())
        plume::emitOverlay(scene, result.trajectory, result.denoisedMask, options.overlayOut);
    printReportLine(result.report);
}

void runExperimentCommand(const ExperimentOptions& options) {
    std::vector<plume::Scene> scenes = plume::loadDataset(options.datasetPath);
    if (options.downsampleFactor > 1) {
        for (plume::Scene& scene : scenes) scene = plume::downsample(scene, options.downsampleFactor);
    }

    plume::ExperimentConfig config;
    config.seed = options.seed;
    config.trainFraction = options.trainFraction;
    config.pipeline.denoise.maxMergeIterations = options.maxIters;
    config.pipeline.denoise.minAreaFraction = options.minAreaFraction;
    config.includeBaselines = !options.noBaselines;
    if (!options.classifiers.empty()) {
        config.classifiers.clear();
        for (const std::string& name : options.classifiers)
            config.classifiers.push_back(plume::parseModelKind(name));
    }
    if (!options.algorithms.empty()) {
        config.algorithms.clear();
        for (const std::string& name : options.algorithms) {
            const plume::PlanAlgorithm algorithm = plume::parseAlgorithm(name);
            if (!plume::usesPlumeMask(algorithm))
                throw plume::ValidationError(
                    "baselines are always included; list only mask-conditioned algorithms");
            config.algorithms.push_back(algorithm);
        }
    }

    const plume::ExperimentResult result = plume::runExperiment(scenes, config);
    plume::writeReports(result, config, options.reportDir);
    std::cout << "train scenes: " << result.trainIndices.size()
              << ", test scenes: " << result.testIndices.size() << "\n"
              << plume::renderReportDirectory(options.reportDir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volcanic-plume dynamic targeting: synthesize, classify, denoise, plan, evaluate"};
    app.require_subcommand(1);

    SynthOptions synthOptions;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    synth->add_option("--count", synthOptions.count, "Number of scenes")->capture_default_str();
    synth->add_option("--seed", synthOptions.seed, "Dataset seed")->capture_default_str();
    synth->add_option("--width", synthOptions.width, "Scene width px")->capture_default_str();
    synth->add_option("--height", synthOptions.height, "Scene height px")->capture_default_str();
    synth->add_option("--out", synthOptions.outDir, "Output directory")->required();

    TrainOptions trainOptions;
    CLI::App* train = app.add_subcommand("train", "Train a classifier on a dataset");
    train->add_option("--classifier", trainOptions.classifier,
                      "band_threshold|gaussian_nb|logistic_regression|decision_tree|random_forest|mlp")
        ->required();
    train->add_option("--train-manifest", trainOptions.trainManifest, "dataset.json path")
        ->required();
    train->add_option("--model-out", trainOptions.modelOut, "Model JSON output")->required();
    train->add_option("--seed", trainOptions.seed, "Training seed")->capture_default_str();

    ClassifyOptions classifyOptions;
    CLI::App* classify = app.add_subcommand("classify", "Predict a plume mask for one scene");
    classify->add_option("--model", classifyOptions.modelPath, "Model JSON")->required();
    classify->add_option("--scene", classifyOptions.scenePath, "Scene manifest")->required();
    classify->add_option("--mask-out", classifyOptions.maskOut, "PGM mask output")->required();

    DenoiseOptions denoiseOptions;
    CLI::App* denoise = app.add_subcommand("denoise", "Denoise a plume mask");
    denoise->add_option("--mask", denoiseOptions.maskPath, "PGM mask input")->required();
    denoise->add_option("--max-iters", denoiseOptions.maxIters, "Max closing rounds")
        ->capture_default_str();
    denoise
        ->add_option("--min-area-fraction", denoiseOptions.minAreaFraction,
                     "Min component area as a fraction of frame pixels")
        ->capture_default_str();
    denoise->add_option("--out", denoiseOptions.outPath, "PGM mask output")->required();

    PlanOptions planOptions;
    CLI::App* plan = app.add_subcommand("plan", "Plan a trajectory from a denoised mask");
    plan->add_option("--mask", planOptions.maskPath, "Denoised PGM mask")->required();
    plan->add_option("--algorithm", planOptions.algorithm,
                     "straight_nadir|naive_transect|trace_outline|track_center|diagonal_transect|"
                     "lawnmower_transect")
        ->required();
    plan->add_option("--scene-width", planOptions.sceneWidth,
                     "Width used for the 1% step rule (default: mask width)");
    plan->add_option("--traj-out", planOptions.trajOut, "Trajectory CSV output")->required();

    EvalOptions evalOptions;
    CLI::App* eval = app.add_subcommand("eval", "Score a trajectory against ground truth");
    eval->add_option("--scene", evalOptions.scenePath, "Scene manifest")->required();
    eval->add_option("--traj", evalOptions.trajPath, "Trajectory CSV")->required();
    eval->add_option("--report-out", evalOptions.reportOut, "Report JSON output");

    RunOptions runOptions;
    CLI::App* run = app.add_subcommand("run", "End-to-end pipeline on one scene");
    run->add_option("--scene", runOptions.scenePath, "Scene manifest")->required();
    run->add_option("--model", runOptions.modelPath, "Model JSON mask source");
    run->add_flag("--oracle", runOptions.oracle, "Use the ground-truth label as the mask");
    run->add_option("--external-mask", runOptions.externalMaskPath, "PGM mask source");
    run->add_option("--algorithm", runOptions.algorithm, "Trajectory algorithm")->required();
    run->add_option("--max-iters", runOptions.maxIters, "Max closing rounds")
        ->capture_default_str();
    run->add_option("--min-area-fraction", runOptions.minAreaFraction,
                    "Min component area fraction")
        ->capture_default_str();
    run->add_option("--downsample", runOptions.downsampleFactor,
                    "Block-mean downsample factor applied on load")
        ->capture_default_str();
    run->add_option("--traj-out", runOptions.trajOut, "Trajectory CSV output");
    run->add_option("--report-out", runOptions.reportOut, "Report JSON output");
    run->add_option("--overlay-out", runOptions.overlayOut, "Overlay PPM output");

    ExperimentOptions experimentOptions;
    CLI::App* experiment =
        app.add_subcommand("experiment", "Train/test split and full classifier-algorithm grid");
    experiment->add_option("--dataset", experimentOptions.datasetPath, "dataset.json path")
        ->required();
    experiment->add_option("--seed", experimentOptions.seed, "Experiment seed")
        ->capture_default_str();
    experiment->add_option("--report-dir", experimentOptions.reportDir, "Report directory")
        ->required();
    experiment
        ->add_option("--train-fraction", experimentOptions.trainFraction,
                     "Fraction of scenes used for training")
        ->capture_default_str();
    experiment->add_option("--max-iters", experimentOptions.maxIters, "Max closing rounds")
        ->capture_default_str();
    experiment
        ->add_option("--min-area-fraction", experimentOptions.minAreaFraction,
                     "Min component area fraction")
        ->capture_default_str();
    experiment
        ->add_option("--downsample", experimentOptions.downsampleFactor,
                     "Block-mean downsample factor applied on load")
        ->capture_default_str();
    experiment
        ->add_option("--classifiers", experimentOptions.classifiers,
                     "Comma-separated classifier list (default: all six)")
        ->delimiter(',');
    experiment
        ->add_option("--algorithms", experimentOptions.algorithms,
                     "Comma-separated mask-conditioned algorithm list (default: all four)")
        ->delimiter(',');
    experiment->add_flag("--no-baselines", experimentOptions.noBaselines,
                         "Skip the straight-nadir and naive-transect baselines");

    CLI::App* report = app.add_subcommand("report", "Render an experiment report directory");
    std::string reportDir;
    report->add_option("--report-dir", reportDir, "Report directory")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) runSynth(synthOptions);
        if (train->parsed()) runTrain(trainOptions);
        if (classify->parsed()) runClassify(classifyOptions);
        if (denoise->parsed()) runDenoise(denoiseOptions);
        if (plan->parsed()) runPlan(planOptions);
        if (eval->parsed()) runEval(evalOptions);
        if (run->parsed()) runRun(runOptions);
        if (experiment->parsed()) runExperimentCommand(experimentOptions);
        if (report->parsed()) std::cout << plume::renderReportDirectory(reportDir);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const plume::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const plume::ContractError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
