#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "c2fseg/inference.hpp"
#include "c2fseg/metrics.hpp"
#include "c2fseg/nifti.hpp"
#include "c2fseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace c2fseg;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
    if (path.empty()) {
        ExperimentConfig cfg;
        cfg.schedule = TrainSchedule::desk_default();
        const int nc = cfg.phantom.num_foreground_classes + 1;
        cfg.net1.num_classes = nc;
        cfg.net2.num_classes = nc;
        cfg.validate();
        return cfg;
    }
    return load_config(path);
}

void apply_seed_override(ExperimentConfig& cfg, const std::optional<uint64_t>& seed) {
    if (!seed) return;
    cfg.schedule.seed = *seed;
    cfg.sampler.rng_seed = *seed;
    cfg.phantom.seed = *seed;
}

int run_phantom(const std::string& config_path, const std::string& out_dir, int count,
                const std::optional<uint64_t>& seed) {
    auto cfg = config_or_default(config_path);
    apply_seed_override(cfg, seed);
    fs::create_directories(out_dir);
    const int n = count > 0 ? count : cfg.data.num_train;
    const auto pairs = generate_dataset(cfg.phantom, n, seed ? *seed : cfg.data.seed_base);
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < n; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "phantom_%03d", i);
        ManifestEntry e;
        e.image_path = std::string(name) + "_image.nii.gz";
        e.label_path = std::string(name) + "_labels.nii.gz";
        e.seed = (seed ? *seed : cfg.data.seed_base) + static_cast<uint64_t>(i);
        save_volume(pairs[static_cast<size_t>(i)].first, (fs::path(out_dir) / e.image_path).string());
        save_volume(pairs[static_cast<size_t>(i)].second, (fs::path(out_dir) / e.label_path).string());
        std::vector<int64_t> counts(static_cast<size_t>(cfg.phantom.num_foreground_classes + 1), 0);
        for (uint8_t v : pairs[static_cast<size_t>(i)].second.data) ++counts[v];
        e.class_counts = std::move(counts);
        entries.push_back(std::move(e));
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(),
                   cfg.phantom.num_foreground_classes + 1, entries);
    std::cout << "wrote " << n << " phantom pairs + manifest to " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& step, const std::string& resume,
              bool from_scratch, const std::string& out_dir, const std::optional<uint64_t>& seed) {
    auto cfg = config_or_default(config_path);
    apply_seed_override(cfg, seed);

    if (step == "all") {
        if (!resume.empty()) {
            const auto model = load_model(resume);
            cfg = model.config;
            apply_seed_override(cfg, seed);
            auto set = make_training_set(load_dataset(cfg, false));
            Trainer trainer(cfg, model.net1, model.net2, out_dir);
            trainer.run_all(set);
        } else {
            train_experiment(cfg, out_dir);
        }
        std::cout << "training complete; final checkpoint at " << out_dir << "/final.ckpt\n";
        return 0;
    }

    const int step_id = std::stoi(step);
    if (step_id < 1 || step_id > 4) throw std::runtime_error("--step must be 1..4 or all");
    if (step_id > 1 && resume.empty() && !from_scratch)
        throw std::runtime_error("step " + step + " needs --resume <checkpoint> from the prior "
                                 "steps (or --from-scratch to skip them)");

    Net1 net1{nullptr};
    Net2 net2{nullptr};
    if (!resume.empty()) {
        const auto model = load_model(resume);
        cfg = model.config;
        apply_seed_override(cfg, seed);
        net1 = model.net1;
        net2 = model.net2;
    } else {
        torch::manual_seed(cfg.schedule.seed);
        net1 = Net1(cfg.net1);
        net2 = Net2(cfg.net2);
        init_parameters(*net1);
        init_parameters(*net2);
    }
    StepPlan plan;
    for (const auto& p : cfg.schedule.steps)
        if (p.step_id == step_id) plan = p;
    plan.step_id = step_id;

    auto set = make_training_set(load_dataset(cfg, false));
    Trainer trainer(cfg, net1, net2, out_dir);
    Rng rng(splitmix64(cfg.schedule.seed ^ 0x7261696eULL));
    Rng step_rng = rng.fork(static_cast<uint64_t>(step_id));
    if (step_id == 4) {
        TrainingSet mutable_set = set;
        trainer.refresh_roi_channels(mutable_set);
        trainer.run_step(plan, mutable_set, step_rng);
    } else {
        trainer.run_step(plan, set, step_rng);
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_checkpoint(make_checkpoint(cfg, step_id, trainer.net1(), trainer.net2()),
                        (fs::path(out_dir) / ("ckpt_step" + step + ".ckpt")).string());
        std::ofstream((fs::path(out_dir) / "train_log.csv").string()) << trainer.log().to_csv();
    }
    std::cout << "step " << step << " complete (" << trainer.log().records.size()
              << " iterations)\n";
    return 0;
}

int run_predict(const std::string& checkpoint, const std::string& input,
                const std::string& output) {
    const auto model = load_model(checkpoint);
    const auto image = load_intensity(input);
    const auto labels = predict(image, model);
    save_volume(labels, output);
    std::cout << "wrote " << output << "\n";
    return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_csv) {
    auto truth = load_labels(truth_path);
    auto pred = load_labels(pred_path, truth.num_classes);
    if (pred.num_classes < truth.num_classes) pred.num_classes = truth.num_classes;
    const auto report = evaluate_volume(pred, truth);
    const auto csv = to_csv(report);
    std::cout << csv;
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        f << csv;
    }
    return 0;
}

int run_summary(const std::string& config_path) {
    const auto cfg = config_or_default(config_path);
    Net1 net1(cfg.net1);
    Net2 net2(cfg.net2);
    std::cout << render(summarize(*net1), "Net1 (dilated volumetric encoder-decoder)");
    std::cout << render(summarize(*net2), "Net2 (3D-to-2D slice classifier, K=" +
                                              std::to_string(cfg.net2.K) + ")");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coarse-to-fine volumetric multi-class segmentation"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", step = "all", resume, checkpoint, input, output;
    std::string pred_path, truth_path, out_csv;
    bool from_scratch = false;
    int count = 0;
    std::optional<uint64_t> seed;
    uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_value, "override every RNG stream")
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* phantom_cmd = app.add_subcommand("phantom", "write synthetic volume pairs + manifest");
    phantom_cmd->add_option("--config", config_path, "experiment config (JSON)");
    phantom_cmd->add_option("--out", out_dir, "output directory")->required();
    phantom_cmd->add_option("--count", count, "number of volumes (default: data.num_train)");
    add_seed(phantom_cmd);

    auto* train_cmd = app.add_subcommand("train", "run the four-step schedule");
    train_cmd->add_option("--config", config_path, "experiment config (JSON)");
    train_cmd->add_option("--step", step, "1|2|3|4|all")->default_val("all");
    train_cmd->add_option("--resume", resume, "checkpoint to continue from");
    train_cmd->add_flag("--from-scratch", from_scratch, "allow a lone step > 1 without --resume");
    train_cmd->add_option("--out", out_dir, "checkpoint/log directory");
    add_seed(train_cmd);

    auto* predict_cmd = app.add_subcommand("predict", "full-resolution prediction");
    predict_cmd->add_option("--checkpoint", checkpoint)->required();
    predict_cmd->add_option("--input", input, "intensity volume (.nii/.nii.gz)")->required();
    predict_cmd->add_option("--output", output, "label volume to write")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "per-class Dice/Jaccard/ASD table");
    eval_cmd->add_option("--pred", pred_path)->required();
    eval_cmd->add_option("--truth", truth_path)->required();
    eval_cmd->add_option("--out", out_csv, "also write the CSV here");

    auto* summary_cmd = app.add_subcommand("summary", "layer table and parameter counts");
    summary_cmd->add_option("--config", config_path, "experiment config (JSON)");

    CLI11_PARSE(app, argc, argv);
    if (seed_set) seed = seed_value;

    try {
        if (phantom_cmd->parsed()) return run_phantom(config_path, out_dir, count, seed);
        if (train_cmd->parsed())
            return run_train(config_path, step, resume, from_scratch, out_dir, seed);
        if (predict_cmd->parsed()) return run_predict(checkpoint, input, output);
        if (eval_cmd->parsed()) return run_evaluate(pred_path, truth_path, out_csv);
        if (summary_cmd->parsed()) return run_summary(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
