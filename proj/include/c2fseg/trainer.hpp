#pragma once

#include <torch/torch.h>

#include "c2fseg/checkpoint.hpp"
#include "c2fseg/sampler.hpp"

namespace c2fseg {

struct IterationRecord {
    int64_t iteration = 0;  // global, 1-based
    int step = 0;
    std::map<std::string, double> terms;  // l_roi / l1 / l2
    double total = 0.0;
};

struct TrainLog {
    std::vector<IterationRecord> records;

    std::vector<double> totals() const;
    std::vector<double> totals_for_step(int step) const;
    /// CSV with the fixed header iteration,step,l_roi,l1,l2,total.
    std::string to_csv() const;
};

/// Smoothed (window-20 moving average) start/end of a loss trace and a
/// stall flag for acceptance checks.
struct TraceReport {
    double start_smoothed = 0.0;
    double end_smoothed = 0.0;
    bool decreased = false;

    std::string render() const;
};

TraceReport loss_trace_monotonicity_report(const std::vector<double>& trace, int window = 20);

/// Runs the four-step schedule: per-iteration batch draw, forward,
/// step loss, Adam update on the unfrozen parameters.
class Trainer {
public:
    Trainer(ExperimentConfig cfg, Net1 net1, Net2 net2, std::string out_dir = "");

    /// One schedule step. Precondition for steps > 1 is that the nets
    /// carry the prior steps' weights (the CLI enforces resume-or-scratch).
    void run_step(const StepPlan& plan, const TrainingSet& set, Rng& rng);

    /// Steps in order, threading parameters; writes a checkpoint per step
    /// and final.ckpt when out_dir is set.
    void run_all(const TrainingSet& set);

    const TrainLog& log() const { return log_; }
    Net1 net1() { return net1_; }
    Net2 net2() { return net2_; }
    const ExperimentConfig& config() const { return cfg_; }

    /// Net1 full-volume coarse labels for every sample (step-4 channel 1).
    void refresh_roi_channels(TrainingSet& set);

private:
    void apply_freeze(const std::string& frozen);
    std::vector<torch::Tensor> trainable_parameters();

    ExperimentConfig cfg_;
    Net1 net1_;
    Net2 net2_;
    std::string out_dir_;
    TrainLog log_;
    int64_t global_iteration_ = 0;
};

/// End-to-end deterministic experiment: seeds all RNG streams, builds the
/// dataset per the config, trains all steps, writes checkpoints/logs to
/// out_dir. Returns the trained model and the held-out volumes.
struct ExperimentResult {
    TrainedModel model;
    TrainLog log;
    std::vector<std::pair<IntensityVolume, LabelVolume>> holdout;
    std::string final_checkpoint;  // path, empty if out_dir was empty
};

ExperimentResult train_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

/// Dataset construction per the config's data section (phantom or manifest).
std::vector<std::pair<IntensityVolume, LabelVolume>> load_dataset(const ExperimentConfig& cfg,
                                                                  bool holdout);

}  // namespace c2fseg
