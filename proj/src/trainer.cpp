#include "c2fseg/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "c2fseg/inference.hpp"
#include "c2fseg/nifti.hpp"
#include "c2fseg/preprocess.hpp"

namespace c2fseg {

std::vector<double> TrainLog::totals() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.total);
    return v;
}

std::vector<double> TrainLog::totals_for_step(int step) const {
    std::vector<double> v;
    for (const auto& r : records)
        if (r.step == step) v.push_back(r.total);
    return v;
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "iteration,step,l_roi,l1,l2,total\n";
    os.precision(9);
    for (const auto& r : records) {
        os << r.iteration << ',' << r.step << ',';
        auto cell = [&](const char* key) {
            if (const auto it = r.terms.find(key); it != r.terms.end()) os << it->second;
            os << ',';
        };
        cell("l_roi");
        cell("l1");
        cell("l2");
        os << r.total << '\n';
    }
    return os.str();
}

TraceReport loss_trace_monotonicity_report(const std::vector<double>& trace, int window) {
    if (trace.empty()) throw std::invalid_argument("loss trace is empty");
    const int w = std::max(1, std::min<int>(window, static_cast<int>(trace.size())));
    auto mean_of = [&](size_t begin) {
        double s = 0.0;
        for (size_t i = begin; i < begin + static_cast<size_t>(w); ++i) s += trace[i];
        return s / w;
    };
    TraceReport r;
    r.start_smoothed = mean_of(0);
    r.end_smoothed = mean_of(trace.size() - static_cast<size_t>(w));
    r.decreased = r.end_smoothed < r.start_smoothed;
    return r;
}

std::string TraceReport::render() const {
    std::ostringstream os;
    os << "smoothed loss " << start_smoothed << " -> " << end_smoothed
       << (decreased ? " (healthy)" : " (stalled)");
    return os.str();
}

Trainer::Trainer(ExperimentConfig cfg, Net1 net1, Net2 net2, std::string out_dir)
    : cfg_(std::move(cfg)), net1_(std::move(net1)), net2_(std::move(net2)),
      out_dir_(std::move(out_dir)) {
    cfg_.validate();
    if (!out_dir_.empty()) std::filesystem::create_directories(out_dir_);
}

void Trainer::apply_freeze(const std::string& frozen) {
    for (auto& p : net1_->parameters()) p.set_requires_grad(frozen != "net1");
    for (auto& p : net2_->parameters()) p.set_requires_grad(frozen != "net2");
}

std::vector<torch::Tensor> Trainer::trainable_parameters() {
    std::vector<torch::Tensor> params;
    for (auto& p : net1_->parameters())
        if (p.requires_grad()) params.push_back(p);
    for (auto& p : net2_->parameters())
        if (p.requires_grad()) params.push_back(p);
    return params;
}

void Trainer::refresh_roi_channels(TrainingSet& set) {
    for (auto& sample : set.samples) {
        const auto p1 = predict_coarse(sample.image, net1_, cfg_.inference);
        const auto labels = argmax_labels(p1.data, sample.image.spacing, sample.image.origin);
        sample.roi_channel = static_cast<const Volume<uint8_t>&>(labels);
    }
    net1_->train();
}

void Trainer::run_step(const StepPlan& plan, const TrainingSet& set, Rng& rng) {
    if (set.samples.empty()) throw std::invalid_argument("run_step: empty dataset");
    apply_freeze(plan.frozen);
    auto params = trainable_parameters();
    if (params.empty()) throw std::runtime_error("run_step: every parameter is frozen");
    torch::optim::Adam optimizer(params, torch::optim::AdamOptions(cfg_.schedule.learning_rate));
    net1_->train();
    net2_->train();
    const int K = cfg_.net2.K;
    const int64_t div = cfg_.net1.divisibility();

    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        for (int it = 0; it < plan.iterations_per_epoch; ++it) {
            auto batch = make_batch(set, plan.step_id, cfg_.sampler, rng,
                                    cfg_.inference.coarse_spacing, K, div);
            std::optional<torch::Tensor> p1, p2, t1, t2;
            switch (plan.step_id) {
                case 1:
                case 2: {
                    p1 = net1_->forward(batch.intensity);
                    t1 = batch.target;
                    break;
                }
                case 3: {
                    p1 = net1_->forward(batch.intensity);
                    const auto in2 = compose_net2_input(batch.intensity, *p1);
                    p2 = net2_->forward(in2);
                    t1 = batch.target;
                    // Net2's valid z-reduction: output slices line up with
                    // input slices offset (K-1)/2 from each end
                    t2 = batch.target.narrow(2, (K - 1) / 2, p2->size(2));
                    break;
                }
                case 4:
                default: {
                    const auto in2 = torch::cat({batch.intensity, batch.roi_channel}, 1);
                    p2 = net2_->forward(in2);
                    t2 = batch.target;
                    break;
                }
            }
            auto result = step_loss(plan.step_id, p1, p2, t1, t2, cfg_.loss);
            const double total = result.total.item<double>();
            if (!std::isfinite(total)) {
                std::ostringstream os;
                os << "non-finite loss at step " << plan.step_id << ", iteration "
                   << (global_iteration_ + 1) << " (";
                for (const auto& [k, v] : result.terms) os << k << "=" << v << " ";
                os << ")";
                throw std::runtime_error(os.str());
            }
            optimizer.zero_grad();
            result.total.backward();
            optimizer.step();

            ++global_iteration_;
            log_.records.push_back({global_iteration_, plan.step_id, result.terms, total});
            if (cfg_.schedule.checkpoint_every > 0 && !out_dir_.empty() &&
                global_iteration_ % cfg_.schedule.checkpoint_every == 0) {
                save_checkpoint(make_checkpoint(cfg_, plan.step_id - 1, net1_, net2_),
                                out_dir_ + "/ckpt_iter_" + std::to_string(global_iteration_) +
                                    ".ckpt");
            }
        }
    }
}

void Trainer::run_all(const TrainingSet& set) {
    Rng rng(splitmix64(cfg_.schedule.seed ^ 0x7261696eULL));
    TrainingSet working = set;
    for (const auto& plan : cfg_.schedule.steps) {
        Rng step_rng = rng.fork(static_cast<uint64_t>(plan.step_id));
        if (plan.step_id == 4) refresh_roi_channels(working);
        run_step(plan, working, step_rng);
        if (!out_dir_.empty()) {
            save_checkpoint(make_checkpoint(cfg_, plan.step_id, net1_, net2_),
                            out_dir_ + "/ckpt_step" + std::to_string(plan.step_id) + ".ckpt");
            std::ofstream(out_dir_ + "/train_log.csv") << log_.to_csv();
        }
    }
    if (!out_dir_.empty()) {
        const int last = cfg_.schedule.steps.back().step_id;
        save_checkpoint(make_checkpoint(cfg_, last, net1_, net2_), out_dir_ + "/final.ckpt");
    }
}

std::vector<std::pair<IntensityVolume, LabelVolume>> load_dataset(const ExperimentConfig& cfg,
                                                                  bool holdout) {
    if (cfg.data.source == "phantom") {
        const int n = holdout ? cfg.data.num_holdout : cfg.data.num_train;
        const uint64_t base =
            holdout ? cfg.data.seed_base + static_cast<uint64_t>(cfg.data.num_train)
                    : cfg.data.seed_base;
        if (n == 0) return {};
        return generate_dataset(cfg.phantom, n, base);
    }
    // manifest source: holdout entries are not part of the manifest split
    if (holdout) return {};
    const auto [num_classes, entries] = read_manifest(cfg.data.manifest);
    std::vector<std::pair<IntensityVolume, LabelVolume>> out;
    const auto dir = std::filesystem::path(cfg.data.manifest).parent_path();
    for (const auto& e : entries) {
        auto resolve = [&](const std::string& p) {
            return std::filesystem::path(p).is_absolute() ? p : (dir / p).string();
        };
        out.emplace_back(load_intensity(resolve(e.image_path)),
                         load_labels(resolve(e.label_path), num_classes));
    }
    return out;
}

ExperimentResult train_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    torch::manual_seed(cfg.schedule.seed);
    Net1 net1(cfg.net1);
    Net2 net2(cfg.net2);
    init_parameters(*net1);
    init_parameters(*net2);

    auto train_pairs = load_dataset(cfg, false);
    ExperimentResult result;
    result.holdout = load_dataset(cfg, true);

    auto set = make_training_set(std::move(train_pairs));
    if (set.num_classes != cfg.net1.num_classes)
        throw std::invalid_argument("dataset num_classes " + std::to_string(set.num_classes) +
                                    " does not match the configured networks");
    Trainer trainer(cfg, net1, net2, out_dir);
    trainer.run_all(set);
    result.log = trainer.log();
    result.model.config = cfg;
    result.model.completed_step = cfg.schedule.steps.back().step_id;
    result.model.net1 = net1;
    result.model.net2 = net2;
    result.model.net1->eval();
    result.model.net2->eval();
    if (!out_dir.empty()) result.final_checkpoint = out_dir + "/final.ckpt";
    return result;
}

}  // namespace c2fseg
