#include "c2fseg/config.hpp"

#include <fstream>

namespace c2fseg {

using nlohmann::json;

int64_t TrainSchedule::total_iterations() const {
    int64_t total = 0;
    for (const auto& s : steps) total += s.iterations();
    return total;
}

void TrainSchedule::validate() const {
    if (steps.empty()) throw std::invalid_argument("schedule has no steps");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    for (const auto& s : steps) {
        if (s.step_id < 1 || s.step_id > 4)
            throw std::invalid_argument("step_id must be in 1..4");
        if (s.epochs < 1 || s.iterations_per_epoch < 1)
            throw std::invalid_argument("epochs and iterations_per_epoch must be >= 1");
        if (s.frozen != "none" && s.frozen != "net1" && s.frozen != "net2")
            throw std::invalid_argument("frozen must be one of none|net1|net2");
        if (s.step_id == 1 && s.frozen != "net2")
            throw std::invalid_argument("step 1 must freeze net2");
        if (s.step_id == 4 && s.frozen != "net1")
            throw std::invalid_argument("step 4 must freeze net1");
    }
}

TrainSchedule TrainSchedule::desk_default() {
    TrainSchedule s;
    s.steps = {{1, 50, 4, "net2"}, {2, 50, 4, "net2"}, {3, 50, 4, "none"}, {4, 50, 4, "net1"}};
    return s;
}

TrainSchedule TrainSchedule::paper_default() {
    TrainSchedule s;
    s.steps = {{1, 200, 16, "net2"}, {2, 200, 16, "net2"}, {3, 200, 16, "none"},
               {4, 200, 16, "net1"}};
    return s;
}

void ExperimentConfig::validate() const {
    phantom.validate();
    loss.validate();
    sampler.validate();
    net1.validate();
    net2.validate();
    schedule.validate();
    if (net1.num_classes != net2.num_classes)
        throw std::invalid_argument("net1/net2 disagree on num_classes");
    if (!(inference.roi_margin >= 0)) throw std::invalid_argument("roi_margin must be >= 0");
    for (double s : inference.coarse_spacing)
        if (!(s > 0)) throw std::invalid_argument("coarse_spacing must be positive");
    const int64_t div = net1.divisibility();
    for (int64_t s : sampler.subvolume_sizes)
        if (s % div != 0)
            throw std::invalid_argument("subvolume sizes must be divisible by " +
                                        std::to_string(div) + " (net1 pooling depth)");
    if (data.source != "phantom" && data.source != "manifest")
        throw std::invalid_argument("data.source must be phantom|manifest");
    if (data.source == "phantom" && data.num_train < 1)
        throw std::invalid_argument("data.num_train must be >= 1");
}

namespace {

template <typename T, size_t N>
std::array<T, N> array_from(const json& j) {
    if (!j.is_array() || j.size() != N)
        throw std::invalid_argument("expected an array of length " + std::to_string(N));
    std::array<T, N> a{};
    for (size_t i = 0; i < N; ++i) a[i] = j[i].get<T>();
    return a;
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const ExperimentConfig& c) {
    json j;
    j["phantom"] = {{"shape", c.phantom.shape},
                    {"spacing", c.phantom.spacing},
                    {"num_foreground_classes", c.phantom.num_foreground_classes},
                    {"noise_sigma", c.phantom.noise_sigma},
                    {"seed", c.phantom.seed},
                    {"structure_scale", c.phantom.structure_scale}};
    j["data"] = {{"source", c.data.source},
                 {"manifest", c.data.manifest},
                 {"num_train", c.data.num_train},
                 {"num_holdout", c.data.num_holdout},
                 {"seed_base", c.data.seed_base}};
    j["loss"] = {{"epsilon", c.loss.epsilon},
                 {"weighting_mode", c.loss.weighting_mode == WeightingMode::literal
                                        ? "literal"
                                        : (c.loss.weighting_mode == WeightingMode::uniform
                                               ? "uniform"
                                               : "normalized_inverse_count")},
                 {"roi_mode", c.loss.roi_mode == RoiMode::literal ? "literal" : "unit"}};
    j["sampler"] = {{"subvolume_sizes", c.sampler.subvolume_sizes},
                    {"volumes_per_batch", c.sampler.volumes_per_batch},
                    {"rng_seed", c.sampler.rng_seed},
                    {"augmentation",
                     {{"enabled", c.sampler.augmentation.enabled},
                      {"rotation_deg_max", c.sampler.augmentation.rotation_deg_max},
                      {"translation_vox_max", c.sampler.augmentation.translation_vox_max},
                      {"shear_max", c.sampler.augmentation.shear_max},
                      {"scale_range", c.sampler.augmentation.scale_range},
                      {"flip_axes_prob", c.sampler.augmentation.flip_axes_prob},
                      {"elastic_control_grid", c.sampler.augmentation.elastic_control_grid},
                      {"elastic_sigma", c.sampler.augmentation.elastic_sigma}}}};
    j["net1"] = {{"blocks_per_path", c.net1.blocks_per_path},
                 {"kernel", c.net1.kernel},
                 {"dilation_contracting", c.net1.dilation_contracting},
                 {"pool", c.net1.pool},
                 {"base_width", c.net1.base_width},
                 {"dropout_rate", c.net1.dropout_rate},
                 {"num_classes", c.net1.num_classes}};
    j["net2"] = {{"blocks_per_path", c.net2.blocks_per_path},
                 {"kernel_contracting", c.net2.kernel_contracting},
                 {"kernel_expansive", c.net2.kernel_expansive},
                 {"K", c.net2.K},
                 {"base_width", c.net2.base_width},
                 {"num_classes", c.net2.num_classes},
                 {"input_channels", c.net2.input_channels}};
    json steps = json::array();
    for (const auto& s : c.schedule.steps)
        steps.push_back({{"step", s.step_id},
                         {"epochs", s.epochs},
                         {"iterations_per_epoch", s.iterations_per_epoch},
                         {"frozen", s.frozen}});
    j["schedule"] = {{"steps", steps},
                     {"learning_rate", c.schedule.learning_rate},
                     {"seed", c.schedule.seed},
                     {"checkpoint_every", c.schedule.checkpoint_every}};
    j["inference"] = {{"coarse_spacing", c.inference.coarse_spacing},
                      {"roi_margin", c.inference.roi_margin},
                      {"prob_upsample", to_string(c.inference.prob_upsample)},
                      {"slice_chunk", c.inference.slice_chunk}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    // every key is optional and defaults to the desk-scale configuration
    c.schedule = TrainSchedule::desk_default();
    if (j.contains("phantom")) {
        const auto& p = j.at("phantom");
        if (p.contains("shape")) c.phantom.shape = array_from<int64_t, 3>(p.at("shape"));
        if (p.contains("spacing")) c.phantom.spacing = array_from<double, 3>(p.at("spacing"));
        get_if(p, "num_foreground_classes", c.phantom.num_foreground_classes);
        get_if(p, "noise_sigma", c.phantom.noise_sigma);
        get_if(p, "seed", c.phantom.seed);
        get_if(p, "structure_scale", c.phantom.structure_scale);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        get_if(d, "source", c.data.source);
        get_if(d, "manifest", c.data.manifest);
        get_if(d, "num_train", c.data.num_train);
        get_if(d, "num_holdout", c.data.num_holdout);
        get_if(d, "seed_base", c.data.seed_base);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        get_if(l, "epsilon", c.loss.epsilon);
        if (l.contains("weighting_mode"))
            c.loss.weighting_mode = weighting_mode_from_string(l.at("weighting_mode"));
        if (l.contains("roi_mode")) c.loss.roi_mode = roi_mode_from_string(l.at("roi_mode"));
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        get_if(s, "subvolume_sizes", c.sampler.subvolume_sizes);
        get_if(s, "volumes_per_batch", c.sampler.volumes_per_batch);
        get_if(s, "rng_seed", c.sampler.rng_seed);
        if (s.contains("augmentation")) {
            const auto& a = s.at("augmentation");
            auto& ac = c.sampler.augmentation;
            get_if(a, "enabled", ac.enabled);
            get_if(a, "rotation_deg_max", ac.rotation_deg_max);
            get_if(a, "translation_vox_max", ac.translation_vox_max);
            get_if(a, "shear_max", ac.shear_max);
            if (a.contains("scale_range")) ac.scale_range = array_from<double, 2>(a.at("scale_range"));
            get_if(a, "flip_axes_prob", ac.flip_axes_prob);
            get_if(a, "elastic_control_grid", ac.elastic_control_grid);
            get_if(a, "elastic_sigma", ac.elastic_sigma);
        }
    }
    if (j.contains("net1")) {
        const auto& n = j.at("net1");
        get_if(n, "blocks_per_path", c.net1.blocks_per_path);
        get_if(n, "kernel", c.net1.kernel);
        get_if(n, "dilation_contracting", c.net1.dilation_contracting);
        get_if(n, "pool", c.net1.pool);
        get_if(n, "base_width", c.net1.base_width);
        get_if(n, "dropout_rate", c.net1.dropout_rate);
        get_if(n, "num_classes", c.net1.num_classes);
    }
    if (j.contains("net2")) {
        const auto& n = j.at("net2");
        get_if(n, "blocks_per_path", c.net2.blocks_per_path);
        get_if(n, "kernel_contracting", c.net2.kernel_contracting);
        get_if(n, "kernel_expansive", c.net2.kernel_expansive);
        get_if(n, "K", c.net2.K);
        get_if(n, "base_width", c.net2.base_width);
        get_if(n, "num_classes", c.net2.num_classes);
        get_if(n, "input_channels", c.net2.input_channels);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        if (s.contains("steps")) {
            c.schedule.steps.clear();
            for (const auto& st : s.at("steps")) {
                StepPlan p;
                get_if(st, "step", p.step_id);
                get_if(st, "epochs", p.epochs);
                get_if(st, "iterations_per_epoch", p.iterations_per_epoch);
                p.frozen = (p.step_id == 1) ? "net2" : (p.step_id == 4 ? "net1" : "none");
                get_if(st, "frozen", p.frozen);
                c.schedule.steps.push_back(p);
            }
        }
        get_if(s, "learning_rate", c.schedule.learning_rate);
        get_if(s, "seed", c.schedule.seed);
        get_if(s, "checkpoint_every", c.schedule.checkpoint_every);
    }
    if (j.contains("inference")) {
        const auto& i = j.at("inference");
        if (i.contains("coarse_spacing"))
            c.inference.coarse_spacing = array_from<double, 3>(i.at("coarse_spacing"));
        get_if(i, "roi_margin", c.inference.roi_margin);
        if (i.contains("prob_upsample"))
            c.inference.prob_upsample = interp_from_string(i.at("prob_upsample"));
        get_if(i, "slice_chunk", c.inference.slice_chunk);
    }
    // derive class counts from the phantom when nets were not pinned
    const int derived = c.phantom.num_foreground_classes + 1;
    if (!j.contains("net1") || !j.at("net1").contains("num_classes")) c.net1.num_classes = derived;
    if (!j.contains("net2") || !j.at("net2").contains("num_classes")) c.net2.num_classes = derived;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write config: " + path);
    f << to_json(cfg).dump(2) << "\n";
}

}  // namespace c2fseg
