#include "c2fseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace c2fseg {

namespace {

constexpr char kMagic[8] = {'C', '2', 'F', 'S', 'E', 'G', 'C', 'K'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return v;
}

void collect(const std::string& prefix, const torch::nn::Module& m,
             std::map<std::string, torch::Tensor>& out) {
    for (const auto& p : m.named_parameters())
        out[prefix + p.key()] = p.value().detach().to(torch::kFloat32).contiguous().clone();
}

void restore(const std::string& prefix, torch::nn::Module& m,
             const std::map<std::string, torch::Tensor>& tensors, const std::string& what) {
    torch::NoGradGuard no_grad;
    for (auto p : m.named_parameters()) {
        const auto it = tensors.find(prefix + p.key());
        if (it == tensors.end())
            throw std::runtime_error("checkpoint is missing tensor " + prefix + p.key() +
                                     " for " + what);
        if (it->second.sizes() != p.value().sizes())
            throw std::runtime_error("checkpoint tensor " + prefix + p.key() +
                                     " has mismatching shape");
        p.value().copy_(it->second);
    }
}

}  // namespace

Checkpoint make_checkpoint(const ExperimentConfig& cfg, int completed_step, Net1 net1, Net2 net2) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.completed_step = completed_step;
    collect("net1.", *net1, ckpt.tensors);
    collect("net2.", *net2, ckpt.tensors);
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, static_cast<uint32_t>(ckpt.version));
    nlohmann::json meta;
    meta["config"] = to_json(ckpt.config);
    meta["completed_step"] = ckpt.completed_step;
    const std::string meta_str = meta.dump();
    put<uint64_t>(os, meta_str.size());
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    put<uint64_t>(os, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        const auto t = tensor.to(torch::kFloat32).contiguous();
        put<uint64_t>(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint32_t>(os, static_cast<uint32_t>(t.dim()));
        for (int64_t d = 0; d < t.dim(); ++d) put<int64_t>(os, t.size(d));
        os.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("write error on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint ckpt;
    ckpt.version = static_cast<int>(take<uint32_t>(is, path));
    if (ckpt.version != 1)
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(ckpt.version) + ": " + path);
    const auto meta_len = take<uint64_t>(is, path);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    const auto meta = nlohmann::json::parse(meta_str);
    ckpt.config = config_from_json(meta.at("config"));
    ckpt.completed_step = meta.value("completed_step", 0);
    const auto count = take<uint64_t>(is, path);
    for (uint64_t i = 0; i < count; ++i) {
        const auto name_len = take<uint64_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto ndim = take<uint32_t>(is, path);
        std::vector<int64_t> sizes(ndim);
        for (auto& s : sizes) s = take<int64_t>(is, path);
        auto t = torch::empty(sizes, torch::kFloat32);
        is.read(reinterpret_cast<char*>(t.data_ptr<float>()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        ckpt.tensors[name] = t;
    }
    return ckpt;
}

TrainedModel restore_model(const Checkpoint& ckpt) {
    TrainedModel m;
    m.config = ckpt.config;
    m.completed_step = ckpt.completed_step;
    m.net1 = Net1(ckpt.config.net1);
    m.net2 = Net2(ckpt.config.net2);
    restore("net1.", *m.net1, ckpt.tensors, "net1");
    restore("net2.", *m.net2, ckpt.tensors, "net2");
    m.net1->eval();
    m.net2->eval();
    return m;
}

TrainedModel load_model(const std::string& path) { return restore_model(load_checkpoint(path)); }

uint64_t parameter_checksum(const torch::nn::Module& m) {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& p : m.parameters()) {
        const auto t = p.detach().to(torch::kFloat32).contiguous();
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data_ptr<float>());
        const size_t n = static_cast<size_t>(t.numel()) * sizeof(float);
        for (size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace c2fseg
