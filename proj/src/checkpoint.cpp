#include "guesslab/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "guesslab/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint files are little-endian; big-endian hosts unsupported");

namespace guesslab {

namespace {
constexpr const char* kMagic = "guesslab-checkpoint v1";
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw numeric_error("format_double failed");
    return std::string(buf, ptr);
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    meta_.emplace_back(key, value);
}

void Checkpoint::set_meta(const std::string& key, double value) {
    set_meta(key, format_double(value));
}

void Checkpoint::set_meta(const std::string& key, long value) {
    set_meta(key, std::to_string(value));
}

std::optional<std::string> Checkpoint::meta(const std::string& key) const {
    for (const auto& [k, v] : meta_)
        if (k == key) return v;
    return std::nullopt;
}

std::string Checkpoint::require_meta(const std::string& key) const {
    auto v = meta(key);
    if (!v) throw parse_error("checkpoint missing meta key: " + key);
    return *v;
}

double Checkpoint::meta_double(const std::string& key) const {
    return std::stod(require_meta(key));
}

long Checkpoint::meta_long(const std::string& key) const {
    return std::stol(require_meta(key));
}

void Checkpoint::add_net(const std::string& name, const DenseNet& net) {
    NetEntry entry;
    entry.name = name;
    for (const auto& layer : net.layers)
        entry.layers.push_back({layer.in_dim(), layer.out_dim(), layer.act});
    entry.offset = params_.size();
    entry.count = param_count(net);
    params_.resize(params_.size() + entry.count);
    copy_params(net, std::span<double>(params_).subspan(entry.offset, entry.count));
    nets_.push_back(std::move(entry));
}

void Checkpoint::add_tensor(const std::string& name, const std::vector<std::size_t>& shape,
                            std::span<const double> data) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != data.size()) throw shape_error("add_tensor: shape does not match data size");
    TensorEntry entry;
    entry.name = name;
    entry.shape = shape;
    entry.offset = params_.size();
    entry.count = n;
    params_.insert(params_.end(), data.begin(), data.end());
    tensors_.push_back(std::move(entry));
}

const Checkpoint::NetEntry& Checkpoint::find_net(const std::string& name) const {
    for (const auto& e : nets_)
        if (e.name == name) return e;
    throw parse_error("checkpoint has no net named " + name);
}

const Checkpoint::TensorEntry& Checkpoint::find_tensor(const std::string& name) const {
    for (const auto& e : tensors_)
        if (e.name == name) return e;
    throw parse_error("checkpoint has no tensor named " + name);
}

bool Checkpoint::has_net(const std::string& name) const {
    for (const auto& e : nets_)
        if (e.name == name) return true;
    return false;
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& e : tensors_)
        if (e.name == name) return true;
    return false;
}

DenseNet Checkpoint::restore_net(const std::string& name) const {
    const NetEntry& entry = find_net(name);
    DenseNet net;
    for (const auto& spec : entry.layers) {
        DenseLayer layer;
        layer.weight = Matrix(spec.out, spec.in);
        layer.bias.assign(spec.out, 0.0);
        layer.act = spec.act;
        net.layers.push_back(std::move(layer));
    }
    load_params(net, std::span<const double>(params_).subspan(entry.offset, entry.count));
    return net;
}

Vec Checkpoint::tensor(const std::string& name) const {
    const TensorEntry& entry = find_tensor(name);
    return Vec(params_.begin() + static_cast<std::ptrdiff_t>(entry.offset),
               params_.begin() + static_cast<std::ptrdiff_t>(entry.offset + entry.count));
}

std::vector<std::size_t> Checkpoint::tensor_shape(const std::string& name) const {
    return find_tensor(name).shape;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open checkpoint for writing: " + path);
    std::ostringstream header;
    header << kMagic << "\n";
    header << "kind " << kind << "\n";
    for (const auto& [k, v] : meta_) header << "meta " << k << " " << v << "\n";
    for (const auto& net : nets_) {
        header << "net " << net.name << " " << net.layers.size() << "\n";
        for (const auto& layer : net.layers)
            header << "layer " << layer.in << " " << layer.out << " "
                   << activation_name(layer.act) << "\n";
    }
    for (const auto& t : tensors_) {
        header << "tensor " << t.name;
        for (std::size_t d : t.shape) header << " " << d;
        header << "\n";
    }
    header << "params " << params_.size() << "\n";
    out << header.str();
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!out) throw config_error("short write on checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open checkpoint: " + path);
    Checkpoint ckpt;
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw parse_error("bad checkpoint magic in " + path);
    std::size_t offset = 0;
    bool saw_params = false;
    std::size_t total = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "kind") {
            ls >> std::ws;
            std::getline(ls, ckpt.kind);
        } else if (tag == "meta") {
            std::string key, value;
            ls >> key;
            ls >> std::ws;
            std::getline(ls, value);
            ckpt.meta_.emplace_back(key, value);
        } else if (tag == "net") {
            NetEntry entry;
            std::size_t n_layers = 0;
            ls >> entry.name >> n_layers;
            for (std::size_t k = 0; k < n_layers; ++k) {
                if (!std::getline(in, line)) throw parse_error("truncated net entry");
                std::istringstream lls(line);
                std::string ltag, act;
                LayerSpec spec;
                lls >> ltag >> spec.in >> spec.out >> act;
                if (ltag != "layer") throw parse_error("expected layer line, got: " + line);
                spec.act = activation_from_name(act);
                entry.layers.push_back(spec);
            }
            entry.offset = offset;
            entry.count = 0;
            for (const auto& spec : entry.layers) entry.count += spec.in * spec.out + spec.out;
            offset += entry.count;
            ckpt.nets_.push_back(std::move(entry));
        } else if (tag == "tensor") {
            TensorEntry entry;
            ls >> entry.name;
            std::size_t d;
            while (ls >> d) entry.shape.push_back(d);
            entry.count = 1;
            for (std::size_t s : entry.shape) entry.count *= s;
            entry.offset = offset;
            offset += entry.count;
            ckpt.tensors_.push_back(std::move(entry));
        } else if (tag == "params") {
            ls >> total;
            saw_params = true;
            break;
        } else {
            throw parse_error("unknown checkpoint header tag: " + tag);
        }
    }
    if (!saw_params) throw parse_error("checkpoint missing params section: " + path);
    if (total != offset)
        throw parse_error("checkpoint param count mismatch: header says " +
                          std::to_string(total) + ", entries need " + std::to_string(offset));
    ckpt.params_.resize(total);
    in.read(reinterpret_cast<char*>(ckpt.params_.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != total * sizeof(double))
        throw parse_error("checkpoint truncated: " + path);
    return ckpt;
}

}  // namespace guesslab
