#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "guesslab/numerics.hpp"

namespace guesslab {

/// Portable model container: a line-oriented text header (kind tag, meta
/// key/value pairs, layer dimensions, activation tags, tensor shapes)
/// followed by one little-endian float64 blob holding every parameter in
/// declaration order. Save/load round-trips are bit-exact.
class Checkpoint {
  public:
    struct LayerSpec {
        std::size_t in = 0;
        std::size_t out = 0;
        Activation act = Activation::Identity;
    };
    struct NetEntry {
        std::string name;
        std::vector<LayerSpec> layers;
        std::size_t offset = 0;  // into params
        std::size_t count = 0;
    };
    struct TensorEntry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };

    std::string kind;

    void set_meta(const std::string& key, const std::string& value);
    void set_meta(const std::string& key, double value);
    void set_meta(const std::string& key, long value);
    std::optional<std::string> meta(const std::string& key) const;
    std::string require_meta(const std::string& key) const;
    double meta_double(const std::string& key) const;
    long meta_long(const std::string& key) const;

    void add_net(const std::string& name, const DenseNet& net);
    void add_tensor(const std::string& name, const std::vector<std::size_t>& shape,
                    std::span<const double> data);

    bool has_net(const std::string& name) const;
    DenseNet restore_net(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
    Vec tensor(const std::string& name) const;
    std::vector<std::size_t> tensor_shape(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

  private:
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<NetEntry> nets_;
    std::vector<TensorEntry> tensors_;
    Vec params_;

    const NetEntry& find_net(const std::string& name) const;
    const TensorEntry& find_tensor(const std::string& name) const;
};

/// Formats a double so that parsing it back recovers the exact same value.
std::string format_double(double v);

}  // namespace guesslab
