#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "guesslab/guesser.hpp"
#include "guesslab/imagination.hpp"
#include "guesslab/oracle.hpp"
#include "guesslab/world.hpp"

namespace guesslab {

/// Flat key=value run configuration. Every key has a documented default;
/// unknown keys are rejected so typos surface as config errors.
class Config {
  public:
    static Config defaults();
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_long(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::uint64_t> get_seed_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    WorldConfig world_config() const;
    SplitConfig split_config() const;
    ImaginationConfig imagination_config() const;
    OracleTrainConfig oracle_config() const;
    GuesserTrainConfig guesser_config() const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace guesslab
