// Run configuration: defaults, key=value config files, JSON round-trip.
#ifndef PHX_CONFIG_H
#define PHX_CONFIG_H

#include <cstdint>
#include <string>

#include <json.hpp>

namespace phx {

struct TrainConfig {
  double alpha = 0.1;  // GIL loss weight
  double beta = 0.1;   // LIL loss weight
  int64_t k = 5;       // retrieved concepts
  int64_t d = 64;      // hidden size
  int64_t n_layers = 2;
  int64_t t_max = 64;
  double lr = 1e-3;
  int64_t epochs = 20;
  int64_t batch_size = 32;
  uint64_t seed = 42;
  int64_t reindex_interval_steps = 0;  // 0 = once per epoch
  int64_t top_local = 5;               // local concepts per report
  int64_t threads = 1;
  bool lowercase = false;

  void validate() const;
};

// Flat `key = value` file, '#' comments; unknown keys are errors.
TrainConfig load_config_file(const std::string& path,
                             TrainConfig base = TrainConfig{});

nlohmann::json config_to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace phx

#endif
