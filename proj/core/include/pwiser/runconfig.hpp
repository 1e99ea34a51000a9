#pragma once

#include <string>
#include <vector>

#include "pwiser/trainer.hpp"

namespace pwiser {

// Flat key=value run configuration. Missing keys take the defaults baked
// into TrainConfig; unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  std::string train_path;
  std::string valid_path;
  std::vector<std::string> schema;  // feature field names, in file order
  LabelPolicy policy = LabelPolicy::coerce;
  std::int64_t vocab_size = 100003;  // per-field hash buckets

  // Applies one "key=value" assignment; throws ConfigError on unknown keys
  // or bad values.
  void set(const std::string& key, const std::string& value);

  // Full effective configuration, one key=value per line, sorted by key.
  std::string echo() const;

  static RunConfig from_file(const std::string& path);
  static const std::vector<std::string>& known_keys();
};

}  // namespace pwiser
