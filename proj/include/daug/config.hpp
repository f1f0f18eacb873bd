#pragma once

#include <string>
#include <variant>
#include <vector>

#include "daug/trainer.hpp"

namespace daug {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One sweep axis: a swept key plus its values (kept as strings; applied via
// the same setters as plain parsing).
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepSpec {
  TrainConfig base;
  std::vector<SweepAxis> axes;
  bool cartesian = true;  // false zips equal-length axes instead

  // expand into concrete (label, config) points
  std::vector<std::pair<std::string, TrainConfig>> expand() const;
};

using ParsedConfig = std::variant<TrainConfig, SweepSpec>;

// Flat `key = value` text; '#' starts a comment; list values as [a,b,c].
// Unknown keys are rejected. List values require `sweep = true` and must be
// on a sweepable key (target_layer, rate, stop_grad, batch_fraction,
// freeze_mode, all_layers).
ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config(const std::string& path);

// full key=value echo of a resolved config; re-parsing yields an equal config
std::string serialize_config(const TrainConfig& cfg);

bool config_equal(const TrainConfig& a, const TrainConfig& b);

}  // namespace daug
