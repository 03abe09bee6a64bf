#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "d3g/model.hpp"
#include "d3g/optim.hpp"

namespace d3g {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  MultiHeadModel model;
  TrainConfig config;
  std::size_t epochs_completed = 0;
  std::optional<AdamState> optimizer;
};

/// Structured-text (JSON) container. Doubles are written in shortest
/// round-trip form, so save followed by load reproduces every bit.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

/// TrainConfig as a JSON object and back. Keys absent from the text keep
/// their value from `base`; unknown keys throw ConfigError.
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

/// Writes through a temporary file and rename.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace d3g
