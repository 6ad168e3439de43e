#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convdysat/evaluation.hpp"
#include "convdysat/graph.hpp"
#include "convdysat/model.hpp"
#include "convdysat/sampling.hpp"
#include "convdysat/training.hpp"

namespace convdysat {

/// Everything a run depends on. Serialised as flat JSON with dotted keys
/// ("model.temporal_heads", "train.learning_rate", ...); absent keys keep their defaults.
struct RunConfig {
  std::string dataset_path;
  int steps = 16;
  SnapshotMode mode = SnapshotMode::Cumulative;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  ModelConfig model;
  TrainConfig train;
  WalkConfig walk;
  EvalOptions eval;

  void validate() const;
};

std::string to_string(LossReduction reduction);
LossReduction parse_reduction(const std::string& text);

// Throws InputError on malformed JSON, unknown keys or wrongly typed values. A relative
// dataset path is resolved against `base_dir` when that is non-empty.
RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir = {});
RunConfig load_run_config(const std::string& path);

// Pretty-printed, keys sorted; parse_run_config(to_json(c)) == c field for field.
std::string to_json(const RunConfig& config);

/// FNV-1a over the settings that shape training (dataset steps/mode, model, train, walk).
/// Output location, evaluation settings and the dataset path are excluded.
std::uint64_t config_hash(const RunConfig& config);
std::string hash_string(std::uint64_t hash);

}  // namespace convdysat
