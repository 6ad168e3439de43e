#include "convdysat/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "convdysat/error.hpp"

namespace convdysat {
namespace {

using nlohmann::json;

enum class Scope { Training, Other };

// Calls f(key, field, scope) for every serialised field.
template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("dataset.path", c.dataset_path, Scope::Other);
  f("dataset.steps", c.steps, Scope::Training);
  f("dataset.mode", c.mode, Scope::Training);
  f("output.dir", c.output_dir, Scope::Other);
  f("eval.seeds", c.seeds, Scope::Other);
  f("eval.l2", c.eval.l2, Scope::Other);
  f("eval.iterations", c.eval.iterations, Scope::Other);
  f("eval.validation_fraction", c.eval.split.validation_fraction, Scope::Other);
  f("eval.train_fraction", c.eval.split.train_fraction, Scope::Other);

  f("model.structural_dims", c.model.structural_dims, Scope::Training);
  f("model.structural_heads", c.model.structural_heads, Scope::Training);
  f("model.temporal_dim", c.model.temporal_dim, Scope::Training);
  f("model.temporal_heads", c.model.temporal_heads, Scope::Training);
  f("model.qk_kernel", c.model.qk_kernel, Scope::Training);
  f("model.negative_weight", c.model.negative_weight, Scope::Training);
  f("model.negatives_per_positive", c.model.negatives_per_positive, Scope::Training);
  f("model.attention_slope", c.model.attention_slope, Scope::Training);
  f("model.scale_by_full_dim", c.model.scale_by_full_dim, Scope::Training);
  f("model.reduction", c.model.reduction, Scope::Training);
  f("model.latest_only", c.model.latest_only, Scope::Training);

  f("train.epochs_per_step", c.train.epochs_per_step, Scope::Training);
  f("train.batch_size", c.train.batch_size, Scope::Training);
  f("train.learning_rate", c.train.learning_rate, Scope::Training);
  f("train.beta1", c.train.beta1, Scope::Training);
  f("train.beta2", c.train.beta2, Scope::Training);
  f("train.epsilon", c.train.epsilon, Scope::Training);
  f("train.weight_decay", c.train.weight_decay, Scope::Training);
  f("train.gradient_clip_norm", c.train.gradient_clip_norm, Scope::Training);
  f("train.seed", c.train.seed, Scope::Training);
  f("train.first_step", c.train.first_step, Scope::Training);
  f("train.warm_start", c.train.warm_start, Scope::Training);
  f("train.resample_every_epoch", c.train.resample_every_epoch, Scope::Training);

  f("walk.walks_per_node", c.walk.walks_per_node, Scope::Training);
  f("walk.walk_length", c.walk.walk_length, Scope::Training);
  f("walk.window", c.walk.window, Scope::Training);
  f("walk.seed", c.walk.seed, Scope::Training);
  f("walk.max_contexts_per_node", c.walk.max_contexts_per_node, Scope::Training);
}

template <typename T>
json encode(const T& value) {
  if constexpr (std::is_same_v<T, SnapshotMode> || std::is_same_v<T, LossReduction>) {
    return to_string(value);
  } else {
    return value;
  }
}

template <typename T>
void decode(const std::string& key, const json& j, T& out) {
  try {
    if constexpr (std::is_same_v<T, SnapshotMode>) {
      out = parse_snapshot_mode(j.get<std::string>());
    } else if constexpr (std::is_same_v<T, LossReduction>) {
      out = parse_reduction(j.get<std::string>());
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw InputError("expected true or false");
      out = j.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw InputError("expected an integer");
      if (std::is_unsigned_v<T> && j.is_number_integer() && !j.is_number_unsigned()) {
        throw InputError("expected a non-negative integer");
      }
      out = j.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw InputError("expected a number");
      out = j.get<T>();
    } else {
      out = j.get<T>();
    }
  } catch (const json::exception& e) {
    throw InputError("config key '" + key + "': " + e.what());
  } catch (const InputError& e) {
    throw InputError("config key '" + key + "': " + e.what());
  }
}

json to_json_object(const RunConfig& c, bool training_only) {
  json j = json::object();
  visit_fields(c, [&](const char* key, const auto& field, Scope scope) {
    if (!training_only || scope == Scope::Training) j[key] = encode(field);
  });
  return j;
}

}  // namespace

std::string to_string(LossReduction reduction) { return reduction == LossReduction::Mean ? "mean" : "sum"; }

LossReduction parse_reduction(const std::string& text) {
  if (text == "mean") return LossReduction::Mean;
  if (text == "sum") return LossReduction::Sum;
  throw InputError("unknown loss reduction '" + text + "' (expected mean or sum)");
}

void RunConfig::validate() const {
  if (dataset_path.empty()) throw InputError("config: dataset.path is required");
  if (steps < 2) throw InputError("config: dataset.steps must be at least 2");
  if (seeds.empty()) throw InputError("config: eval.seeds must not be empty");
  if (eval.iterations < 1 || eval.l2 < 0.0) throw InputError("config: eval.iterations >= 1 and eval.l2 >= 0 required");
  if (eval.split.validation_fraction < 0.0 || eval.split.validation_fraction >= 1.0 || eval.split.train_fraction <= 0.0 ||
      eval.split.train_fraction >= 1.0) {
    throw InputError("config: eval fractions must lie in [0, 1) and (0, 1)");
  }
  model.validate();
  train.validate();
  walk.validate();
}

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: top level must be a JSON object");

  RunConfig c;
  std::set<std::string> known;
  visit_fields(c, [&](const char* key, auto& field, Scope) {
    known.insert(key);
    if (auto it = j.find(key); it != j.end()) decode(key, *it, field);
  });
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputError("config: unknown key '" + key + "'");
  }
  if (!base_dir.empty() && !c.dataset_path.empty() && std::filesystem::path(c.dataset_path).is_relative()) {
    c.dataset_path = (std::filesystem::path(base_dir) / c.dataset_path).lexically_normal().string();
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), std::filesystem::path(path).parent_path().string());
}

std::string to_json(const RunConfig& config) { return to_json_object(config, false).dump(2) + "\n"; }

std::uint64_t config_hash(const RunConfig& config) {
  const std::string text = to_json_object(config, true).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_string(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace convdysat
