#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "earl/common.hpp"
#include "earl/encoder.hpp"
#include "earl/features.hpp"
#include "json.hpp"

namespace earl {

// Training hyperparameters. Defaults follow the published settings where one
// exists (lr, batch, negatives, k, reserved fraction, layers, margin).
struct TrainConfig {
  std::size_t dim = 150;  // complex dimension
  std::size_t k = 10;
  double reserved_fraction = 0.10;
  std::size_t reserved_count = 0;  // > 0 overrides reserved_fraction
  std::optional<std::uint64_t> index_seed;  // reserved-set seed; defaults to the dataset's
  std::size_t layers = 2;
  double learning_rate = 0.001;
  std::size_t batch_size = 1024;
  std::size_t n_negatives = 256;
  double gamma = 10.0;
  double alpha = 1.0;
  bool alpha_is_default = true;
  std::size_t max_steps = 100000;
  std::uint64_t seed = 0;
  AblationFlags flags;
  std::size_t max_neighbors = 0;  // 0 = full neighbourhoods
  std::size_t checkpoint_every = 0;
  std::size_t eval_every = 0;
  std::size_t log_every = 1;

  void validate() const {
    flags.validate();
    if (dim == 0) throw ConfigError("dim must be positive");
    if (k == 0) throw ConfigError("k must be at least 1");
    if (layers == 0 && flags.use_mulhop) throw ConfigError("layers must be positive unless MulHop is disabled");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (n_negatives == 0) throw ConfigError("need at least one negative sample");
    if (!(gamma > 0.0)) throw ConfigError("margin gamma must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (reserved_count == 0 && !(reserved_fraction > 0.0 && reserved_fraction <= 1.0)) {
      throw ConfigError("reserved fraction must lie in (0, 1]");
    }
  }

  std::size_t resolved_reserved_count(std::size_t num_entities) const {
    return reserved_count > 0 ? reserved_count : reserved_count_for(num_entities, reserved_fraction);
  }

  ModelConfig model_config(std::size_t num_relations, std::size_t num_reserved) const {
    ModelConfig m;
    m.dim = dim;
    m.num_relations = num_relations;
    m.num_reserved = flags.use_reserved ? num_reserved : 0;
    m.layers = layers;
    m.flags = flags;
    m.seed = seed;
    return m;
  }
};

inline nlohmann::json to_json(const AblationFlags& f) {
  return {{"use_reserved", f.use_reserved},
          {"use_conrel", f.use_conrel},
          {"use_knresent", f.use_knresent},
          {"use_mulhop", f.use_mulhop}};
}

inline AblationFlags flags_from_json(const nlohmann::json& j) {
  AblationFlags f;
  f.use_reserved = j.value("use_reserved", true);
  f.use_conrel = j.value("use_conrel", true);
  f.use_knresent = j.value("use_knresent", true);
  f.use_mulhop = j.value("use_mulhop", true);
  return f;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"dim", c.dim},
                   {"k", c.k},
                   {"reserved_fraction", c.reserved_fraction},
                   {"reserved_count", c.reserved_count},
                   {"layers", c.layers},
                   {"learning_rate", c.learning_rate},
                   {"batch_size", c.batch_size},
                   {"n_negatives", c.n_negatives},
                   {"gamma", c.gamma},
                   {"alpha", c.alpha},
                   {"alpha_is_default", c.alpha_is_default},
                   {"max_steps", c.max_steps},
                   {"seed", c.seed},
                   {"flags", to_json(c.flags)},
                   {"max_neighbors", c.max_neighbors},
                   {"checkpoint_every", c.checkpoint_every},
                   {"eval_every", c.eval_every},
                   {"log_every", c.log_every}};
  j["index_seed"] = c.index_seed ? nlohmann::json(*c.index_seed) : nlohmann::json(nullptr);
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.dim = j.value("dim", c.dim);
  c.k = j.value("k", c.k);
  c.reserved_fraction = j.value("reserved_fraction", c.reserved_fraction);
  c.reserved_count = j.value("reserved_count", c.reserved_count);
  if (j.contains("index_seed") && !j["index_seed"].is_null()) c.index_seed = j["index_seed"].get<std::uint64_t>();
  c.layers = j.value("layers", c.layers);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.n_negatives = j.value("n_negatives", c.n_negatives);
  c.gamma = j.value("gamma", c.gamma);
  c.alpha = j.value("alpha", c.alpha);
  c.alpha_is_default = j.value("alpha_is_default", c.alpha_is_default);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("flags")) c.flags = flags_from_json(j["flags"]);
  c.max_neighbors = j.value("max_neighbors", c.max_neighbors);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

}  // namespace earl
