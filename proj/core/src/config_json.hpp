#pragma once

// JSON mapping of the configuration structs. Private to the library.

#include <set>
#include <string>

#include "driveid/data/dataset.hpp"
#include "driveid/data/synthetic.hpp"
#include "driveid/encoder/encoder.hpp"
#include "driveid/eval/eval.hpp"
#include "driveid/gbdt/gbdt.hpp"
#include "driveid/error.hpp"
#include "driveid/training/training.hpp"
#include "json.hpp"

namespace driveid::detail {

using nlohmann::json;

/// Reads fields out of one JSON object, rejecting unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string context) : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) throw ConfigError(context_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(context_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.contains(item.key())) {
        throw ConfigError("unknown key '" + item.key() + "' in " + context_);
      }
    }
  }

 private:
  const json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

inline json to_json(const encoder::EncoderConfig& c) {
  return {{"in_channels", c.in_channels},
          {"kernel_size", c.kernel_size},
          {"levels", c.levels},
          {"hidden_channels", c.hidden_channels},
          {"tcn_embedding", c.tcn_embedding},
          {"wavelet_embedding_per_branch", c.wavelet_embedding_per_branch},
          {"dropout_p", c.dropout_p},
          {"window_length", c.window_length}};
}

inline void read_into(const json& j, encoder::EncoderConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("in_channels", c.in_channels);
  r.read("kernel_size", c.kernel_size);
  r.read("levels", c.levels);
  r.read("hidden_channels", c.hidden_channels);
  r.read("tcn_embedding", c.tcn_embedding);
  r.read("wavelet_embedding_per_branch", c.wavelet_embedding_per_branch);
  r.read("dropout_p", c.dropout_p);
  r.read("window_length", c.window_length);
  r.finish();
}

inline json to_json(const training::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"decay", c.decay},
          {"margin", c.margin},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"mode", training::to_string(c.mode)},
          {"mining", training::to_string(c.mining)},
          {"semi_hard_candidates", c.semi_hard_candidates},
          {"threads", c.threads}};
}

inline void read_into(const json& j, training::TrainConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("learning_rate", c.learning_rate);
  r.read("decay", c.decay);
  r.read("margin", c.margin);
  r.read("batch_size", c.batch_size);
  r.read("epochs", c.epochs);
  r.read("seed", c.seed);
  std::string mode = training::to_string(c.mode);
  std::string mining = training::to_string(c.mining);
  r.read("mode", mode);
  r.read("mining", mining);
  c.mode = training::parse_mode(mode);
  c.mining = training::parse_mining(mining);
  r.read("semi_hard_candidates", c.semi_hard_candidates);
  r.read("threads", c.threads);
  r.finish();
}

inline json to_json(const data::WindowingConfig& c) {
  return {{"interval_length_s", c.interval_length_s},
          {"interval_gap_s", c.interval_gap_s},
          {"sample_rate_hz", c.sample_rate_hz}};
}

inline void read_into(const json& j, data::WindowingConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("interval_length_s", c.interval_length_s);
  r.read("interval_gap_s", c.interval_gap_s);
  r.read("sample_rate_hz", c.sample_rate_hz);
  r.finish();
}

inline json to_json(const gbdt::GbdtConfig& c) {
  return {{"num_leaves", c.num_leaves},
          {"num_trees", c.num_trees},
          {"max_depth", c.max_depth},
          {"feature_fraction", c.feature_fraction},
          {"bagging_fraction", c.bagging_fraction},
          {"learning_rate", c.learning_rate},
          {"min_samples_leaf", c.min_samples_leaf},
          {"lambda_l2", c.lambda_l2},
          {"num_bins", c.num_bins},
          {"seed", c.seed}};
}

inline void read_into(const json& j, gbdt::GbdtConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("num_leaves", c.num_leaves);
  r.read("num_trees", c.num_trees);
  r.read("max_depth", c.max_depth);
  r.read("feature_fraction", c.feature_fraction);
  r.read("bagging_fraction", c.bagging_fraction);
  r.read("learning_rate", c.learning_rate);
  r.read("min_samples_leaf", c.min_samples_leaf);
  r.read("lambda_l2", c.lambda_l2);
  r.read("num_bins", c.num_bins);
  r.read("seed", c.seed);
  r.finish();
}

inline json to_json(const eval::EvalConfig& c) {
  return {{"group_sizes", c.group_sizes},
          {"sampling_cap", c.sampling_cap},
          {"nota_enabled", c.nota_enabled},
          {"nota_threshold", c.nota_threshold},
          {"nota_sweep", c.nota_sweep},
          {"seed", c.seed}};
}

inline void read_into(const json& j, eval::EvalConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("group_sizes", c.group_sizes);
  r.read("sampling_cap", c.sampling_cap);
  r.read("nota_enabled", c.nota_enabled);
  r.read("nota_threshold", c.nota_threshold);
  r.read("nota_sweep", c.nota_sweep);
  r.read("seed", c.seed);
  r.finish();
}

inline json to_json(const data::SyntheticConfig& c) {
  return {{"area_duration_s", c.area_duration_s},
          {"seed", c.seed},
          {"sensor_noise", c.sensor_noise}};
}

inline void read_into(const json& j, data::SyntheticConfig& c, const std::string& context) {
  ObjectReader r(j, context);
  r.read("area_duration_s", c.area_duration_s);
  r.read("seed", c.seed);
  r.read("sensor_noise", c.sensor_noise);
  r.finish();
}

}  // namespace driveid::detail
