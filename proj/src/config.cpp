#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pst/pipeline.hpp"

namespace pst {
namespace {

using nlohmann::json;

template <class T>
void read_key(const json& j, const char* key, T& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, std::filesystem::path& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::string>();
}

void read_optional_path(const json& j, const char* key, std::optional<std::filesystem::path>& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::string>();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "input", "reference", "input_mask", "reference_mask", "regions", "gamma", "tau", "stride", "scales",
      "lambda", "cnt_scale", "steps_inv", "steps_sample", "fixed_point_iters", "seed", "feather", "num_classes",
      "latent_downsample", "normalize_features", "train_steps", "beta_start", "beta_end", "out", "similarity_query"};
  return keys;
}

}  // namespace

TransferConfig merge_transfer_config(const TransferConfig& base, const std::string& json_text) {
  TransferConfig cfg = base;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw FormatError("transfer config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!known_keys().count(key)) throw FormatError("unknown config key '" + key + "'");
    }
    read_path(j, "input", cfg.input);
    read_path(j, "reference", cfg.reference);
    read_optional_path(j, "input_mask", cfg.input_mask);
    read_optional_path(j, "reference_mask", cfg.reference_mask);
    read_key(j, "regions", cfg.regions);
    read_key(j, "gamma", cfg.gamma);
    read_key(j, "tau", cfg.tau);
    read_key(j, "stride", cfg.stride);
    read_key(j, "scales", cfg.scales);
    read_key(j, "lambda", cfg.lambda);
    read_key(j, "cnt_scale", cfg.cnt_scale);
    read_key(j, "steps_inv", cfg.steps_inversion);
    read_key(j, "steps_sample", cfg.steps_sampling);
    read_key(j, "fixed_point_iters", cfg.fixed_point_iters);
    read_key(j, "seed", cfg.seed);
    read_key(j, "feather", cfg.feather);
    read_key(j, "num_classes", cfg.num_classes);
    read_key(j, "latent_downsample", cfg.latent_downsample);
    read_key(j, "normalize_features", cfg.normalize_features);
    read_key(j, "train_steps", cfg.train_steps);
    read_key(j, "beta_start", cfg.beta_start);
    read_key(j, "beta_end", cfg.beta_end);
    read_path(j, "out", cfg.out);
    read_optional(j, "similarity_query", cfg.similarity_query);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad transfer config: ") + e.what());
  }
  return cfg;
}

TransferConfig load_transfer_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return merge_transfer_config(TransferConfig{}, buffer.str());
}

std::string to_json_string(const TransferConfig& c) {
  json j = {{"input", c.input.string()},
            {"reference", c.reference.string()},
            {"input_mask", c.input_mask ? json(c.input_mask->string()) : json(nullptr)},
            {"reference_mask", c.reference_mask ? json(c.reference_mask->string()) : json(nullptr)},
            {"regions", c.regions},
            {"gamma", c.gamma},
            {"tau", c.tau},
            {"stride", c.stride},
            {"scales", c.scales},
            {"lambda", c.lambda},
            {"cnt_scale", c.cnt_scale},
            {"steps_inv", c.steps_inversion},
            {"steps_sample", c.steps_sampling},
            {"fixed_point_iters", c.fixed_point_iters},
            {"seed", c.seed},
            {"feather", c.feather},
            {"num_classes", c.num_classes},
            {"latent_downsample", c.latent_downsample},
            {"normalize_features", c.normalize_features},
            {"train_steps", c.train_steps},
            {"beta_start", c.beta_start},
            {"beta_end", c.beta_end},
            {"out", c.out.string()},
            {"similarity_query", c.similarity_query ? json(*c.similarity_query) : json(nullptr)}};
  return j.dump(2);
}

}  // namespace pst
