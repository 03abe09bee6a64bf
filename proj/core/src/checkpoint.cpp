#include "d3g/checkpoint.hpp"

#include <algorithm>

#include <json.hpp>

#include "csv.hpp"
#include "d3g/errors.hpp"

namespace d3g {

namespace {

using nlohmann::json;

json dense_to_json(const DenseParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"in", l.in_dim},
                      {"out", l.out_dim},
                      {"activation", std::string(to_string(l.activation))},
                      {"weight", l.weight},
                      {"bias", l.bias}});
  }
  return layers;
}

DenseParams dense_from_json(const json& j) {
  DenseParams p;
  for (const auto& l : j) {
    DenseLayer layer(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                     activation_from_string(l.at("activation").get<std::string>()));
    layer.weight = l.at("weight").get<std::vector<double>>();
    layer.bias = l.at("bias").get<std::vector<double>>();
    p.layers.push_back(std::move(layer));
  }
  return p;
}

json config_to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"hidden_width", c.hidden_width},
          {"relation_width", c.relation_width},
          {"relation_heads", c.relation_heads},
          {"eval_every", c.eval_every},
          {"select_on_valid", c.select_on_valid},
          {"domain_balanced_sampling", c.domain_balanced_sampling},
          {"combine", std::string(to_string(c.combine))},
          {"relation_mode", std::string(to_string(c.relation_mode))}};
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* const kKeys[] = {
      "lambda", "beta", "learning_rate", "weight_decay", "batch_size", "epochs", "seed",
      "hidden_width", "relation_width", "relation_heads", "eval_every", "select_on_valid",
      "domain_balanced_sampling", "combine", "relation_mode"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  try {
    read_key(j, "lambda", c.lambda);
    read_key(j, "beta", c.beta);
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "weight_decay", c.weight_decay);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "epochs", c.epochs);
    read_key(j, "seed", c.seed);
    read_key(j, "hidden_width", c.hidden_width);
    read_key(j, "relation_width", c.relation_width);
    read_key(j, "relation_heads", c.relation_heads);
    read_key(j, "eval_every", c.eval_every);
    read_key(j, "select_on_valid", c.select_on_valid);
    read_key(j, "domain_balanced_sampling", c.domain_balanced_sampling);
    if (auto it = j.find("combine"); it != j.end()) {
      c.combine = combine_space_from_string(it->get<std::string>());
    }
    if (auto it = j.find("relation_mode"); it != j.end()) {
      c.relation_mode = relation_mode_from_string(it->get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) {
  return config_to_json(config).dump(2);
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, std::move(base));
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  json heads = json::array();
  for (const auto& h : m.params.heads) heads.push_back(dense_to_json(h));
  json j = {{"format", "d3g-checkpoint"},
            {"version", kCheckpointVersion},
            {"kind", std::string(to_string(m.kind))},
            {"task", std::string(to_string(m.task))},
            {"input_dim", m.input_dim},
            {"meta_dim", m.meta_dim},
            {"output_dim", m.output_dim},
            {"head_domains", m.head_domains},
            {"head_meta", m.head_meta},
            {"extractor", dense_to_json(m.params.extractor)},
            {"heads", heads},
            {"relation",
             {{"encoder", dense_to_json(m.params.relation.encoder)},
              {"masks", m.params.relation.masks}}},
            {"config", config_to_json(ckpt.config)},
            {"epochs_completed", ckpt.epochs_completed}};
  if (ckpt.optimizer) {
    j["optimizer"] = {{"m", ckpt.optimizer->m},
                      {"v", ckpt.optimizer->v},
                      {"step", ckpt.optimizer->step}};
  }
  return j.dump(1);
}

Checkpoint checkpoint_from_string(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "d3g-checkpoint") throw DataError("not a d3g checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    auto& m = c.model;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.task = task_from_string(j.at("task").get<std::string>());
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.meta_dim = j.at("meta_dim").get<std::size_t>();
    m.output_dim = j.at("output_dim").get<std::size_t>();
    m.head_domains = j.at("head_domains").get<std::vector<DomainId>>();
    m.head_meta = j.at("head_meta").get<std::vector<std::vector<double>>>();
    m.params.extractor = dense_from_json(j.at("extractor"));
    for (const auto& h : j.at("heads")) m.params.heads.push_back(dense_from_json(h));
    m.params.relation.encoder = dense_from_json(j.at("relation").at("encoder"));
    m.params.relation.masks = j.at("relation").at("masks").get<std::vector<std::vector<double>>>();
    c.config = config_from_json(j.at("config"), {});
    c.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    if (auto it = j.find("optimizer"); it != j.end()) {
      AdamState s;
      s.m = it->at("m").get<std::vector<std::vector<double>>>();
      s.v = it->at("v").get<std::vector<std::vector<double>>>();
      s.step = it->at("step").get<std::int64_t>();
      c.optimizer = std::move(s);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    c.model.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  detail::write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_string(detail::read_file(path));
}

}  // namespace d3g
