#include "beamlab/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace beamlab {
namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " +
                                  where);
    }
  }
}

template <typename T>
void get_if_present(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  const json root = json::parse(text);
  if (!root.is_object()) {
    throw std::invalid_argument("config: top level must be a JSON object");
  }
  require_keys(root, "config",
               {"seed", "samples", "conditions", "m_values", "scene", "array",
                "link", "channel", "dataset", "split", "train", "timing"});

  ExperimentConfig cfg;
  get_if_present(root, "seed", cfg.master_seed);
  get_if_present(root, "samples", cfg.sample_count);

  if (root.contains("conditions")) {
    cfg.conditions.clear();
    for (const auto& name : root.at("conditions")) {
      cfg.conditions.push_back(condition_from_string(name.get<std::string>()));
    }
  }
  if (root.contains("m_values")) {
    cfg.m_values = root.at("m_values").get<std::vector<int>>();
  }

  if (root.contains("scene")) {
    const json& scene = root.at("scene");
    require_keys(scene, "scene", {"half_side_m", "exclusion_radius_m"});
    get_if_present(scene, "half_side_m", cfg.half_side_m);
    get_if_present(scene, "exclusion_radius_m", cfg.exclusion_radius_m);
  }
  if (root.contains("array")) {
    const json& array = root.at("array");
    require_keys(array, "array",
                 {"elements_x", "elements_y", "element_spacing_wl",
                  "endfire_spacing_wl", "boresight_elevation_deg",
                  "backlobe_penalty_db", "mainlobe_clear_deg",
                  "table_resolution_deg"});
    get_if_present(array, "elements_x", cfg.array.elements_x);
    get_if_present(array, "elements_y", cfg.array.elements_y);
    get_if_present(array, "element_spacing_wl", cfg.array.element_spacing_wl);
    get_if_present(array, "endfire_spacing_wl", cfg.array.endfire_spacing_wl);
    get_if_present(array, "boresight_elevation_deg",
                   cfg.array.boresight_elevation_deg);
    get_if_present(array, "backlobe_penalty_db",
                   cfg.array.backlobe_penalty_db);
    get_if_present(array, "mainlobe_clear_deg", cfg.array.mainlobe_clear_deg);
    get_if_present(array, "table_resolution_deg",
                   cfg.array.table_resolution_deg);
  }
  if (root.contains("link")) {
    const json& link = root.at("link");
    require_keys(link, "link", {"tx_power_dbm", "rx_gain_dbi"});
    get_if_present(link, "tx_power_dbm", cfg.budget.tx_power_dbm);
    get_if_present(link, "rx_gain_dbi", cfg.budget.rx_gain_dbi);
  }
  if (root.contains("channel")) {
    const json& channel = root.at("channel");
    require_keys(channel, "channel",
                 {"carrier_hz", "ref_distance_m", "los_ple",
                  "los_shadow_sigma_db", "nlos_ple", "nlos_shadow_sigma_db"});
    get_if_present(channel, "carrier_hz", cfg.carrier_hz);
    get_if_present(channel, "ref_distance_m", cfg.ref_distance_m);
    get_if_present(channel, "los_ple", cfg.los_ple);
    get_if_present(channel, "los_shadow_sigma_db", cfg.los_shadow_sigma_db);
    get_if_present(channel, "nlos_ple", cfg.nlos_ple);
    get_if_present(channel, "nlos_shadow_sigma_db", cfg.nlos_shadow_sigma_db);
  }
  if (root.contains("dataset")) {
    const json& dataset = root.at("dataset");
    require_keys(dataset, "dataset", {"per_sample_normalization"});
    get_if_present(dataset, "per_sample_normalization",
                   cfg.per_sample_normalization);
  }
  if (root.contains("split")) {
    const json& split = root.at("split");
    require_keys(split, "split", {"train_frac", "val_frac", "test_frac"});
    get_if_present(split, "train_frac", cfg.split.train_frac);
    get_if_present(split, "val_frac", cfg.split.val_frac);
    get_if_present(split, "test_frac", cfg.split.test_frac);
  }
  if (root.contains("train")) {
    const json& train = root.at("train");
    require_keys(train, "train",
                 {"learning_rate", "batch_size", "epochs_by_m", "adam_beta1",
                  "adam_beta2", "adam_eps", "bn_momentum", "bn_epsilon",
                  "batchnorm_after_activation"});
    get_if_present(train, "learning_rate", cfg.train.learning_rate);
    get_if_present(train, "batch_size", cfg.train.batch_size);
    get_if_present(train, "adam_beta1", cfg.train.adam_beta1);
    get_if_present(train, "adam_beta2", cfg.train.adam_beta2);
    get_if_present(train, "adam_eps", cfg.train.adam_eps);
    get_if_present(train, "bn_momentum", cfg.train.bn_momentum);
    get_if_present(train, "bn_epsilon", cfg.train.bn_epsilon);
    get_if_present(train, "batchnorm_after_activation",
                   cfg.train.batchnorm_after_activation);
    if (train.contains("epochs_by_m")) {
      // Per-key override: sizes not mentioned keep their standard counts.
      for (const auto& [key, value] : train.at("epochs_by_m").items()) {
        cfg.train.epochs_by_m[std::stoi(key)] = value.get<int>();
      }
    }
  }
  if (root.contains("timing")) {
    const json& timing = root.at("timing");
    require_keys(timing, "timing",
                 {"slot_per_beam_ms", "comparator_count",
                  "comparator_period_us", "dnn_latency_us", "fpga_power_w"});
    get_if_present(timing, "slot_per_beam_ms", cfg.timing.slot_per_beam_ms);
    get_if_present(timing, "comparator_count", cfg.timing.comparator_count);
    get_if_present(timing, "comparator_period_us",
                   cfg.timing.comparator_period_us);
    get_if_present(timing, "dnn_latency_us", cfg.timing.dnn_latency_us);
    get_if_present(timing, "fpga_power_w", cfg.timing.fpga_power_w);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open " + path.string());
  }
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace beamlab
