#include "uqtab/runconfig.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace uqtab {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& want) {
  throw std::runtime_error("config key '" + key + "' must be " + want);
}

}  // namespace

nlohmann::ordered_json load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ordered_json config;
  try {
    config = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  if (!config.is_object()) {
    throw std::runtime_error("config file " + path +
                             " must hold a single JSON object");
  }
  for (const auto& [key, value] : config.items()) {
    if (value.is_object()) {
      throw std::runtime_error("config key '" + key +
                               "' must be a scalar or array (flat config)");
    }
    if (value.is_array()) {
      for (const auto& item : value) {
        if (item.is_object() || item.is_array()) {
          throw std::runtime_error("config key '" + key +
                                   "' must be an array of scalars");
        }
      }
    }
  }
  return config;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& config) {
  return ordered_json{{"command", config.command},
                      {"seed", config.seed},
                      {"jobs", config.jobs},
                      {"out_dir", config.out_dir},
                      {"timeseries", config.timeseries},
                      {"labels", config.labels},
                      {"features", config.features},
                      {"timeseries_b", config.timeseries_b},
                      {"labels_b", config.labels_b},
                      {"name_a", config.name_a},
                      {"name_b", config.name_b},
                      {"n_patients", config.n_patients},
                      {"n_variables", config.n_variables},
                      {"mortality_rate", config.mortality_rate},
                      {"label_sharpness", config.label_sharpness},
                      {"patient_sd", config.patient_sd},
                      {"noise_sd", config.noise_sd},
                      {"ar_coeff", config.ar_coeff},
                      {"min_obs", config.min_obs},
                      {"max_obs", config.max_obs},
                      {"groups_spec", config.groups_spec},
                      {"model", config.model},
                      {"models", config.models},
                      {"tuned", config.tuned},
                      {"budget", config.budget},
                      {"n_runs", config.n_runs},
                      {"factors", config.factors},
                      {"repeats", config.repeats},
                      {"groups", config.groups},
                      {"inputs", config.inputs}};
}

std::uint64_t config_u64(const nlohmann::ordered_json& config,
                         const std::string& key, std::uint64_t fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_number_unsigned() && !value.is_number_integer()) {
    bad_key(key, "an unsigned integer");
  }
  if (value.is_number_integer() && value.get<long long>() < 0) {
    bad_key(key, "an unsigned integer");
  }
  return value.get<std::uint64_t>();
}

int config_int(const nlohmann::ordered_json& config, const std::string& key,
               int fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_number_integer() && !value.is_number_unsigned()) {
    bad_key(key, "an integer");
  }
  return value.get<int>();
}

double config_double(const nlohmann::ordered_json& config,
                     const std::string& key, double fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_number()) bad_key(key, "a number");
  return value.get<double>();
}

std::string config_string(const nlohmann::ordered_json& config,
                          const std::string& key, std::string fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_string()) bad_key(key, "a string");
  return value.get<std::string>();
}

std::vector<double> config_double_list(const nlohmann::ordered_json& config,
                                       const std::string& key,
                                       std::vector<double> fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_array()) bad_key(key, "an array of numbers");
  std::vector<double> out;
  for (const auto& item : value) {
    if (!item.is_number()) bad_key(key, "an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<std::string> config_string_list(
    const nlohmann::ordered_json& config, const std::string& key,
    std::vector<std::string> fallback) {
  if (!config.contains(key)) return fallback;
  const auto& value = config.at(key);
  if (!value.is_array()) bad_key(key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) bad_key(key, "an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    if (!item.empty()) {
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        throw std::runtime_error("bad number in list: '" + item + "'");
      }
      out.push_back(v);
    }
    start = end + 1;
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* raw = std::getenv("UQTAB_SEED");
  if (raw == nullptr || *raw == '\0') return fallback;
  std::uint64_t value = 0;
  const char* end = raw;
  while (*end != '\0') ++end;
  const auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(
        "UQTAB_SEED must be an unsigned integer, got '" + std::string(raw) +
        "'");
  }
  return value;
}

}  // namespace uqtab
