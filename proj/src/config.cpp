#include "hgp/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "hgp/error.hpp"

namespace hgp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Field number_field(T TrainConfig::*member) {
  return {[member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          }};
}

template <class T>
Field model_number_field(T ModelConfig::*member) {
  return {[member](const TrainConfig& c) { return std::to_string(c.model.*member); },
          [member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.model.*member = parse_number<T>(k, v);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"lr_peak", number_field(&TrainConfig::lr_peak)},
      {"warmup_frac", number_field(&TrainConfig::warmup_frac)},
      {"floor_frac", number_field(&TrainConfig::floor_frac)},
      {"adam_beta1", number_field(&TrainConfig::adam_beta1)},
      {"adam_beta2", number_field(&TrainConfig::adam_beta2)},
      {"adam_eps", number_field(&TrainConfig::adam_eps)},
      {"batch_size", number_field(&TrainConfig::batch_size)},
      {"epochs", number_field(&TrainConfig::epochs)},
      {"max_steps", number_field(&TrainConfig::max_steps)},
      {"schedule_steps", number_field(&TrainConfig::schedule_steps)},
      {"permutations", number_field(&TrainConfig::permutations)},
      {"seed", number_field(&TrainConfig::seed)},
      {"checkpoint_every", number_field(&TrainConfig::checkpoint_every)},
      {"input_h", model_number_field(&ModelConfig::input_h)},
      {"input_w", model_number_field(&ModelConfig::input_w)},
      {"patch_h", model_number_field(&ModelConfig::patch_h)},
      {"patch_w", model_number_field(&ModelConfig::patch_w)},
      {"d_model", model_number_field(&ModelConfig::d_model)},
      {"enc_layers", model_number_field(&ModelConfig::enc_layers)},
      {"enc_heads", model_number_field(&ModelConfig::enc_heads)},
      {"enc_ffn", model_number_field(&ModelConfig::enc_ffn)},
      {"knn_k", model_number_field(&ModelConfig::knn_k)},
      {"max_len", model_number_field(&ModelConfig::max_len)},
      {"dec_depth", model_number_field(&ModelConfig::dec_depth)},
      {"dec_heads", model_number_field(&ModelConfig::dec_heads)},
      {"dec_mlp", model_number_field(&ModelConfig::dec_mlp)},
      {"fusion",
       {[](const TrainConfig& c) { return to_string(c.model.fusion); },
        [](TrainConfig& c, const std::string&, const std::string& v) {
          c.model.fusion = parse_fusion_kind(v);
        }}},
      {"inject_layers",
       {[](const TrainConfig& c) { return c.model.inject_layers; },
        [](TrainConfig& c, const std::string&, const std::string& v) { c.model.inject_layers = v; }}},
      {"share_encoders",
       {[](const TrainConfig& c) { return std::string(c.model.share_encoders ? "true" : "false"); },
        [](TrainConfig& c, const std::string& k, const std::string& v) {
          c.model.share_encoders = parse_bool(k, v);
        }}},
      {"charset",
       {[](const TrainConfig& c) { return c.model.charset; },
        [](TrainConfig& c, const std::string&, const std::string& v) { c.model.charset = v; }}},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lr_peak > 0)) throw ConfigError("lr_peak must be positive");
  if (!(warmup_frac > 0 && warmup_frac < 1)) throw ConfigError("warmup_frac must lie in (0, 1)");
  if (!(floor_frac > 0 && floor_frac <= 1)) throw ConfigError("floor_frac must lie in (0, 1]");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (permutations == 0) throw ConfigError("permutations must be positive");
}

std::map<std::string, std::string> to_key_values(const TrainConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(cfg);
  return out;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : to_key_values(cfg)) out += key + " = " + value + "\n";
  return out;
}

TrainConfig config_from_text(const std::string& text, TrainConfig base) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_text(ss.str(), std::move(base));
}

}  // namespace hgp
