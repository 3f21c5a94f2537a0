#include "vai/core/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vai {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string canonical_real(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void Config::define(const std::string& key, Kind kind, const std::string& def) {
  auto [it, inserted] = entries_.emplace(key, Entry{kind, def});
  (void)it;
  if (!inserted) throw ConfigError("config key defined twice: " + key);
  order_.push_back(key);
}

void Config::define_int(const std::string& key, long def) {
  define(key, Kind::Int, std::to_string(def));
}
void Config::define_real(const std::string& key, double def) {
  define(key, Kind::Real, canonical_real(def));
}
void Config::define_bool(const std::string& key, bool def) {
  define(key, Kind::Bool, def ? "true" : "false");
}
void Config::define_string(const std::string& key, const std::string& def) {
  define(key, Kind::String, def);
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const Config::Entry& Config::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
  std::string val = trim(value);
  Entry& e = it->second;
  char* end = nullptr;
  switch (e.kind) {
    case Kind::Int: {
      long x = std::strtol(val.c_str(), &end, 10);
      if (val.empty() || *end != '\0')
        throw ConfigError("config key " + key + ": expected integer, got '" + val + "'");
      e.value = std::to_string(x);
      break;
    }
    case Kind::Real: {
      double x = std::strtod(val.c_str(), &end);
      if (val.empty() || *end != '\0')
        throw ConfigError("config key " + key + ": expected real, got '" + val + "'");
      e.value = canonical_real(x);
      break;
    }
    case Kind::Bool: {
      if (val == "true" || val == "1")
        e.value = "true";
      else if (val == "false" || val == "0")
        e.value = "false";
      else
        throw ConfigError("config key " + key + ": expected bool, got '" + val + "'");
      break;
    }
    case Kind::String:
      e.value = val;
      break;
  }
}

long Config::get_int(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.kind != Kind::Int) throw ConfigError("config key " + key + " is not an integer");
  return std::strtol(e.value.c_str(), nullptr, 10);
}

double Config::get_real(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.kind == Kind::Int) return static_cast<double>(get_int(key));
  if (e.kind != Kind::Real) throw ConfigError("config key " + key + " is not a real");
  return std::strtod(e.value.c_str(), nullptr);
}

bool Config::get_bool(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.kind != Kind::Bool) throw ConfigError("config key " + key + " is not a bool");
  return e.value == "true";
}

const std::string& Config::get_string(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.kind != Kind::String) throw ConfigError("config key " + key + " is not a string");
  return e.value;
}

void Config::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  parse_text(ss.str(), path);
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& key : order_) {
    out += key;
    out += " = ";
    out += entries_.at(key).value;
    out += "\n";
  }
  return out;
}

Config Config::pipeline_defaults() {
  Config c;
  c.define_int("seed", 0);
  c.define_string("output_dir", "runs/default");

  c.define_int("dataset.count", 5000);

  c.define_string("environment.name", "spriteworld");
  c.define_string("environment.texture", "grid");
  c.define_int("environment.size", 84);
  c.define_int("environment.episode_len", 100);
  c.define_int("environment.action_repeat", 4);

  c.define_int("transporter.num_keypoints", 4);
  c.define_real("transporter.sigma", 0.1);
  c.define_int("transporter.grid", 21);
  c.define_int("transporter.feature_channels", 16);
  c.define_int("transporter.base_channels", 16);
  c.define_real("transporter.softmax_temperature", 1.0);
  c.define_int("transporter.steps", 2000);
  c.define_int("transporter.batch", 32);
  c.define_real("transporter.lr", 1e-3);
  c.define_real("transporter.cross_episode_prob", 0.5);

  c.define_real("attention.epsilon", -1.0);  // negative: calibrate from quantile
  c.define_real("attention.quantile", 0.90);
  c.define_int("attention.calibration_frames", 64);

  c.define_bool("augmentation.enabled", true);
  c.define_int("augmentation.crop", 84);
  c.define_int("augmentation.pad", 8);
  c.define_real("augmentation.fg_color_jitter", 0.2);
  c.define_real("augmentation.fg_brightness", 0.1);
  c.define_real("augmentation.w_train_background", 1.0);
  c.define_real("augmentation.w_random_color", 1.0);
  c.define_real("augmentation.w_fg_mean", 1.0);
  c.define_real("augmentation.bg_noise_std", 0.05);
  c.define_int("augmentation.mco_min_boxes", 2);
  c.define_int("augmentation.mco_max_boxes", 6);
  c.define_int("augmentation.mco_min_size", 6);
  c.define_int("augmentation.mco_max_size", 24);
  c.define_real("augmentation.p_dark_copy", 0.5);
  c.define_real("augmentation.dark_copy_scale", 0.3);
  c.define_real("augmentation.p_overlay", 0.0);
  c.define_string("augmentation.overlay_dir", "");
  c.define_real("augmentation.overlay_alpha", 0.5);

  c.define_int("adapter.steps", 2000);
  c.define_int("adapter.batch", 16);
  c.define_real("adapter.lr", 1e-3);
  c.define_real("adapter.lambda", 1.0);
  c.define_int("adapter.base_channels", 16);
  c.define_int("adapter.encoder_channels", 32);

  c.define_int("policy.steps", 8000);
  c.define_int("policy.start_steps", 300);
  c.define_int("policy.update_every", 2);
  c.define_int("policy.updates_per_step", 1);
  c.define_int("policy.batch", 128);
  c.define_int("policy.replay_capacity", 20000);
  c.define_real("policy.lr", 1e-3);
  c.define_real("policy.discount", 0.99);
  c.define_real("policy.tau", 0.01);
  c.define_real("policy.init_temperature", 0.1);
  c.define_int("policy.frame_stack", 3);
  c.define_int("policy.hidden", 128);
  c.define_int("policy.encoder_feature_dim", 64);
  c.define_bool("policy.use_adapter", true);
  c.define_bool("policy.weak_augment", true);
  c.define_real("policy.weak_noise_std", 0.01);
  c.define_int("policy.weak_mco_min_boxes", 0);
  c.define_int("policy.weak_mco_max_boxes", 2);
  c.define_int("policy.weak_mco_min_size", 2);
  c.define_int("policy.weak_mco_max_size", 8);

  c.define_int("evaluation.seeds", 10);
  c.define_int("evaluation.episodes", 100);
  c.define_string("evaluation.texture", "");
  c.define_real("evaluation.denoise_alpha", 0.0);
  c.define_real("evaluation.denoise_beta", 0.05);
  return c;
}

}  // namespace vai
