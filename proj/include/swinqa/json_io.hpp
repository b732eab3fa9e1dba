#pragma once

// JSON mapping for configuration structs. Readers fill missing keys from the
// struct defaults and reject keys they do not know.

#include <set>
#include <string>

#include "json.hpp"
#include "swinqa/augment.hpp"
#include "swinqa/data.hpp"
#include "swinqa/swin.hpp"

namespace swinqa {

using Json = nlohmann::json;

// Tracks which keys of an object were consumed.
class StrictReader {
 public:
  StrictReader(const Json& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(ctx_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(ctx_ + ": unknown key '" + k + "'");
    }
  }

  const std::string& context() const { return ctx_; }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

inline Json to_json(const SwinConfig& c) {
  return Json{{"name", c.name},         {"img_size", c.img_size},     {"patch_size", c.patch_size},
              {"in_channels", c.in_channels}, {"embed_dim", c.embed_dim}, {"depths", c.depths},
              {"heads", c.heads},       {"window", c.window},         {"mlp_ratio", c.mlp_ratio},
              {"drop_path_max", c.drop_path_max}, {"num_classes", c.num_classes}};
}

// A "preset" key selects tiny/small/base/micro defaults, then other keys override.
inline SwinConfig swin_config_from_json(const Json& j, const std::string& ctx = "model") {
  StrictReader r(j, ctx);
  SwinConfig c = SwinConfig::micro();
  std::string preset;
  r.get("preset", preset);
  std::size_t img = 0, window = 0;
  r.get("img_size", img);
  r.get("window", window);
  if (!preset.empty()) c = SwinConfig::by_name(preset, img ? img : (preset == "micro" ? 64 : 224), window ? window : (preset == "micro" ? 4 : 7));
  if (img) c.img_size = img;
  if (window) c.window = window;
  r.get("name", c.name);
  r.get("patch_size", c.patch_size);
  r.get("in_channels", c.in_channels);
  r.get("embed_dim", c.embed_dim);
  r.get("depths", c.depths);
  r.get("heads", c.heads);
  r.get("mlp_ratio", c.mlp_ratio);
  r.get("drop_path_max", c.drop_path_max);
  r.get("num_classes", c.num_classes);
  r.finish();
  c.validate();
  return c;
}

inline Json to_json(const AugConfig& a) {
  return Json{{"randaug", a.randaug},
              {"randaug_n", a.randaug_n},
              {"randaug_magnitude", a.randaug_magnitude},
              {"jitter", a.jitter},
              {"jitter_strength", a.jitter_strength},
              {"erasing", a.erasing},
              {"erase_prob", a.erase_prob},
              {"erase_scale", a.erase_scale},
              {"erase_aspect", a.erase_aspect},
              {"mixing", a.mixing},
              {"mixup_alpha", a.mixup_alpha},
              {"cutmix_alpha", a.cutmix_alpha},
              {"mix_switch_prob", a.mix_switch_prob},
              {"normalize_mean", a.normalize_mean},
              {"normalize_std", a.normalize_std},
              {"seed", a.seed}};
}

inline AugConfig aug_config_from_json(const Json& j, const std::string& ctx = "aug") {
  StrictReader r(j, ctx);
  AugConfig a;
  r.get("randaug", a.randaug);
  r.get("randaug_n", a.randaug_n);
  r.get("randaug_magnitude", a.randaug_magnitude);
  r.get("jitter", a.jitter);
  r.get("jitter_strength", a.jitter_strength);
  r.get("erasing", a.erasing);
  r.get("erase_prob", a.erase_prob);
  r.get("erase_scale", a.erase_scale);
  r.get("erase_aspect", a.erase_aspect);
  r.get("mixing", a.mixing);
  r.get("mixup_alpha", a.mixup_alpha);
  r.get("cutmix_alpha", a.cutmix_alpha);
  r.get("mix_switch_prob", a.mix_switch_prob);
  r.get("normalize_mean", a.normalize_mean);
  r.get("normalize_std", a.normalize_std);
  r.get("seed", a.seed);
  r.finish();
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return a;
}

inline Json to_json(const SynthSpec& s) {
  return Json{{"task", to_string(s.task)},
              {"size", s.size},
              {"object_count", s.object_count},
              {"object_radius", s.object_radius},
              {"background_blobs", s.background_blobs},
              {"background_level", s.background_level},
              {"background_cap", s.background_cap},
              {"object_intensity", s.object_intensity},
              {"noise_sigma", s.noise_sigma},
              {"blur", s.blur},
              {"contrast_reduction", s.contrast_reduction},
              {"seed", s.seed}};
}

inline SynthSpec synth_spec_from_json(const Json& j, const std::string& ctx = "synth") {
  StrictReader r(j, ctx);
  SynthSpec s;
  std::string task = to_string(s.task);
  r.get("task", task);
  try {
    s.task = parse_task(task);
  } catch (const DataError& e) {
    throw ConfigError(ctx + ".task: " + e.what());
  }
  r.get("size", s.size);
  r.get("object_count", s.object_count);
  r.get("object_radius", s.object_radius);
  r.get("background_blobs", s.background_blobs);
  r.get("background_level", s.background_level);
  r.get("background_cap", s.background_cap);
  r.get("object_intensity", s.object_intensity);
  r.get("noise_sigma", s.noise_sigma);
  r.get("blur", s.blur);
  r.get("contrast_reduction", s.contrast_reduction);
  r.get("seed", s.seed);
  r.finish();
  try {
    s.validate();
  } catch (const DataError& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return s;
}

}  // namespace swinqa
