#pragma once

// Run configuration read from `key = value` text. Unknown keys are errors.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hintseg/attention_regulator.hpp"
#include "hintseg/hint_area_generator.hpp"
#include "hintseg/losses.hpp"
#include "hintseg/pyramid_encoder.hpp"
#include "hintseg/representation_optimizer.hpp"

namespace hintseg {

class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SupervisionMode { Hint, Square, Point, Scribble };

inline const char* to_string(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::Hint: return "hint";
    case SupervisionMode::Square: return "square";
    case SupervisionMode::Point: return "point";
    case SupervisionMode::Scribble: return "scribble";
  }
  return "?";
}

inline SupervisionMode parse_supervision_mode(const std::string& s) {
  if (s == "hint") return SupervisionMode::Hint;
  if (s == "square") return SupervisionMode::Square;
  if (s == "point") return SupervisionMode::Point;
  if (s == "scribble") return SupervisionMode::Scribble;
  throw config_error("unknown supervision.mode " + s);
}

struct OptimizerConfig {
  double lr_max = 0.02;
  double lr_floor = 0.1;  // schedule starts and ends at lr_floor * lr_max
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct ContrastiveConfig {
  bool enabled = true;
  ContrastiveKind loss = ContrastiveKind::L1;
  bool stopgrad = true;
  bool predictor = true;
  bool normalize_mean = true;
  int border = 4;
};

struct RunConfig {
  HintConfig hint;
  RegulatorConfig regulator;
  AugmentationSet aug = AugmentationSet::parse("flip,color_jitter");
  ContrastiveConfig contrastive;
  Reduction pce_reduction = Reduction::Mean;
  OptimizerConfig optimizer;
  EncoderConfig encoder;
  SupervisionMode supervision = SupervisionMode::Hint;
  int batch_size = 2;
  int epochs = 60;
  int input_size = 64;
  std::uint64_t seed = 0;
  bool epochs_total_includes_warmup = true;

  int warmup_epochs() const { return hint.w; }
  int total_epochs() const { return epochs_total_includes_warmup ? epochs : epochs + hint.w; }
  /// Square side used before (and, for square/point modes, after) the hint stage.
  int square_side() const { return supervision == SupervisionMode::Point ? 1 : hint.d; }

  void validate() const {
    hint.validate();
    regulator.validate();
    encoder.validate();
    if (epochs_total_includes_warmup && epochs <= hint.w)
      throw config_error("epochs (" + std::to_string(epochs) + ") must exceed hint.w (" + std::to_string(hint.w) + ")");
    if (epochs < 1) throw config_error("epochs must be >= 1");
    if (input_size <= 0 || input_size % 32 != 0) throw config_error("input_size must be a positive multiple of 32");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (!(optimizer.lr_max > 0.0)) throw config_error("optimizer.lr_max must be positive");
    if (!(optimizer.lr_floor >= 0.0 && optimizer.lr_floor < 1.0)) throw config_error("optimizer.lr_floor must lie in [0,1)");
    if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) throw config_error("optimizer.momentum must lie in [0,1)");
    if (!(optimizer.weight_decay >= 0.0)) throw config_error("optimizer.weight_decay must be >= 0");
    if (contrastive.border < 0) throw config_error("contrastive.border must be >= 0");
  }

  /// Applies one `key = value` assignment.
  void set(const std::string& key, const std::string& value);

  /// Every key with its current value, one `key = value` line each.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

namespace config_detail {

inline std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  const auto e = s.find_last_not_of(" \t\r");
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

inline bool parse_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw config_error(k + ": expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error(k + ": expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw config_error(k + ": expected an integer, got '" + v + "'");
  }
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline const char* onoff(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = [] {
    std::vector<std::pair<std::string, Field>> v;
    auto num = [&v](const std::string& key, auto member) {
      v.push_back({key,
                   {[member](RunConfig& c, const std::string& k, const std::string& s) { member(c) = parse_double(k, s); },
                    [member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); }}});
    };
    auto integer = [&v](const std::string& key, auto member) {
      v.push_back({key,
                   {[member](RunConfig& c, const std::string& k, const std::string& s) {
                      member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_int(k, s));
                    },
                    [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }}});
    };
    auto flag = [&v](const std::string& key, auto member) {
      v.push_back({key,
                   {[member](RunConfig& c, const std::string& k, const std::string& s) { member(c) = parse_bool(k, s); },
                    [member](const RunConfig& c) { return std::string(onoff(member(const_cast<RunConfig&>(c)))); }}});
    };
    auto text = [&v](const std::string& key, auto setter, auto getter) { v.push_back({key, {setter, getter}}); };

    integer("hint.d", [](RunConfig& c) -> int& { return c.hint.d; });
    num("hint.tau", [](RunConfig& c) -> double& { return c.hint.tau; });
    num("hint.alpha", [](RunConfig& c) -> double& { return c.hint.alpha; });
    integer("hint.w", [](RunConfig& c) -> int& { return c.hint.w; });
    text("hint.threshold_mode",
         [](RunConfig& c, const std::string&, const std::string& s) {
           if (s == "fixed") c.hint.threshold_mode = ThresholdMode::Fixed;
           else if (s == "cluster2") c.hint.threshold_mode = ThresholdMode::Cluster2;
           else throw config_error("hint.threshold_mode must be fixed or cluster2");
         },
         [](const RunConfig& c) { return std::string(c.hint.threshold_mode == ThresholdMode::Fixed ? "fixed" : "cluster2"); });
    num("hint.tau_scale", [](RunConfig& c) -> double& { return c.hint.tau_scale; });

    flag("regulator.enabled", [](RunConfig& c) -> bool& { return c.regulator.enabled; });
    num("regulator.mask_ratio", [](RunConfig& c) -> double& { return c.regulator.mask_ratio; });
    text("regulator.type",
         [](RunConfig& c, const std::string&, const std::string& s) { c.regulator.type = parse_regulator_type(s); },
         [](const RunConfig& c) { return std::string(to_string(c.regulator.type)); });
    integer("regulator.has_grid", [](RunConfig& c) -> int& { return c.regulator.has_grid; });
    num("regulator.cutout_frac", [](RunConfig& c) -> double& { return c.regulator.cutout_frac; });

    text("aug.set", [](RunConfig& c, const std::string&, const std::string& s) { c.aug = AugmentationSet::parse(s); },
         [](const RunConfig& c) { return c.aug.to_string(); });

    flag("contrastive.enabled", [](RunConfig& c) -> bool& { return c.contrastive.enabled; });
    text("contrastive.loss",
         [](RunConfig& c, const std::string&, const std::string& s) { c.contrastive.loss = parse_contrastive_kind(s); },
         [](const RunConfig& c) { return std::string(to_string(c.contrastive.loss)); });
    flag("contrastive.stopgrad", [](RunConfig& c) -> bool& { return c.contrastive.stopgrad; });
    flag("contrastive.predictor", [](RunConfig& c) -> bool& { return c.contrastive.predictor; });
    text("contrastive.normalize",
         [](RunConfig& c, const std::string&, const std::string& s) {
           if (s != "mean" && s != "sum") throw config_error("contrastive.normalize must be mean or sum");
           c.contrastive.normalize_mean = s == "mean";
         },
         [](const RunConfig& c) { return std::string(c.contrastive.normalize_mean ? "mean" : "sum"); });
    integer("contrastive.border", [](RunConfig& c) -> int& { return c.contrastive.border; });

    text("pce.reduction",
         [](RunConfig& c, const std::string&, const std::string& s) {
           if (s != "mean" && s != "sum") throw config_error("pce.reduction must be mean or sum");
           c.pce_reduction = s == "mean" ? Reduction::Mean : Reduction::Sum;
         },
         [](const RunConfig& c) { return std::string(c.pce_reduction == Reduction::Mean ? "mean" : "sum"); });

    num("optimizer.lr_max", [](RunConfig& c) -> double& { return c.optimizer.lr_max; });
    num("optimizer.lr_floor", [](RunConfig& c) -> double& { return c.optimizer.lr_floor; });
    num("optimizer.momentum", [](RunConfig& c) -> double& { return c.optimizer.momentum; });
    num("optimizer.weight_decay", [](RunConfig& c) -> double& { return c.optimizer.weight_decay; });

    text("encoder.stage_channels",
         [](RunConfig& c, const std::string& k, const std::string& s) {
           std::istringstream is(s);
           std::string tok;
           for (int l = 0; l < kPyramidLevels; ++l) {
             if (!std::getline(is, tok, ',')) throw config_error(k + ": expected four comma-separated integers");
             c.encoder.stage_channels[l] = static_cast<int>(parse_int(k, trim(tok)));
           }
           if (std::getline(is, tok, ',')) throw config_error(k + ": expected four comma-separated integers");
         },
         [](const RunConfig& c) {
           const auto& s = c.encoder.stage_channels;
           return std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + "," + std::to_string(s[3]);
         });
    integer("encoder.reduced_channels", [](RunConfig& c) -> int& { return c.encoder.reduced_channels; });
    integer("encoder.base_width", [](RunConfig& c) -> int& { return c.encoder.base_width; });
    text("encoder.predictor_init",
         [](RunConfig& c, const std::string&, const std::string& s) { c.encoder.predictor_init = s; },
         [](const RunConfig& c) { return c.encoder.predictor_init; });
    num("encoder.predictor_init_noise", [](RunConfig& c) -> double& { return c.encoder.predictor_init_noise; });

    text("supervision.mode",
         [](RunConfig& c, const std::string&, const std::string& s) { c.supervision = parse_supervision_mode(s); },
         [](const RunConfig& c) { return std::string(to_string(c.supervision)); });

    integer("batch_size", [](RunConfig& c) -> int& { return c.batch_size; });
    integer("epochs", [](RunConfig& c) -> int& { return c.epochs; });
    integer("input_size", [](RunConfig& c) -> int& { return c.input_size; });
    text("seed",
         [](RunConfig& c, const std::string& k, const std::string& s) {
           const long long v = parse_int(k, s);
           if (v < 0) throw config_error("seed must be non-negative");
           c.seed = static_cast<std::uint64_t>(v);
         },
         [](const RunConfig& c) { return std::to_string(c.seed); });
    flag("epochs_total_includes_warmup", [](RunConfig& c) -> bool& { return c.epochs_total_includes_warmup; });
    return v;
  }();
  return f;
}

}  // namespace config_detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [k, f] : config_detail::fields())
    if (k == key) {
      f.set(*this, key, config_detail::trim(value));
      if (key == "seed") encoder.seed = regulator.seed = seed;
      return;
    }
  throw config_error("unknown config key '" + key + "'");
}

inline std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : config_detail::fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

inline std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : config_detail::fields()) out.push_back(k);
  return out;
}

/// Parses `key = value` lines; `#` starts a comment. Later lines win.
inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error("config line " + std::to_string(lineno) + ": missing '='");
    cfg.set(config_detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str());
  return cfg;
}

}  // namespace hintseg
