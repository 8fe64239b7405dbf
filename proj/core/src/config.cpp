#include "blastmamba/config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "blastmamba/error.hpp"

namespace bm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

bool is_model_key(const std::string& k) {
  return k == "height" || k == "width" || k == "channels" || k == "blocks" || k == "state_dim" ||
         k == "expand_ratio" || k == "residual";
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kGenerate: return "generate";
    case Stage::kPretrain: return "pretrain";
    case Stage::kFinetune: return "finetune";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kPredict: return "predict";
  }
  return "generate";
}

Stage parse_stage(const std::string& s) {
  for (auto st : {Stage::kGenerate, Stage::kPretrain, Stage::kFinetune, Stage::kEvaluate, Stage::kPredict}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown stage '" + s + "'");
}

double RunConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return stage == Stage::kPretrain ? kPretrainLearningRate : kFinetuneLearningRate;
}

SceneOptions RunConfig::scene_options() const {
  SceneOptions o;
  o.profile = profile;
  o.height = model.height;
  o.width = model.width;
  o.n_buildings = n_buildings;
  o.label_noise = label_noise;
  return o;
}

void RunConfig::validate() const {
  if (!(effective_learning_rate() > 0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be nonnegative");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (n_scenes == 0) throw ConfigError("n_scenes must be at least 1");
  scene_options().validate();
  model.validate();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void set_config_value(RunConfig& c, const std::string& k, const std::string& v) {
  if (k == "out_dir") c.out_dir = v;
  else if (k == "data_dir") c.data_dir = v;
  else if (k == "checkpoint_in") c.checkpoint_in = v;
  else if (k == "learning_rate") c.learning_rate = parse_number<double>(k, v);
  else if (k == "weight_decay") c.weight_decay = parse_number<double>(k, v);
  else if (k == "steps") c.steps = parse_number<std::size_t>(k, v);
  else if (k == "batch_size") c.batch_size = parse_number<std::size_t>(k, v);
  else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
  else if (k == "blast_mode") c.blast_mode = parse_blast_mode(v);
  else if (k == "n_scenes") c.n_scenes = parse_number<std::size_t>(k, v);
  else if (k == "profile") c.profile = parse_profile(v);
  else if (k == "n_buildings") c.n_buildings = parse_number<std::size_t>(k, v);
  else if (k == "label_noise") c.label_noise = parse_number<double>(k, v);
  else if (k == "from_scratch") c.from_scratch = parse_bool(k, v);
  else if (k == "oracle") c.oracle = parse_bool(k, v);
  else if (k == "split") c.split = v;
  else if (k == "pre_image") c.pre_image = v;
  else if (k == "post_image") c.post_image = v;
  else if (k == "blast_map") c.blast_map = v;
  else if (is_model_key(k)) {
    auto text = c.model.serialize() + k + "=" + v + "\n";
    c.model = ModelConfig::parse(text);
  } else {
    throw ConfigError("unknown config key '" + k + "'");
  }
}

void apply_config_text(RunConfig& c, const std::string& text) {
  for (const auto& [k, v] : parse_key_values(text)) set_config_value(c, k, v);
}

void apply_seed_env(RunConfig& c) {
  if (const char* s = std::getenv("BM_SEED"); s != nullptr && *s != '\0') set_config_value(c, "seed", s);
}

}  // namespace bm
