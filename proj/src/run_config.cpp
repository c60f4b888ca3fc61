#include "semi3/run_config.hpp"

#include "semi3/errors.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace semi3 {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(out);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(trim(part));
  return out;
}

std::vector<Stage> to_stages(const std::string& key, const std::string& v) {
  std::vector<Stage> stages;
  for (const std::string& part : split(v, ',')) {
    const auto x = part.find('x');
    if (x == std::string::npos) throw ConfigError(key + ": stage '" + part + "' is not <convs>x<channels>");
    stages.push_back({to_size(key, part.substr(0, x)), to_size(key, part.substr(x + 1))});
  }
  return stages;
}

std::string from_stages(const std::vector<Stage>& stages) {
  std::string out;
  for (const Stage& s : stages) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.convs) + "x" + std::to_string(s.channels);
  }
  return out;
}

std::vector<std::size_t> to_dims(const std::string& key, const std::string& v) {
  std::vector<std::size_t> dims;
  if (v == "none" || v.empty()) return dims;
  for (const std::string& part : split(v, ',')) dims.push_back(to_size(key, part));
  return dims;
}

std::string from_dims(const std::vector<std::size_t>& dims) {
  if (dims.empty()) return "none";
  std::string out;
  for (std::size_t d : dims) {
    if (!out.empty()) out += ',';
    out += std::to_string(d);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"num_categories", [](RunConfig& c, auto& k, auto& v) { c.data.num_categories = to_size(k, v); }},
      {"per_category", [](RunConfig& c, auto& k, auto& v) { c.data.per_category = to_size(k, v); }},
      {"image_size", [](RunConfig& c, auto& k, auto& v) { c.data.image_size = to_size(k, v); }},
      {"noise_level", [](RunConfig& c, auto& k, auto& v) { c.data.noise_level = to_double(k, v); }},
      {"jitter_level", [](RunConfig& c, auto& k, auto& v) { c.data.jitter_level = to_double(k, v); }},
      {"data_seed", [](RunConfig& c, auto& k, auto& v) { c.data.seed = to_size(k, v); }},
      {"in_channels", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.in_channels = to_size(k, v); }},
      {"input_size", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.input_size = to_size(k, v); }},
      {"stages", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.stages = to_stages(k, v); }},
      {"fc_dims", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.fc_dims = to_dims(k, v); }},
      {"embed_dim", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.embed_dim = to_size(k, v); }},
      {"num_classes", [](RunConfig& c, auto& k, auto& v) { c.model.backbone.num_classes = to_size(k, v); }},
      {"reduction", [](RunConfig& c, auto& k, auto& v) { c.model.reduction = to_size(k, v); }},
      {"share_plan", [](RunConfig& c, auto&, auto& v) { c.model.share = parse_share_strategy(v); }},
      {"use_co_attention", [](RunConfig& c, auto& k, auto& v) { c.model.use_co_attention = to_bool(k, v); }},
      {"alpha", [](RunConfig& c, auto& k, auto& v) { c.model.weights.alpha = to_double(k, v); }},
      {"beta", [](RunConfig& c, auto& k, auto& v) { c.model.weights.beta = to_double(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.model.weights.gamma = to_double(k, v); }},
      {"m1", [](RunConfig& c, auto& k, auto& v) { c.model.weights.m1 = to_double(k, v); }},
      {"m2", [](RunConfig& c, auto& k, auto& v) { c.model.weights.m2 = to_double(k, v); }},
      {"seed",
       [](RunConfig& c, auto& k, auto& v) {
         c.model.seed = to_size(k, v);
         c.train.seed = c.model.seed;
       }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = to_double(k, v); }},
      {"pretrain_lr", [](RunConfig& c, auto& k, auto& v) { c.train.pretrain_lr = to_double(k, v); }},
      {"momentum", [](RunConfig& c, auto& k, auto& v) { c.train.momentum = to_double(k, v); }},
      {"weight_decay", [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = to_double(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = to_size(k, v); }},
      {"pretrain_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.pretrain_epochs = to_size(k, v); }},
      {"joint_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.joint_epochs = to_size(k, v); }},
      {"log_path", [](RunConfig& c, auto&, auto& v) { c.train.log_path = v; }},
      {"checkpoint_every", [](RunConfig& c, auto& k, auto& v) { c.train.checkpoint_every = to_size(k, v); }},
  };
  return table;
}

void append_model(std::ostringstream& out, const ModelConfig& m) {
  const BackboneConfig& b = m.backbone;
  out << "in_channels = " << b.in_channels << '\n'
      << "input_size = " << b.input_size << '\n'
      << "stages = " << from_stages(b.stages) << '\n'
      << "fc_dims = " << from_dims(b.fc_dims) << '\n'
      << "embed_dim = " << b.embed_dim << '\n'
      << "num_classes = " << b.num_classes << '\n'
      << "reduction = " << m.reduction << '\n'
      << "share_plan = " << to_string(m.share) << '\n'
      << "use_co_attention = " << (m.use_co_attention ? "true" : "false") << '\n'
      << "alpha = " << fmt(m.weights.alpha) << '\n'
      << "beta = " << fmt(m.weights.beta) << '\n'
      << "gamma = " << fmt(m.weights.gamma) << '\n'
      << "m1 = " << fmt(m.weights.m1) << '\n'
      << "m2 = " << fmt(m.weights.m2) << '\n'
      << "seed = " << m.seed << '\n';
}

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.data = SyntheticSpec{};
  c.model.backbone = BackboneConfig{};
  c.model.backbone.input_size = c.data.image_size;
  c.model.backbone.num_classes = c.data.num_categories;
  c.train.lr = 1e-3;
  c.train.pretrain_lr = 0.04;
  c.train.batch_size = 16;
  return c;
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  train.validate();
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config = RunConfig::desk();
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(number) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(number) + ": repeated key '" + key + "'");
    try {
      it->second(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_run_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_text(const ModelConfig& config) {
  std::ostringstream out;
  append_model(out, config);
  return out.str();
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  out << "num_categories = " << c.data.num_categories << '\n'
      << "per_category = " << c.data.per_category << '\n'
      << "image_size = " << c.data.image_size << '\n'
      << "noise_level = " << fmt(c.data.noise_level) << '\n'
      << "jitter_level = " << fmt(c.data.jitter_level) << '\n'
      << "data_seed = " << c.data.seed << '\n';
  append_model(out, c.model);
  out << "lr = " << fmt(c.train.lr) << '\n'
      << "pretrain_lr = " << fmt(c.train.pretrain_lr) << '\n'
      << "momentum = " << fmt(c.train.momentum) << '\n'
      << "weight_decay = " << fmt(c.train.weight_decay) << '\n'
      << "batch_size = " << c.train.batch_size << '\n'
      << "pretrain_epochs = " << c.train.pretrain_epochs << '\n'
      << "joint_epochs = " << c.train.joint_epochs << '\n'
      << "checkpoint_every = " << c.train.checkpoint_every << '\n';
  if (!c.train.log_path.empty()) out << "log_path = " << c.train.log_path << '\n';
  return out.str();
}

ModelConfig parse_model_config(const std::string& text) { return parse_run_config(text).model; }

}  // namespace semi3
