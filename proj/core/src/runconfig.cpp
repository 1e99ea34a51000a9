#include "pwiser/runconfig.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pwiser {

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& tok : split_commas(s)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + tok + "' for key " + key);
    }
  }
  return out;
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer '" + s + "' for key " + key);
  }
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' for key " + key);
  }
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

template <typename T>
std::string join_nums(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "model.arch",          "model.embed_dim",       "model.num_experts",
      "model.num_shared_experts", "model.num_task_experts", "model.tower_widths",
      "model.bottom_widths", "model.expert_hidden",   "model.vocab_size",
      "loss.lambda",         "loss.m1",               "loss.m2",
      "loss.pwiser_target",  "loss.kernel",           "train.batch_size",
      "train.lr",            "train.weight_decay",    "train.epochs",
      "train.seed",          "train.eval_every",      "train.shuffle",
      "data.train_path",     "data.valid_path",       "data.schema",
      "data.policy",
  };
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "model.arch") train.model.arch = parse_arch(value);
  else if (key == "model.embed_dim") train.model.embed_dim = parse_int(value, key);
  else if (key == "model.num_experts") train.model.num_experts = parse_int(value, key);
  else if (key == "model.num_shared_experts")
    train.model.num_shared_experts = parse_int(value, key);
  else if (key == "model.num_task_experts")
    train.model.num_task_experts = parse_int(value, key);
  else if (key == "model.tower_widths") train.model.tower_widths = parse_int_list(value, key);
  else if (key == "model.bottom_widths") train.model.bottom_widths = parse_int_list(value, key);
  else if (key == "model.expert_hidden") train.model.expert_hidden = parse_int_list(value, key);
  else if (key == "model.vocab_size") vocab_size = parse_int(value, key);
  else if (key == "loss.lambda") train.loss.lambda = parse_double(value, key);
  else if (key == "loss.m1") train.loss.m1 = parse_double(value, key);
  else if (key == "loss.m2") train.loss.m2 = parse_double(value, key);
  else if (key == "loss.pwiser_target") train.loss.pwiser_target = parse_pwiser_target(value);
  else if (key == "loss.kernel") train.loss.kernel = parse_kernel(value);
  else if (key == "train.batch_size") train.batch_size = parse_int(value, key);
  else if (key == "train.lr") train.lr = parse_double(value, key);
  else if (key == "train.weight_decay") train.weight_decay = parse_double(value, key);
  else if (key == "train.epochs") train.epochs = parse_int(value, key);
  else if (key == "train.seed")
    train.seed = static_cast<std::uint64_t>(std::strtoull(value.c_str(), nullptr, 10));
  else if (key == "train.eval_every") train.eval_every = parse_int(value, key);
  else if (key == "train.shuffle") {
    if (value == "true") train.shuffle = true;
    else if (value == "false") train.shuffle = false;
    else throw ConfigError("bad boolean '" + value + "' for key " + key);
  }
  else if (key == "data.train_path") train_path = value;
  else if (key == "data.valid_path") valid_path = value;
  else if (key == "data.schema") schema = split_commas(value);
  else if (key == "data.policy") policy = parse_label_policy(value);
  else throw ConfigError("unknown config key: " + key);
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "data.policy=" << (policy == LabelPolicy::coerce ? "coerce" : "reject") << '\n';
  os << "data.schema=" << join(schema) << '\n';
  os << "data.train_path=" << train_path << '\n';
  os << "data.valid_path=" << valid_path << '\n';
  os << "loss.kernel=" << to_string(train.loss.kernel) << '\n';
  os << "loss.lambda=" << fmt_double(train.loss.lambda) << '\n';
  os << "loss.m1=" << fmt_double(train.loss.m1) << '\n';
  os << "loss.m2=" << fmt_double(train.loss.m2) << '\n';
  os << "loss.pwiser_target=" << to_string(train.loss.pwiser_target) << '\n';
  os << "model.arch=" << to_string(train.model.arch) << '\n';
  os << "model.bottom_widths=" << join_nums(train.model.bottom_widths) << '\n';
  os << "model.embed_dim=" << train.model.embed_dim << '\n';
  os << "model.expert_hidden=" << join_nums(train.model.expert_hidden) << '\n';
  os << "model.num_experts=" << train.model.num_experts << '\n';
  os << "model.num_shared_experts=" << train.model.num_shared_experts << '\n';
  os << "model.num_task_experts=" << train.model.num_task_experts << '\n';
  os << "model.tower_widths=" << join_nums(train.model.tower_widths) << '\n';
  os << "model.vocab_size=" << vocab_size << '\n';
  os << "train.batch_size=" << train.batch_size << '\n';
  os << "train.epochs=" << train.epochs << '\n';
  os << "train.eval_every=" << train.eval_every << '\n';
  os << "train.lr=" << fmt_double(train.lr) << '\n';
  os << "train.seed=" << train.seed << '\n';
  os << "train.shuffle=" << (train.shuffle ? "true" : "false") << '\n';
  os << "train.weight_decay=" << fmt_double(train.weight_decay) << '\n';
  return os.str();
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::size_t eq = line.find('=', start);
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    std::size_t vs = value.find_first_not_of(" \t");
    value = (vs == std::string::npos) ? "" : value.substr(vs);
    cfg.set(key, value);
  }
  return cfg;
}

}  // namespace pwiser
