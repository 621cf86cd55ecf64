#include "mbsr/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mbsr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "c" || v == "complementary") return true;
  if (v == "0" || v == "false" || v.empty()) return false;
  throw Error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::env_name(const std::string& prefix, const std::string& key) {
  std::string name = prefix;
  for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void KeyValueConfig::apply_env(const std::string& prefix, const std::vector<std::string>& keys) {
  for (const auto& key : keys)
    if (const char* v = std::getenv(env_name(prefix, key).c_str())) values_[key] = v;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys{
      "data.grids",         "data.reference",      "data.joined",      "data.min_nonzero_frac", "out",
      "transform.n_quantiles", "model.features",   "model.blocks",     "model.reduction",       "train.lr_max",
      "train.lr_min",       "train.max_iters",     "train.val_every",  "train.patience",        "train.batch_size",
      "train.seed",         "split.seed",          "split.train",      "split.val",             "split.test",
      "synth.rows",         "synth.cols",          "synth.correlation_length", "synth.hf_scale",
      "synth.seed",         "synth.dates",         "synth.compounds",  "report.figures",        "report.tag"};
  return keys;
}

std::vector<SynthCompound> parse_synth_compounds(const std::string& text) {
  std::vector<SynthCompound> out;
  for (const auto& entry : split_list(text, ';')) {
    const auto f = split_list(entry, ':');
    if (f.size() < 5 || f.size() > 6)
      throw Error("synth compound '" + entry + "' must be tag:rho:sparsity:gamma:seed[:complementary]");
    SynthCompound c;
    c.tag = f[0];
    c.rho = to_double("synth.compounds", f[1]);
    c.sparsity = to_double("synth.compounds", f[2]);
    c.gamma = to_double("synth.compounds", f[3]);
    c.seed = to_uint("synth.compounds", f[4]);
    c.complementary = f.size() == 6 && to_bool("synth.compounds", f[5]);
    out.push_back(c);
  }
  return out;
}

JoinedSelector parse_joined(const std::string& text) {
  JoinedSelector sel;
  const std::string t = trim(text);
  if (t.rfind("auto:", 0) == 0) {
    const auto f = split_list(t, ':');
    if (f.size() != 3) throw Error("data.joined selector '" + t + "' must be auto:most:k or auto:least:k");
    sel.mode = parse_rank_mode(f[1]);
    sel.k = static_cast<std::size_t>(to_uint("data.joined", f[2]));
    if (sel.k == 0) throw Error("data.joined selector needs k >= 1");
    return sel;
  }
  sel.compounds = split_list(t, ',');
  std::set<std::string> seen;
  for (const auto& c : sel.compounds)
    if (!seen.insert(c).second) throw Error("data.joined lists '" + c + "' twice");
  return sel;
}

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
  const auto& keys = known_keys();
  for (const auto& [k, _] : kv.values())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw Error("unknown config key '" + k + "'");

  RunConfig c;
  auto str = [&](const char* key, auto& dst) {
    if (auto v = kv.get(key)) dst = *v;
  };
  auto num = [&](const char* key, double& dst) {
    if (auto v = kv.get(key)) dst = to_double(key, *v);
  };
  auto uint = [&](const char* key, auto& dst) {
    if (auto v = kv.get(key)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(to_uint(key, *v));
  };

  if (auto v = kv.get("data.grids")) c.grids = *v;
  if (auto v = kv.get("out")) c.out = *v;
  str("data.reference", c.reference);
  str("data.joined", c.joined);
  num("data.min_nonzero_frac", c.min_nonzero_frac);
  uint("transform.n_quantiles", c.n_quantiles);
  uint("model.features", c.model.features);
  uint("model.blocks", c.model.blocks);
  uint("model.reduction", c.model.reduction);
  num("train.lr_max", c.train.lr_max);
  num("train.lr_min", c.train.lr_min);
  uint("train.max_iters", c.train.max_iters);
  uint("train.val_every", c.train.val_every);
  uint("train.patience", c.train.patience);
  uint("train.batch_size", c.train.batch_size);
  uint("train.seed", c.train.seed);
  uint("split.seed", c.split.seed);
  num("split.train", c.split.train);
  num("split.val", c.split.val);
  num("split.test", c.split.test);
  uint("synth.rows", c.synth.rows);
  uint("synth.cols", c.synth.cols);
  num("synth.correlation_length", c.synth.correlation_length);
  num("synth.hf_scale", c.synth.hf_scale);
  uint("synth.seed", c.synth.shared_seed);
  if (auto v = kv.get("synth.dates")) c.synth.dates = split_list(*v, ',');
  if (auto v = kv.get("synth.compounds")) c.synth.compounds = parse_synth_compounds(*v);
  uint("report.figures", c.figures);
  str("report.tag", c.tag);
  return c;
}

void RunConfig::validate() const {
  if (!grids.empty() && !std::filesystem::is_directory(grids))
    throw Error("data.grids: directory '" + grids.string() + "' does not exist");
  if (grids.empty()) synth.validate();
  if (reference.empty()) throw Error("data.reference is required");
  if (!(min_nonzero_frac >= 0.0 && min_nonzero_frac <= 1.0)) throw Error("data.min_nonzero_frac must be in [0, 1]");
  if (n_quantiles < 2) throw Error("transform.n_quantiles must be >= 2");
  SrModelConfig m = model;
  m.in_channels = 1;
  m.validate();
  train.validate();
  split.validate();
  const auto sel = parse_joined(joined);
  if (std::find(sel.compounds.begin(), sel.compounds.end(), reference) != sel.compounds.end())
    throw Error("data.joined must not contain the reference compound");
}

}  // namespace mbsr
