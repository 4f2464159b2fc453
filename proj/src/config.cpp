// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mast/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mast {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model.mel_bins", "model.frames", "model.patch_t", "model.patch_f",
      "model.stem_dim", "model.num_classes", "model.rpe", "model.depths",
      "model.dims", "model.heads", "model.q_strides", "model.kv_strides",
      "optimizer.lr", "optimizer.beta1", "optimizer.beta2",
      "optimizer.weight_decay", "optimizer.batch_size", "optimizer.epochs",
      "optimizer.seed",
      "ssl.tau", "ssl.momentum", "ssl.patch_drop",
      "probe.lr", "probe.epochs",
      "train.log_interval",
      "paths.features_dir", "paths.manifest", "paths.manifest_eval",
      "paths.checkpoint_in", "paths.checkpoint_out", "paths.metrics_out",
  };
  return keys;
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  KvConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.set(key, value);
  }
  return kv;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double KvConfig::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" +
                      it->second + "' as a number");
  }
}

int KvConfig::get_int(const std::string& key, int def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t used = 0;
    int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" +
                      it->second + "' as an integer");
  }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return static_cast<uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" +
                      it->second + "' as an unsigned integer");
  }
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + it->second +
                    "' as a boolean");
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<int> out;
  for (const auto& part : split(it->second, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': cannot parse '" + part +
                        "' as an integer");
    }
  }
  if (out.empty()) {
    throw ConfigError("config key '" + key + "': empty list");
  }
  return out;
}

std::vector<std::pair<int, int>> KvConfig::get_stride_list(
    const std::string& key,
    const std::vector<std::pair<int, int>>& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<std::pair<int, int>> out;
  for (const auto& part : split(it->second, ',')) {
    try {
      const size_t x = part.find('x');
      if (x == std::string::npos) {
        const int v = std::stoi(part);
        out.emplace_back(v, v);
      } else {
        out.emplace_back(std::stoi(part.substr(0, x)),
                         std::stoi(part.substr(x + 1)));
      }
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': cannot parse '" + part +
                        "' as a stride (use `2` or `2x2`)");
    }
  }
  if (out.empty()) {
    throw ConfigError("config key '" + key + "': empty list");
  }
  return out;
}

RunConfig run_config_from(const KvConfig& kv) {
  for (const auto& [key, _] : kv.values()) {
    if (!known_keys().count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  RunConfig rc;
  rc.model = desk_config();
  auto& m = rc.model;
  m.mel_bins = kv.get_int("model.mel_bins", m.mel_bins);
  m.frames = kv.get_int("model.frames", m.frames);
  m.patch_t = kv.get_int("model.patch_t", m.patch_t);
  m.patch_f = kv.get_int("model.patch_f", m.patch_f);
  m.stem_dim = kv.get_int("model.stem_dim", m.stem_dim);
  m.num_classes = kv.get_int("model.num_classes", m.num_classes);
  m.rpe_enabled = kv.get_bool("model.rpe", m.rpe_enabled);

  std::vector<int> depths, dims, heads;
  std::vector<std::pair<int, int>> qs, kvs;
  for (const auto& s : m.stages) {
    depths.push_back(s.depth);
    dims.push_back(s.dim);
    heads.push_back(s.heads);
    qs.emplace_back(s.pool_q_stride_t, s.pool_q_stride_f);
    kvs.emplace_back(s.pool_kv_stride_t, s.pool_kv_stride_f);
  }
  depths = kv.get_int_list("model.depths", depths);
  dims = kv.get_int_list("model.dims", dims);
  heads = kv.get_int_list("model.heads", heads);
  qs = kv.get_stride_list("model.q_strides", qs);
  kvs = kv.get_stride_list("model.kv_strides", kvs);
  const size_t n_stages = depths.size();
  if (dims.size() != n_stages || heads.size() != n_stages ||
      qs.size() != n_stages || kvs.size() != n_stages) {
    throw ConfigError(
        "model.depths/dims/heads/q_strides/kv_strides must list the same "
        "number of stages");
  }
  m.stages.clear();
  for (size_t i = 0; i < n_stages; ++i) {
    StageConfig s;
    s.depth = depths[i];
    s.dim = dims[i];
    s.heads = heads[i];
    s.pool_q_stride_t = qs[i].first;
    s.pool_q_stride_f = qs[i].second;
    s.pool_kv_stride_t = kvs[i].first;
    s.pool_kv_stride_f = kvs[i].second;
    m.stages.push_back(s);
  }
  if (!m.stages.empty()) m.stem_dim = m.stages.front().dim;

  rc.adam.lr = kv.get_double("optimizer.lr", rc.adam.lr);
  rc.adam.beta1 = kv.get_double("optimizer.beta1", rc.adam.beta1);
  rc.adam.beta2 = kv.get_double("optimizer.beta2", rc.adam.beta2);
  rc.adam.weight_decay =
      kv.get_double("optimizer.weight_decay", rc.adam.weight_decay);
  rc.batch_size = kv.get_int("optimizer.batch_size", rc.batch_size);
  rc.epochs = kv.get_int("optimizer.epochs", rc.epochs);
  rc.seed = kv.get_u64("optimizer.seed", rc.seed);

  rc.ssl.tau = kv.get_double("ssl.tau", rc.ssl.tau);
  rc.ssl.momentum = kv.get_double("ssl.momentum", rc.ssl.momentum);
  rc.ssl.patch_drop = kv.get_double("ssl.patch_drop", rc.ssl.patch_drop);

  rc.probe_lr = kv.get_double("probe.lr", rc.probe_lr);
  rc.probe_epochs = kv.get_int("probe.epochs", rc.probe_epochs);
  rc.log_interval = kv.get_int("train.log_interval", rc.log_interval);

  rc.paths.features_dir = kv.get_str("paths.features_dir", "");
  rc.paths.manifest = kv.get_str("paths.manifest", "");
  rc.paths.manifest_eval = kv.get_str("paths.manifest_eval", "");
  rc.paths.checkpoint_in = kv.get_str("paths.checkpoint_in", "");
  rc.paths.checkpoint_out = kv.get_str("paths.checkpoint_out", "");
  rc.paths.metrics_out = kv.get_str("paths.metrics_out", "");

  if (rc.adam.lr < 0.0) throw ConfigError("optimizer.lr must not be negative");
  if (rc.batch_size < 1) {
    throw ConfigError("optimizer.batch_size must be >= 1");
  }
  if (rc.epochs < 1) throw ConfigError("optimizer.epochs must be >= 1");
  if (rc.log_interval < 1) {
    throw ConfigError("train.log_interval must be >= 1");
  }
  if (rc.ssl.tau <= 0.0) throw ConfigError("ssl.tau must be positive");
  if (rc.ssl.momentum < 0.0 || rc.ssl.momentum > 1.0) {
    throw ConfigError("ssl.momentum must lie in [0, 1]");
  }
  if (rc.ssl.patch_drop < 0.0 || rc.ssl.patch_drop >= 1.0) {
    throw ConfigError("ssl.patch_drop must lie in [0, 1)");
  }
  validate_config(rc.model);
  return rc;
}

}  // namespace mast
