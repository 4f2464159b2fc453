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

#ifndef MAST_CONFIG_HPP_
#define MAST_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

#include "mast/model.hpp"
#include "mast/optimizer.hpp"
#include "mast/ssl.hpp"

namespace mast {

// Flat `key = value` configuration: UTF-8 lines, `#` comments, dotted keys.
// CLI flags mirror the keys (`--ssl.tau 0.07`) and override file values.
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& def) const;
  // "4x4,2x2,1x1,1x1" -> per-stage (t, f) pairs; "4,2,1,1" means square.
  std::vector<std::pair<int, int>> get_stride_list(
      const std::string& key,
      const std::vector<std::pair<int, int>>& def) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct RunPaths {
  std::string features_dir;
  std::string manifest;
  std::string manifest_eval;
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::string metrics_out;
};

struct RunConfig {
  ModelConfig model;
  AdamConfig adam;
  int batch_size = 64;
  int epochs = 10;
  uint64_t seed = 0;
  SslConfig ssl;
  int log_interval = 10;
  double probe_lr = 1e-2;
  int probe_epochs = 200;
  RunPaths paths;
};

// Applies recognized keys over the built-in defaults (the desk model);
// unknown keys raise ConfigError so typos cannot silently pass.
RunConfig run_config_from(const KvConfig& kv);

}  // namespace mast

#endif  // MAST_CONFIG_HPP_
