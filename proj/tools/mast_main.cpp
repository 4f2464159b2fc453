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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "mast/config.hpp"
#include "mast/trainer.hpp"

namespace {

constexpr const char* kUsage = R"(usage: mast <command> [--key value ...]

commands:
  shapes                     print the per-stage shape plan
  gen-synth --out DIR --n N --seed S
                             write a synthetic labeled feature corpus
  featurize --wav-dir DIR --out DIR
                             log-mel featurize PCM16 mono wav files
  pretrain --config FILE     self-supervised pretraining
  train --config FILE        supervised training
  probe --config FILE --checkpoint FILE
                             linear probe on a frozen encoder
  eval --config FILE --checkpoint FILE
                             evaluate a checkpoint

Any flat config key can be passed as a flag (overrides the file), e.g.
  mast train --config run.cfg --optimizer.lr 1e-3 --ssl.tau 0.07

exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure
)";

struct Cli {
  std::string command;
  std::vector<std::pair<std::string, std::string>> flags;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : flags) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

Cli parse_cli(int argc, char** argv) {
  Cli cli;
  if (argc < 2) throw mast::ConfigError("missing command; see --help");
  cli.command = argv[1];
  for (int i = 2; i < argc; i += 2) {
    std::string key = argv[i];
    if (key.rfind("--", 0) != 0) {
      throw mast::ConfigError("expected --flag, got '" + key + "'");
    }
    key = key.substr(2);
    if (i + 1 >= argc) {
      throw mast::ConfigError("flag --" + key + " needs a value");
    }
    cli.flags.emplace_back(key, argv[i + 1]);
  }
  return cli;
}

mast::RunConfig build_run_config(const Cli& cli) {
  mast::KvConfig kv;
  if (const auto* cfg = cli.find("config")) {
    kv = mast::KvConfig::from_file(*cfg);
  }
  for (const auto& [k, v] : cli.flags) {
    if (k == "config") continue;
    if (k == "checkpoint") {
      kv.set("paths.checkpoint_in", v);
    } else {
      kv.set(k, v);
    }
  }
  return mast::run_config_from(kv);
}

int run(int argc, char** argv) {
  if (argc >= 2 &&
      (std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h")) {
    std::cout << kUsage;
    return 0;
  }
  const Cli cli = parse_cli(argc, argv);

  if (cli.command == "shapes") {
    mast::print_shape_plan(build_run_config(cli).model, std::cout);
    return 0;
  }
  if (cli.command == "gen-synth") {
    const auto* out = cli.find("out");
    const auto* n = cli.find("n");
    if (!out || !n) {
      throw mast::ConfigError("gen-synth needs --out DIR and --n N");
    }
    const auto* seed = cli.find("seed");
    const auto* sigma = cli.find("sigma");
    mast::cmd_gen_synth(*out, std::stoi(*n),
                        seed ? std::stoull(*seed) : 0ULL,
                        sigma ? std::stof(*sigma) : 0.3f);
    return 0;
  }
  if (cli.command == "featurize") {
    const auto* wav = cli.find("wav-dir");
    const auto* out = cli.find("out");
    if (!wav || !out) {
      throw mast::ConfigError("featurize needs --wav-dir DIR and --out DIR");
    }
    const auto* bins = cli.find("mel-bins");
    mast::cmd_featurize(*wav, *out, bins ? std::stoi(*bins) : 64);
    return 0;
  }
  if (cli.command == "train") {
    auto result = mast::run_train(build_run_config(cli));
    std::printf("train: steps=%lld final_train_loss=%.6g\n",
                static_cast<long long>(result.steps),
                result.final_train_loss);
    if (result.eval_accuracy >= 0.0) {
      std::printf("train: eval_accuracy=%.6g\n", result.eval_accuracy);
    }
    return 0;
  }
  if (cli.command == "pretrain") {
    auto result = mast::run_pretrain(build_run_config(cli));
    std::printf("pretrain: steps=%lld first_loss=%.6g last_loss=%.6g\n",
                static_cast<long long>(result.steps),
                static_cast<double>(result.first_loss),
                static_cast<double>(result.last_loss));
    return 0;
  }
  if (cli.command == "probe") {
    auto result = mast::run_probe(build_run_config(cli));
    std::printf("probe: accuracy=%.6g\n", result.accuracy);
    return 0;
  }
  if (cli.command == "eval") {
    auto result = mast::run_eval(build_run_config(cli));
    std::printf("eval: loss=%.6g accuracy=%.6g\n", result.loss,
                result.accuracy);
    return 0;
  }
  throw mast::ConfigError("unknown command '" + cli.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mast::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mast::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mast::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const mast::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mast::IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mast::StateError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
