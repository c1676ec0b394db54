// Copyright 2026 The HyperMix Authors
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

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "app/commands.hpp"
#include "hypermix/error.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string seed;
  std::string out;
  std::optional<std::string> methods;
  std::string shots;
  std::string ways;
  std::string episodes;
  std::string noise;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "config file (flat key = value)");
  cmd->add_option("--seed", f.seed, "run seed (U64)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--methods", f.methods, "comma-separated method tokens");
  cmd->add_option("--shots", f.shots, "support samples per class (K)");
  cmd->add_option("--ways", f.ways, "classes per episode (N)");
  cmd->add_option("--episodes", f.episodes, "meta-test episodes");
  cmd->add_option("--noise", f.noise, "comma-separated support noise fractions");
  cmd->add_option("--set", f.overrides, "extra key=value override (repeatable)");
}

hypermix::app::RunConfig build_config(const CommonFlags& f, const std::string& methods_key) {
  using hypermix::ConfigError;
  hypermix::app::RunConfig cfg = f.config.empty() ? hypermix::app::RunConfig()
                                                  : hypermix::app::RunConfig::from_file(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.seed.empty()) cfg.set("seed", f.seed);
  if (!f.out.empty()) cfg.set("out", f.out);
  if (!f.shots.empty()) cfg.set("episode.shots", f.shots);
  if (!f.ways.empty()) cfg.set("episode.ways", f.ways);
  if (!f.episodes.empty()) cfg.set("eval.episodes", f.episodes);
  if (!f.noise.empty()) cfg.set("eval.noise", f.noise);
  if (f.methods && !methods_key.empty()) cfg.set(methods_key, *f.methods);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypermix: few-shot OOD detection experiments on synthetic data"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string extractor_path;
  std::string model_path;

  auto* pretrain = app.add_subcommand("pretrain", "pretrain the feature extractor");
  add_common(pretrain, flags);
  auto* metatrain = app.add_subcommand("metatrain", "meta-train the hypernetwork (and fine-tune F)");
  add_common(metatrain, flags);
  metatrain->add_option("--extractor", extractor_path, "extractor checkpoint (default OUT/extractor.ckpt)");
  auto* evalc = app.add_subcommand("eval", "evaluate OOD scores and IND accuracy on meta-test episodes");
  add_common(evalc, flags);
  evalc->add_option("--model", model_path, "model checkpoint (default OUT/model.ckpt)");
  auto* sweep = app.add_subcommand("sweep", "grid sweep over sweep.grid.* keys, ranked by validation AUROC");
  add_common(sweep, flags);
  auto* diag = app.add_subcommand("diagnose-cov", "singular values of the pooled support covariance");
  add_common(diag, flags);
  diag->add_option("--extractor", extractor_path, "extractor checkpoint (default OUT/extractor.ckpt)");
  auto* keys = app.add_subcommand("keys", "list configuration keys with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (keys->parsed()) {
      for (const auto& k : hypermix::app::RunConfig::keys()) {
        std::cout << k.key << " = " << k.default_value << "    # " << k.help << "\n";
      }
      return 0;
    }
    auto path_or = [](const std::string& given, const hypermix::app::RunConfig& cfg, const char* name) {
      return given.empty() ? cfg.out_dir() + "/" + name : given;
    };
    if (pretrain->parsed()) {
      hypermix::app::cmd_pretrain(build_config(flags, ""), std::cerr);
    } else if (metatrain->parsed()) {
      const auto cfg = build_config(flags, "metatrain.method");
      hypermix::app::cmd_metatrain(cfg, path_or(extractor_path, cfg, "extractor.ckpt"), std::cerr);
    } else if (evalc->parsed()) {
      const auto cfg = build_config(flags, "eval.methods");
      hypermix::app::cmd_eval(cfg, path_or(model_path, cfg, "model.ckpt"), std::cerr);
    } else if (sweep->parsed()) {
      hypermix::app::cmd_sweep(build_config(flags, "eval.methods"), std::cerr);
    } else if (diag->parsed()) {
      const auto cfg = build_config(flags, "");
      hypermix::app::cmd_diagnose_cov(cfg, path_or(extractor_path, cfg, "extractor.ckpt"), std::cerr);
    }
  } catch (const hypermix::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
