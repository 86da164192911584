/**
 * Copyright 2026 The Dubhe Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "dubhe/experiment.hpp"

namespace {

using dubhe::experiment::CommandResult;
using dubhe::experiment::ExperimentSpec;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

const std::map<std::string, std::string>& help_texts() {
  static const std::map<std::string, std::string> h{
      {"c", "number of classes"},
      {"n", "number of clients"},
      {"nvc", "samples per (virtual) client"},
      {"rho", "global imbalance ratio"},
      {"emd", "target mean L1 distance of clients to the global profile"},
      {"seed", "dataset seed"},
      {"shuffle-classes", "permute the class axis of the global profile"},
      {"family", "skew family: auto, two-class or one-class"},
      {"dataset", "read clients from a dataset file instead of generating"},
      {"g", "reference set G, comma separated, must end with c"},
      {"sigma", "free thresholds for the sizes in G below c; empty runs a search"},
      {"search-h", "tries per grid point in parameter search"},
      {"strategies", "comma separated subset of random,greedy,dubhe"},
      {"k", "participants per round"},
      {"h", "tries per multi-time selection"},
      {"h-list", "H values for the EMD-only table"},
      {"selection-rounds", "repetitions for EMD tables and overhead rounds"},
      {"selection-seed", "seed for selection streams"},
      {"emd-only", "run: tabulate EMD* against H without training"},
      {"batch", "mini-batch size"},
      {"epochs", "local epochs"},
      {"lr", "learning rate"},
      {"rounds", "training rounds"},
      {"seeds", "training seeds, comma separated"},
      {"optimizer", "sgd or adam"},
      {"dim", "feature dimension of the synthetic task"},
      {"noise", "noise scale of the synthetic task"},
      {"task-seed", "seed of the synthetic class means"},
      {"test-per-class", "test samples per class"},
      {"key-bits", "Paillier modulus size for protocol runs"},
      {"bench-bits", "key sizes for bench-he"},
      {"bench-lengths", "vector lengths for bench-he"},
      {"bench-trials", "trials per bench-he cell"},
      {"workers", "parallel training runs"},
      {"out", "output directory (default $DUBHE_OUTPUT_DIR or ./dubhe-out)"},
  };
  return h;
}

bool is_flag(const std::string& key) { return key == "shuffle-classes" || key == "emd-only"; }

struct Subcommand {
  CLI::App* app = nullptr;
  std::string spec_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::function<CommandResult(const ExperimentSpec&)> run;
};

void add_spec_options(Subcommand& sub) {
  sub.app->add_option("--spec", sub.spec_file, "key = value spec file applied before flags");
  for (const auto& key : ExperimentSpec::keys()) {
    const std::string name = "--" + key;
    const std::string help = help_texts().at(key);
    if (is_flag(key)) {
      sub.options[key] = sub.app->add_flag_function(
          name, [&sub, key](std::int64_t) { sub.values[key] = "true"; }, help);
    } else {
      sub.options[key] = sub.app->add_option(name, sub.values[key], help);
    }
  }
}

ExperimentSpec build_spec(const Subcommand& sub) {
  ExperimentSpec spec;
  if (!sub.spec_file.empty()) {
    std::ifstream in(sub.spec_file);
    if (!in) throw std::invalid_argument("cannot open spec file " + sub.spec_file);
    spec.read_text(in);
  }
  for (const auto& key : ExperimentSpec::keys()) {
    if (sub.options.at(key)->count() > 0) spec.set(key, sub.values.at(key));
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated client selection simulator"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");

  std::vector<std::unique_ptr<Subcommand>> subs;
  auto add = [&](const std::string& name, const std::string& description,
                 std::function<CommandResult(const ExperimentSpec&)> run) {
    auto sub = std::make_unique<Subcommand>();
    sub->app = app.add_subcommand(name, description);
    sub->app->set_help_flag("--help", "print this help and exit");
    sub->run = std::move(run);
    add_spec_options(*sub);
    subs.push_back(std::move(sub));
  };
  add("gen-data", "generate a synthetic federation", dubhe::experiment::cmd_gen_data);
  add("search", "encrypted parameter search over the threshold grid", dubhe::experiment::cmd_search);
  add("run", "compare selection strategies (training, or EMD tables with --emd-only)",
      dubhe::experiment::cmd_run);
  add("bench-he", "time and size Paillier operations", dubhe::experiment::cmd_bench_he);
  add("overhead", "count protocol messages and bytes", dubhe::experiment::cmd_overhead);
  add("codebook-dump", "list registry slots and their categories", dubhe::experiment::cmd_codebook_dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  for (const auto& sub : subs) {
    if (!sub->app->parsed()) continue;
    try {
      const ExperimentSpec spec = build_spec(*sub);
      const CommandResult result = sub->run(spec);
      std::cout << result.summary;
      for (const auto& p : result.outputs) std::cout << "wrote " << p.string() << '\n';
      return 0;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "failed: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitValidation;
}
