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

#ifndef DUBHE_EXPERIMENT_HPP_
#define DUBHE_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dubhe/distributions.hpp"
#include "dubhe/fl_train.hpp"
#include "dubhe/selection.hpp"

namespace dubhe::experiment {

/// Every knob of every command. Keys in the key = value format match the
/// long flag names of the CLI.
struct ExperimentSpec {
  // dataset
  std::size_t classes = 10;                 // c
  std::size_t clients = 1000;               // n
  std::uint64_t nvc = 128;                  // nvc
  double rho = 10.0;                        // rho
  double emd = 1.5;                         // emd
  std::uint64_t seed = 1;                   // seed (dataset)
  bool shuffle_classes = false;             // shuffle-classes
  dist::SkewFamily family = dist::SkewFamily::kAuto;  // family
  std::string dataset_file;                 // dataset: load instead of generating

  // registry scheme
  std::vector<std::size_t> sizes{1, 2, 10};  // g
  std::vector<double> thresholds;            // sigma; empty means "search first"
  std::size_t search_tries = 200;            // search-h

  // selection
  std::vector<selection::Strategy> strategies{selection::Strategy::kRandom, selection::Strategy::kGreedy,
                                              selection::Strategy::kDubhe};
  std::size_t k = 20;
  std::size_t h = 1;
  std::vector<std::size_t> h_list{1, 2, 5, 10, 20};  // h-list (EMD-only table)
  std::size_t selection_rounds = 100;                // selection-rounds
  std::uint64_t selection_seed = 7;                  // selection-seed
  bool emd_only = false;                             // emd-only

  // training
  std::size_t batch = 8;
  std::size_t epochs = 1;
  double lr = 0.05;
  std::size_t rounds = 200;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  fl::Optimizer optimizer = fl::Optimizer::kSgd;
  std::size_t dim = 16;
  double noise = 0.35;
  std::uint64_t task_seed = 11;
  std::size_t test_per_class = 200;

  // crypto
  unsigned key_bits = 256;                     // key-bits
  std::vector<unsigned> bench_bits{1024, 2048};  // bench-bits
  std::vector<std::size_t> bench_lengths{1, 8, 16, 32, 56, 64};  // bench-lengths
  std::size_t bench_trials = 3;                // bench-trials

  std::size_t workers = 1;
  std::string output_dir;  // out

  /// Applies one key = value setting; throws std::invalid_argument for
  /// unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// All keys in canonical order.
  static const std::vector<std::string>& keys();
  std::string get(const std::string& key) const;

  /// Cross-field checks, run before any computation.
  void validate() const;

  void write_text(std::ostream& os) const;
  /// Lines "key = value"; '#' starts a comment.
  void read_text(std::istream& is);
  std::string to_json() const;

  dist::DatasetParams dataset_params() const;
  fl::TrainConfig train_config() const;
};

/// Output directory: the spec's, else $DUBHE_OUTPUT_DIR, else "dubhe-out".
std::filesystem::path resolve_output_dir(const ExperimentSpec& spec);

/// Loads `dataset_file` when set, generates otherwise.
dist::FederationDataset load_or_generate(const ExperimentSpec& spec);

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::string summary;  // human-readable, printed by the CLI
};

CommandResult cmd_gen_data(const ExperimentSpec& spec);
CommandResult cmd_search(const ExperimentSpec& spec);
CommandResult cmd_run(const ExperimentSpec& spec);
CommandResult cmd_bench_he(const ExperimentSpec& spec);
CommandResult cmd_overhead(const ExperimentSpec& spec);
CommandResult cmd_codebook_dump(const ExperimentSpec& spec);

/// Mean EMD* over `repetitions` selections for each H, one row per
/// (strategy, H). Dubhe rows use `probabilities`.
struct EmdRow {
  selection::Strategy strategy;
  std::size_t tries;
  double mean_emd;
  double std_emd;
};
std::vector<EmdRow> emd_table(const dist::FederationDataset& dataset, std::span<const double> probabilities,
                              const std::vector<selection::Strategy>& strategies,
                              const std::vector<std::size_t>& h_list, std::size_t participants,
                              std::size_t repetitions, std::uint64_t seed);

/// Plaintext Dubhe probabilities for a fixed scheme.
std::vector<double> dubhe_probabilities(const dist::FederationDataset& dataset, const std::vector<std::size_t>& sizes,
                                        const std::vector<double>& thresholds, std::size_t participants);

}  // namespace dubhe::experiment

#endif  // DUBHE_EXPERIMENT_HPP_
