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

#include "dubhe/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dubhe/paillier.hpp"
#include "dubhe/protocol.hpp"
#include "dubhe/registry.hpp"
#include "json.hpp"

namespace dubhe::experiment {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw std::invalid_argument("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T out{};
  const std::string v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "true or false");
}

template <typename T>
std::vector<T> parse_unsigned_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_unsigned<T>(key, item));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& ExperimentSpec::keys() {
  static const std::vector<std::string> k{
      "c",          "n",          "nvc",          "rho",          "emd",           "seed",           "shuffle-classes",
      "family",     "dataset",    "g",            "sigma",        "search-h",      "strategies",     "k",
      "h",          "h-list",     "selection-rounds", "selection-seed", "emd-only", "batch",          "epochs",
      "lr",         "rounds",     "seeds",        "optimizer",    "dim",           "noise",          "task-seed",
      "test-per-class", "key-bits", "bench-bits", "bench-lengths", "bench-trials", "workers",        "out"};
  return k;
}

void ExperimentSpec::set(const std::string& key, const std::string& value) {
  if (key == "c") {
    classes = parse_unsigned<std::size_t>(key, value);
  } else if (key == "n") {
    clients = parse_unsigned<std::size_t>(key, value);
  } else if (key == "nvc") {
    nvc = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "rho") {
    rho = parse_double(key, value);
  } else if (key == "emd") {
    emd = parse_double(key, value);
  } else if (key == "seed") {
    seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "shuffle-classes") {
    shuffle_classes = parse_bool(key, value);
  } else if (key == "family") {
    family = dist::parse_skew_family(trim(value));
  } else if (key == "dataset") {
    dataset_file = trim(value);
  } else if (key == "g") {
    sizes = parse_unsigned_list<std::size_t>(key, value);
  } else if (key == "sigma") {
    thresholds = parse_double_list(key, value);
  } else if (key == "search-h") {
    search_tries = parse_unsigned<std::size_t>(key, value);
  } else if (key == "strategies") {
    strategies.clear();
    for (const auto& s : split_list(value)) strategies.push_back(selection::parse_strategy(s));
  } else if (key == "k") {
    k = parse_unsigned<std::size_t>(key, value);
  } else if (key == "h") {
    h = parse_unsigned<std::size_t>(key, value);
  } else if (key == "h-list") {
    h_list = parse_unsigned_list<std::size_t>(key, value);
  } else if (key == "selection-rounds") {
    selection_rounds = parse_unsigned<std::size_t>(key, value);
  } else if (key == "selection-seed") {
    selection_seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "emd-only") {
    emd_only = parse_bool(key, value);
  } else if (key == "batch") {
    batch = parse_unsigned<std::size_t>(key, value);
  } else if (key == "epochs") {
    epochs = parse_unsigned<std::size_t>(key, value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "rounds") {
    rounds = parse_unsigned<std::size_t>(key, value);
  } else if (key == "seeds") {
    seeds = parse_unsigned_list<std::uint64_t>(key, value);
  } else if (key == "optimizer") {
    optimizer = fl::parse_optimizer(trim(value));
  } else if (key == "dim") {
    dim = parse_unsigned<std::size_t>(key, value);
  } else if (key == "noise") {
    noise = parse_double(key, value);
  } else if (key == "task-seed") {
    task_seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "test-per-class") {
    test_per_class = parse_unsigned<std::size_t>(key, value);
  } else if (key == "key-bits") {
    key_bits = parse_unsigned<unsigned>(key, value);
  } else if (key == "bench-bits") {
    bench_bits = parse_unsigned_list<unsigned>(key, value);
  } else if (key == "bench-lengths") {
    bench_lengths = parse_unsigned_list<std::size_t>(key, value);
  } else if (key == "bench-trials") {
    bench_trials = parse_unsigned<std::size_t>(key, value);
  } else if (key == "workers") {
    workers = parse_unsigned<std::size_t>(key, value);
  } else if (key == "out") {
    output_dir = trim(value);
  } else {
    throw std::invalid_argument("unknown setting '" + key + "'");
  }
}

std::string ExperimentSpec::get(const std::string& key) const {
  if (key == "c") return std::to_string(classes);
  if (key == "n") return std::to_string(clients);
  if (key == "nvc") return std::to_string(nvc);
  if (key == "rho") return fmt(rho);
  if (key == "emd") return fmt(emd);
  if (key == "seed") return std::to_string(seed);
  if (key == "shuffle-classes") return shuffle_classes ? "true" : "false";
  if (key == "family") return dist::to_string(family);
  if (key == "dataset") return dataset_file;
  if (key == "g") return join(sizes);
  if (key == "sigma") return join(thresholds);
  if (key == "search-h") return std::to_string(search_tries);
  if (key == "strategies") {
    std::string out;
    for (std::size_t i = 0; i < strategies.size(); ++i) out += (i ? "," : "") + selection::to_string(strategies[i]);
    return out;
  }
  if (key == "k") return std::to_string(k);
  if (key == "h") return std::to_string(h);
  if (key == "h-list") return join(h_list);
  if (key == "selection-rounds") return std::to_string(selection_rounds);
  if (key == "selection-seed") return std::to_string(selection_seed);
  if (key == "emd-only") return emd_only ? "true" : "false";
  if (key == "batch") return std::to_string(batch);
  if (key == "epochs") return std::to_string(epochs);
  if (key == "lr") return fmt(lr);
  if (key == "rounds") return std::to_string(rounds);
  if (key == "seeds") return join(seeds);
  if (key == "optimizer") return fl::to_string(optimizer);
  if (key == "dim") return std::to_string(dim);
  if (key == "noise") return fmt(noise);
  if (key == "task-seed") return std::to_string(task_seed);
  if (key == "test-per-class") return std::to_string(test_per_class);
  if (key == "key-bits") return std::to_string(key_bits);
  if (key == "bench-bits") return join(bench_bits);
  if (key == "bench-lengths") return join(bench_lengths);
  if (key == "bench-trials") return std::to_string(bench_trials);
  if (key == "workers") return std::to_string(workers);
  if (key == "out") return output_dir;
  throw std::invalid_argument("unknown setting '" + key + "'");
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (classes < 2) fail("c must be at least 2");
  if (clients == 0) fail("n must be positive");
  if (nvc == 0) fail("nvc must be positive");
  if (!(rho >= 1.0)) fail("rho must be >= 1");
  if (!(emd >= 0.0 && emd < 2.0)) fail("emd must be in [0, 2)");
  if (k == 0) fail("k must be positive");
  if (k > clients) fail("k = " + std::to_string(k) + " exceeds n = " + std::to_string(clients));
  if (h == 0) fail("h must be at least 1");
  if (search_tries == 0) fail("search-h must be at least 1");
  if (h_list.empty() || std::find(h_list.begin(), h_list.end(), 0) != h_list.end()) {
    fail("h-list needs positive entries");
  }
  if (strategies.empty()) fail("strategies must not be empty");
  if (selection_rounds == 0) fail("selection-rounds must be positive");
  if (sizes.empty() || sizes.back() != classes) {
    fail("g must be ascending and end with c = " + std::to_string(classes));
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > classes || (i > 0 && sizes[i] <= sizes[i - 1])) {
      fail("g must be strictly ascending within [1, c]");
    }
  }
  if (!thresholds.empty()) {
    std::string reason;
    if (!registry::thresholds_valid(sizes, classes, thresholds, &reason)) fail("sigma: " + reason);
  }
  if (batch == 0) fail("batch must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (rounds == 0) fail("rounds must be positive");
  if (seeds.empty()) fail("seeds must not be empty");
  if (dim == 0) fail("dim must be positive");
  if (!(noise > 0.0)) fail("noise must be positive");
  if (test_per_class == 0) fail("test-per-class must be positive");
  auto check_bits = [&](unsigned bits) {
    if (bits < crypto::kMinTestBits || bits % 2 != 0) {
      fail("key sizes must be even and at least " + std::to_string(crypto::kMinTestBits) + " bits");
    }
  };
  check_bits(key_bits);
  for (unsigned b : bench_bits) check_bits(b);
  if (bench_lengths.empty() || bench_bits.empty()) fail("bench-bits and bench-lengths must not be empty");
  if (bench_trials == 0) fail("bench-trials must be positive");
  if (workers == 0) fail("workers must be positive");
}

void ExperimentSpec::write_text(std::ostream& os) const {
  os << "# dubhe experiment spec\n";
  for (const auto& key : keys()) os << key << " = " << get(key) << '\n';
}

void ExperimentSpec::read_text(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("spec line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::string ExperimentSpec::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& key : keys()) j[key] = get(key);
  return j.dump(2);
}

dist::DatasetParams ExperimentSpec::dataset_params() const {
  dist::DatasetParams p;
  p.num_classes = classes;
  p.num_clients = clients;
  p.samples_per_client = nvc;
  p.rho = rho;
  p.emd = emd;
  p.seed = seed;
  p.shuffle_classes = shuffle_classes;
  p.family = family;
  return p;
}

fl::TrainConfig ExperimentSpec::train_config() const {
  fl::TrainConfig t;
  t.batch_size = batch;
  t.local_epochs = epochs;
  t.samples_per_client = nvc;
  t.learning_rate = lr;
  t.rounds = rounds;
  t.participants = k;
  t.optimizer = optimizer;
  return t;
}

std::filesystem::path resolve_output_dir(const ExperimentSpec& spec) {
  if (!spec.output_dir.empty()) return spec.output_dir;
  if (const char* env = std::getenv("DUBHE_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "dubhe-out";
}

dist::FederationDataset load_or_generate(const ExperimentSpec& spec) {
  if (spec.dataset_file.empty()) return dist::make_dataset(spec.dataset_params());
  std::ifstream in(spec.dataset_file);
  if (!in) throw std::runtime_error("cannot open dataset file " + spec.dataset_file);
  dist::FederationDataset ds = dist::read_dataset_text(in);
  if (ds.num_classes != spec.classes) {
    throw std::invalid_argument("dataset has " + std::to_string(ds.num_classes) + " classes but c = " +
                                std::to_string(spec.classes));
  }
  if (spec.k > ds.clients.size()) throw std::invalid_argument("k exceeds the dataset's client count");
  return ds;
}

namespace {

std::filesystem::path prepare_dir(const ExperimentSpec& spec) {
  const auto dir = resolve_output_dir(spec);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentSpec& spec,
                    CommandResult& result) {
  const auto spec_path = dir / (command + "-spec.txt");
  {
    auto out = open_out(spec_path);
    spec.write_text(out);
  }
  result.outputs.push_back(spec_path);
  const auto manifest_path = dir / (command + "-manifest.json");
  nlohmann::ordered_json j;
  j["tool"] = "dubhe";
  j["command"] = command;
  j["spec"] = nlohmann::ordered_json::parse(spec.to_json());
  std::vector<std::string> names;
  for (const auto& p : result.outputs) names.push_back(p.filename().string());
  j["outputs"] = names;
  auto out = open_out(manifest_path);
  out << j.dump(2) << '\n';
  result.outputs.push_back(manifest_path);
}

std::vector<double> search_thresholds(const ExperimentSpec& spec, const dist::FederationDataset& ds,
                                      std::string* note) {
  if (!spec.thresholds.empty()) return spec.thresholds;
  const auto grid = selection::default_grid(spec.sizes, spec.classes);
  const auto r = selection::parameter_search(ds.clients, spec.classes, spec.sizes, grid, spec.search_tries, spec.k,
                                             spec.selection_seed);
  if (note != nullptr) *note = "thresholds from plaintext search: " + join(r.best_thresholds) + "\n";
  return r.best_thresholds;
}

}  // namespace

std::vector<double> dubhe_probabilities(const dist::FederationDataset& dataset, const std::vector<std::size_t>& sizes,
                                        const std::vector<double>& thresholds, std::size_t participants) {
  const auto scheme = registry::RegistryScheme::with_free_thresholds(dataset.num_classes, sizes, thresholds);
  std::vector<registry::Registration> regs;
  std::vector<registry::Registry> raw;
  regs.reserve(dataset.clients.size());
  for (const auto& h : dataset.clients) {
    regs.push_back(registry::register_client(h, scheme));
    raw.push_back(regs.back().registry);
  }
  return selection::participation_probabilities(regs, registry::aggregate(raw), participants);
}

std::vector<EmdRow> emd_table(const dist::FederationDataset& dataset, std::span<const double> probabilities,
                              const std::vector<selection::Strategy>& strategies,
                              const std::vector<std::size_t>& h_list, std::size_t participants,
                              std::size_t repetitions, std::uint64_t seed) {
  const selection::SelectionInputs inputs{dataset.clients, probabilities};
  std::vector<EmdRow> out;
  for (auto strategy : strategies) {
    for (std::size_t h : h_list) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < repetitions; ++r) {
        selection::SelectionConfig cfg;
        cfg.participants = participants;
        cfg.tries = h;
        cfg.strategy = strategy;
        cfg.seed = derive_seed(seed, {r});
        const double e = selection::multi_time_select(inputs, cfg).emd_star;
        sum += e;
        sq += e * e;
      }
      const double n = static_cast<double>(repetitions);
      const double mean = sum / n;
      out.push_back({strategy, h, mean, std::sqrt(std::max(0.0, sq / n - mean * mean))});
    }
  }
  return out;
}

CommandResult cmd_gen_data(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  const auto ds = load_or_generate(spec);
  CommandResult result;
  const auto txt = dir / "dataset.txt";
  {
    auto out = open_out(txt);
    dist::write_dataset_text(out, ds);
  }
  const auto json = dir / "dataset.json";
  {
    auto out = open_out(json);
    out << dist::dataset_to_json(ds) << '\n';
  }
  result.outputs = {txt, json};
  write_manifest(dir, "gen-data", spec, result);
  std::ostringstream os;
  os << "clients " << ds.num_clients << ", classes " << ds.num_classes << ", N_VC " << ds.samples_per_client << '\n'
     << "rho target " << ds.rho_target << ", realized " << ds.rho_realized << '\n'
     << "EMD^avg target " << ds.emd_target << ", realized " << ds.emd_realized << '\n'
     << "mixing " << ds.mixing << ", one-class fraction " << ds.one_class_fraction << '\n';
  result.summary = os.str();
  return result;
}

CommandResult cmd_search(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  const auto ds = load_or_generate(spec);
  const auto grid = spec.thresholds.empty() ? selection::default_grid(spec.sizes, spec.classes)
                                            : std::vector<std::vector<double>>{spec.thresholds};
  protocol::ProtocolOptions opts;
  opts.key_bits = spec.key_bits;
  opts.allow_insecure_keys = spec.key_bits < crypto::kMinSecureBits;
  Rng rng(derive_seed(spec.selection_seed, {0x736561726368ULL}));
  const auto phase = protocol::run_parameter_search_phase(ds, spec.sizes, grid, spec.search_tries, spec.k,
                                                          spec.selection_seed, opts, rng);

  CommandResult result;
  const auto csv = dir / "search.csv";
  {
    auto out = open_out(csv);
    out << "index,sigma,valid,score,support,reason\n";
    out.precision(10);
    for (std::size_t i = 0; i < phase.result.trace.size(); ++i) {
      const auto& p = phase.result.trace[i];
      out << i << ",\"" << join(p.thresholds) << "\"," << (p.valid ? 1 : 0) << ',';
      if (p.valid) {
        out << p.score << ',' << p.support << ",\n";
      } else {
        out << ",,\"" << p.reason << "\"\n";
      }
    }
  }
  const auto json = dir / "search.json";
  {
    nlohmann::ordered_json j;
    j["best_index"] = phase.server_verdict;
    j["best_sigma"] = phase.result.best_thresholds;
    j["best_score"] = phase.result.best_score;
    j["agent"] = phase.agent;
    j["key_bits"] = spec.key_bits;
    auto out = open_out(json);
    out << j.dump(2) << '\n';
  }
  const auto overhead = dir / "search-overhead.json";
  {
    auto out = open_out(overhead);
    out << phase.report.to_json() << '\n';
  }
  result.outputs = {csv, json, overhead};
  write_manifest(dir, "search", spec, result);
  std::ostringstream os;
  os << "grid points " << grid.size() << ", H " << spec.search_tries << ", K " << spec.k << '\n'
     << "best sigma " << join(phase.result.best_thresholds) << " (score " << phase.result.best_score << ")\n";
  if (opts.allow_insecure_keys) os << "note: " << spec.key_bits << "-bit keys are for simulation only\n";
  result.summary = os.str();
  return result;
}

CommandResult cmd_run(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  const auto ds = load_or_generate(spec);
  std::string note;
  const auto thresholds = search_thresholds(spec, ds, &note);
  const auto probs = dubhe_probabilities(ds, spec.sizes, thresholds, spec.k);

  CommandResult result;
  std::ostringstream os;
  os << note;
  if (spec.emd_only) {
    const auto rows = emd_table(ds, probs, spec.strategies, spec.h_list, spec.k, spec.selection_rounds,
                                spec.selection_seed);
    const auto csv = dir / "emd_table.csv";
    auto out = open_out(csv);
    out << "strategy,h,mean_emd_star,std_emd_star,repetitions\n";
    out.precision(10);
    os << "strategy   H   mean EMD*\n";
    for (const auto& r : rows) {
      out << selection::to_string(r.strategy) << ',' << r.tries << ',' << r.mean_emd << ',' << r.std_emd << ','
          << spec.selection_rounds << '\n';
      char line[96];
      std::snprintf(line, sizeof line, "%-8s %3zu   %.4f\n", selection::to_string(r.strategy).c_str(), r.tries,
                    r.mean_emd);
      os << line;
    }
    result.outputs = {csv};
  } else {
    const auto task = fl::SyntheticTask::make(spec.classes, spec.dim, spec.noise, spec.task_seed);
    fl::ExperimentConfig ex;
    ex.strategies = spec.strategies;
    ex.sizes = spec.sizes;
    ex.thresholds = thresholds;
    ex.tries = spec.h;
    ex.test_per_class = spec.test_per_class;
    ex.workers = spec.workers;
    const auto trace = fl::run_experiment(ds, task, ex, spec.train_config(), spec.seeds);

    const auto traces = dir / "traces.csv";
    {
      auto out = open_out(traces);
      fl::write_trace_csv(out, trace);
    }
    const auto summary_csv = dir / "summary.csv";
    nlohmann::ordered_json summary;
    {
      auto out = open_out(summary_csv);
      out << "strategy,seed,last50_accuracy,mean_emd_po_pu,final_weight_divergence\n";
      out.precision(10);
      os << "strategy   mean accuracy over last 50 rounds (per-seed mean)\n";
      for (auto strategy : spec.strategies) {
        double acc_sum = 0.0;
        for (auto seed : spec.seeds) {
          const double acc = fl::tail_accuracy(trace, strategy, seed);
          double emd_sum = 0.0, div = 0.0;
          std::size_t n = 0;
          for (const auto& r : trace) {
            if (r.strategy != strategy || r.seed != seed) continue;
            emd_sum += r.emd_po_pu;
            div = r.weight_divergence;
            ++n;
          }
          out << selection::to_string(strategy) << ',' << seed << ',' << acc << ',' << emd_sum / n << ',' << div
              << '\n';
          acc_sum += acc;
        }
        const double mean = acc_sum / static_cast<double>(spec.seeds.size());
        summary[selection::to_string(strategy)] = mean;
        char line[96];
        std::snprintf(line, sizeof line, "%-8s   %.4f\n", selection::to_string(strategy).c_str(), mean);
        os << line;
      }
    }
    const auto summary_json = dir / "summary.json";
    {
      nlohmann::ordered_json j;
      j["metric"] = "mean accuracy over the last 50 rounds, averaged over seeds";
      j["thresholds"] = thresholds;
      j["by_strategy"] = summary;
      auto out = open_out(summary_json);
      out << j.dump(2) << '\n';
    }
    result.outputs = {traces, summary_csv, summary_json};
  }
  write_manifest(dir, "run", spec, result);
  result.summary = os.str();
  return result;
}

CommandResult cmd_bench_he(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };

  CommandResult result;
  std::ostringstream os;
  const auto csv = dir / "bench_he.csv";
  auto out = open_out(csv);
  out << "key_bits,length,payload_bytes,serialized_bytes,bignum_footprint_bytes,bignum_footprint_kib,keygen_ms,"
         "encrypt_ms,add_ms,decrypt_ms\n";
  out.precision(10);
  for (unsigned bits : spec.bench_bits) {
    Rng rng(derive_seed(spec.seed, {bits}));
    crypto::KeygenOptions kopts;
    kopts.allow_insecure = bits < crypto::kMinSecureBits;
    const auto t0 = clock::now();
    const auto keys = crypto::keygen(bits, rng, kopts);
    const double keygen_ms = ms(clock::now() - t0);

    std::vector<double> xs, ys;
    for (std::size_t len : spec.bench_lengths) {
      double enc = 0.0, add = 0.0, dec = 0.0;
      std::size_t serialized = 0;
      for (std::size_t t = 0; t < spec.bench_trials; ++t) {
        std::vector<std::uint64_t> a(len), b(len);
        for (std::size_t i = 0; i < len; ++i) {
          a[i] = rng.uniform_int(0, 1000);
          b[i] = rng.uniform_int(0, 1000);
        }
        auto s = clock::now();
        const auto ca = crypto::encrypt_vector(keys.public_key, a, rng);
        enc += ms(clock::now() - s);
        const auto cb = crypto::encrypt_vector(keys.public_key, b, rng);
        s = clock::now();
        const auto sum = crypto::add_vectors(keys.public_key, ca, cb);
        add += ms(clock::now() - s);
        s = clock::now();
        const auto plain = crypto::decrypt_vector(keys.secret_key, sum);
        dec += ms(clock::now() - s);
        for (std::size_t i = 0; i < len; ++i) {
          if (plain[i] != a[i] + b[i]) throw crypto::CryptoError("benchmark roundtrip mismatch");
        }
        serialized = crypto::serialize(keys.public_key, ca).size();
      }
      const double n = static_cast<double>(spec.bench_trials);
      const std::size_t footprint = crypto::bignum_object_footprint(bits, len);
      out << bits << ',' << len << ',' << crypto::ciphertext_payload_size(bits, len) << ',' << serialized << ','
          << footprint << ',' << footprint / 1024.0 << ',' << keygen_ms << ',' << enc / n << ',' << add / n << ','
          << dec / n << '\n';
      xs.push_back(static_cast<double>(len));
      ys.push_back(static_cast<double>(serialized));
    }
    // Least-squares fit of serialized size against length.
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    const double r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    os << bits << "-bit keys: keygen " << keygen_ms << " ms, size fit " << (sxx > 0 ? sxy / sxx : 0.0)
       << " B per element, R^2 " << r2 << '\n';
  }
  out.close();
  result.outputs = {csv};
  write_manifest(dir, "bench-he", spec, result);
  result.summary = os.str();
  return result;
}

CommandResult cmd_overhead(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  const auto ds = load_or_generate(spec);
  std::string note;
  const auto thresholds = search_thresholds(spec, ds, &note);
  const auto scheme = registry::RegistryScheme::with_free_thresholds(spec.classes, spec.sizes, thresholds);

  protocol::ProtocolOptions opts;
  opts.key_bits = spec.key_bits;
  opts.allow_insecure_keys = spec.key_bits < crypto::kMinSecureBits;
  Rng rng(derive_seed(spec.selection_seed, {0x6f76657268656164ULL}));
  const auto reg = protocol::run_registration_round(ds, scheme, opts, rng);

  std::vector<protocol::OverheadReport> selection_reports;
  std::vector<std::string> lines;
  for (const auto& e : reg.transcript) lines.push_back(protocol::format_transcript_line(e, reg.agent));
  std::uint64_t expected_uploads = 0;
  for (std::size_t r = 0; r < spec.selection_rounds; ++r) {
    selection::SelectionConfig cfg;
    cfg.participants = spec.k;
    cfg.tries = spec.h;
    cfg.strategy = selection::Strategy::kDubhe;
    cfg.seed = derive_seed(spec.selection_seed, {r});
    protocol::ProtocolOptions round_opts = opts;
    round_opts.round = r + 1;
    const auto sel = protocol::run_selection_round(reg, ds, cfg, round_opts, rng);
    for (auto u : sel.uploads_per_try) expected_uploads += u;
    selection_reports.push_back(sel.report);
    for (const auto& e : sel.transcript) lines.push_back(protocol::format_transcript_line(e, reg.agent));
  }
  const auto selection_total = protocol::overhead_report_merge(selection_reports);
  const std::vector<protocol::OverheadReport> both{reg.report, selection_total};
  const auto total = protocol::overhead_report_merge(both);

  CommandResult result;
  const auto json = dir / "overhead.json";
  {
    nlohmann::ordered_json j;
    j["key_bits"] = spec.key_bits;
    j["registry_length"] = scheme.length();
    j["registration"] = nlohmann::ordered_json::parse(reg.report.to_json());
    j["selection"] = nlohmann::ordered_json::parse(selection_total.to_json());
    j["total"] = nlohmann::ordered_json::parse(total.to_json());
    j["checks"] = {
        {"registration_uploads", reg.report.of(protocol::MessageKind::kRegistryUpload).communications},
        {"clients", ds.clients.size()},
        {"selection_uploads", selection_total.of(protocol::MessageKind::kDistributionUpload).communications},
        {"sum_of_try_uploads", expected_uploads},
        {"h_times_k_times_rounds", spec.h * spec.k * spec.selection_rounds}};
    auto out = open_out(json);
    out << j.dump(2) << '\n';
  }
  const auto transcript = dir / "transcript.txt";
  {
    auto out = open_out(transcript);
    out << "# round phase kind sender receiver bytes payload\n";
    for (const auto& l : lines) out << l << '\n';
  }
  result.outputs = {json, transcript};
  write_manifest(dir, "overhead", spec, result);

  std::ostringstream os;
  os << note << "registration: " << reg.report.of(protocol::MessageKind::kRegistryUpload).communications
     << " uploads (N = " << ds.clients.size() << "), "
     << reg.report.of(protocol::MessageKind::kRegistryUpload).bytes / ds.clients.size() << " B each\n"
     << "selection: " << selection_total.of(protocol::MessageKind::kDistributionUpload).communications
     << " uploads over " << spec.selection_rounds << " rounds (H K = " << spec.h * spec.k << " per round)\n"
     << "total: " << total.total_communications() << " communications, " << total.total_bytes() << " B\n";
  result.summary = os.str();
  return result;
}

CommandResult cmd_codebook_dump(const ExperimentSpec& spec) {
  spec.validate();
  const auto dir = prepare_dir(spec);
  std::vector<double> free = spec.thresholds;
  if (free.empty()) free.assign(spec.sizes.size() - 1, 0.0);
  const auto scheme = registry::RegistryScheme::with_free_thresholds(spec.classes, spec.sizes, free);
  std::ostringstream os;
  os << "# slot size category   (C = " << spec.classes << ", G = {" << join(spec.sizes) << "}, l = " << scheme.length()
     << ")\n";
  scheme.dump_codebook(os);
  CommandResult result;
  const auto path = dir / "codebook.txt";
  {
    auto out = open_out(path);
    out << os.str();
  }
  result.outputs = {path};
  write_manifest(dir, "codebook-dump", spec, result);
  result.summary = os.str();
  return result;
}

}  // namespace dubhe::experiment
