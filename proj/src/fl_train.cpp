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

#include "dubhe/fl_train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "dubhe/diagnostics.hpp"
#include "dubhe/kernels.hpp"
#include "dubhe/registry.hpp"

namespace dubhe::fl {

SyntheticTask SyntheticTask::make(std::size_t num_classes, std::size_t dim, double noise, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("task needs at least two classes");
  if (dim == 0) throw std::invalid_argument("feature dimension must be positive");
  if (!(noise > 0.0)) throw std::invalid_argument("noise scale must be positive");
  SyntheticTask t;
  t.num_classes = num_classes;
  t.dim = dim;
  t.noise = noise;
  t.seed = seed;
  Rng rng(derive_seed(seed, {0x6d65616e73ULL}));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    t.means.assign(num_classes, std::vector<double>(dim));
    for (auto& m : t.means) {
      double norm = 0.0;
      while (!(norm > 1e-12)) {
        for (double& v : m) v = rng.normal();
        norm = std::sqrt(simd::dot(m, m));
      }
      simd::scale(1.0 / norm, m);
    }
    if (t.min_centroid_distance() > 2.0 * noise) return t;
  }
  throw std::invalid_argument("could not place class means more than 2 * noise apart; lower the noise or raise dim");
}

double SyntheticTask::min_centroid_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    for (std::size_t b = a + 1; b < means.size(); ++b) {
      best = std::min(best, std::sqrt(simd::squared_distance(means[a], means[b])));
    }
  }
  return best;
}

void SyntheticTask::sample(std::size_t cls, std::uint64_t stream_seed, std::uint64_t index,
                           std::span<double> out) const {
  SplitMix64 gen(derive_seed(stream_seed, {cls, index}));
  std::normal_distribution<double> normal(0.0, noise);
  const auto& m = means[cls];
  for (std::size_t i = 0; i < dim; ++i) out[i] = m[i] + normal(gen);
}

std::vector<std::uint64_t> LabeledData::label_histogram(std::size_t num_classes) const {
  std::vector<std::uint64_t> out(num_classes, 0);
  for (auto y : labels) out.at(y) += 1;
  return out;
}

LabeledData materialize_client_data(const SyntheticTask& task, const dist::ClassHistogram& histogram,
                                    std::uint64_t seed) {
  if (histogram.num_classes() != task.num_classes) throw std::invalid_argument("histogram/task class mismatch");
  LabeledData out;
  out.dim = task.dim;
  out.features.resize(histogram.total() * task.dim);
  out.labels.reserve(histogram.total());
  std::size_t row = 0;
  for (std::size_t j = 0; j < task.num_classes; ++j) {
    for (std::uint64_t i = 0; i < histogram[j]; ++i, ++row) {
      task.sample(j, seed, i, {out.features.data() + row * task.dim, task.dim});
      out.labels.push_back(static_cast<std::uint32_t>(j));
    }
  }
  return out;
}

LabeledData uniform_dataset(const SyntheticTask& task, std::size_t per_class, std::uint64_t seed) {
  return materialize_client_data(task, dist::ClassHistogram(std::vector<std::uint64_t>(task.num_classes, per_class)),
                                 seed);
}

ModelWeights ModelWeights::zeros(std::size_t num_classes, std::size_t dim) {
  ModelWeights w;
  w.num_classes = num_classes;
  w.dim = dim;
  w.weights.assign(num_classes * dim, 0.0);
  w.bias.assign(num_classes, 0.0);
  return w;
}

bool ModelWeights::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), ok) && std::all_of(bias.begin(), bias.end(), ok);
}

std::string to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& text) {
  if (text == "sgd") return Optimizer::kSgd;
  if (text == "adam") return Optimizer::kAdam;
  throw std::invalid_argument("unknown optimizer '" + text + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (samples_per_client == 0) throw std::invalid_argument("N_VC must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be positive");
  if (participants == 0) throw std::invalid_argument("K must be positive");
}

namespace {

// Logits into `z`, then softmax in place; returns log-sum-exp.
double softmax_row(const ModelWeights& w, std::span<const double> x, std::vector<double>& z) {
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < w.num_classes; ++c) {
    z[c] = simd::dot(w.row(c), x) + w.bias[c];
    zmax = std::max(zmax, z[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < w.num_classes; ++c) {
    z[c] = std::exp(z[c] - zmax);
    total += z[c];
  }
  for (std::size_t c = 0; c < w.num_classes; ++c) z[c] /= total;
  return zmax + std::log(total);
}

}  // namespace

double loss_and_gradient(const ModelWeights& w, const LabeledData& data, std::span<const std::size_t> rows,
                         ModelWeights* gradient) {
  if (data.dim != w.dim) throw std::invalid_argument("data/model dimension mismatch");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  if (rows.empty()) throw std::invalid_argument("no rows to evaluate");
  if (gradient != nullptr) *gradient = ModelWeights::zeros(w.num_classes, w.dim);

  std::vector<double> p(w.num_classes);
  const double inv_m = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    const std::size_t y = data.labels[r];
    const double lse = softmax_row(w, x, p);
    loss += lse - (simd::dot(w.row(y), x) + w.bias[y]);
    if (gradient == nullptr) continue;
    for (std::size_t c = 0; c < w.num_classes; ++c) {
      const double coef = (p[c] - (c == y ? 1.0 : 0.0)) * inv_m;
      simd::axpy(coef, x, gradient->row(c));
      gradient->bias[c] += coef;
    }
  }
  return loss * inv_m;
}

ModelWeights local_train(const ModelWeights& w, const LabeledData& data, const TrainConfig& config,
                         std::uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("local_train: empty dataset");
  ModelWeights out = w;
  if (config.local_epochs == 0) return out;
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ModelWeights grad;
  ModelWeights m1, m2;
  if (config.optimizer == Optimizer::kAdam) {
    m1 = ModelWeights::zeros(w.num_classes, w.dim);
    m2 = m1;
  }
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const double loss = loss_and_gradient(out, data, std::span<const std::size_t>(order).subspan(start, len), &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", step " << step << " (learning rate " << config.learning_rate
           << ")";
        throw std::runtime_error(os.str());
      }
      ++step;
      if (config.optimizer == Optimizer::kSgd) {
        simd::axpy(-config.learning_rate, grad.weights, out.weights);
        simd::axpy(-config.learning_rate, grad.bias, out.bias);
        continue;
      }
      const double b1 = config.adam_beta1, b2 = config.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      auto adam = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          param[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_epsilon);
        }
      };
      adam(out.weights, grad.weights, m1.weights, m2.weights);
      adam(out.bias, grad.bias, m1.bias, m2.bias);
    }
  }
  return out;
}

ModelWeights aggregate(std::span<const ModelWeights> models) {
  if (models.empty()) throw std::invalid_argument("aggregate: no models");
  ModelWeights out = ModelWeights::zeros(models.front().num_classes, models.front().dim);
  for (const auto& m : models) {
    if (!m.same_shape(out)) throw std::invalid_argument("aggregate: shape mismatch");
    simd::axpy(1.0, m.weights, out.weights);
    simd::axpy(1.0, m.bias, out.bias);
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  simd::scale(inv, out.weights);
  simd::scale(inv, out.bias);
  return out;
}

double evaluate(const ModelWeights& w, const LabeledData& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  if (test.dim != w.dim) throw std::invalid_argument("data/model dimension mismatch");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.size(); ++r) {
    const auto x = test.row(r);
    std::size_t arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < w.num_classes; ++c) {
      const double z = simd::dot(w.row(c), x) + w.bias[c];
      if (z > best) {
        best = z;
        arg = c;
      }
    }
    correct += arg == test.labels[r] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double weight_divergence(const ModelWeights& a, const ModelWeights& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("weight_divergence: shape mismatch");
  return std::sqrt(simd::squared_distance(a.weights, b.weights) + simd::squared_distance(a.bias, b.bias));
}

ModelWeights train_reference(const SyntheticTask& task, const TrainConfig& config, std::size_t samples,
                             std::uint64_t seed, std::size_t max_epochs, double tolerance) {
  const std::size_t per_class = std::max<std::size_t>(1, samples / task.num_classes);
  const LabeledData data = uniform_dataset(task, per_class, derive_seed(seed, {0}));
  TrainConfig one = config;
  one.local_epochs = 1;
  ModelWeights w = ModelWeights::zeros(task.num_classes, task.dim);
  ModelWeights grad;
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    w = local_train(w, data, one, derive_seed(seed, {1, epoch}));
    loss_and_gradient(w, data, {}, &grad);
    const double norm = std::sqrt(simd::dot(grad.weights, grad.weights) + simd::dot(grad.bias, grad.bias));
    if (norm < tolerance) break;
  }
  return w;
}

namespace {

struct SharedInputs {
  const dist::FederationDataset* dataset;
  const SyntheticTask* task;
  const ExperimentConfig* experiment;
  const TrainConfig* train;
  std::vector<double> probabilities;
};

std::vector<RoundRecord> run_one(const SharedInputs& in, selection::Strategy strategy, std::uint64_t seed,
                                 const LabeledData& test, const ModelWeights* reference) {
  const auto& clients = in.dataset->clients;
  const auto& train = *in.train;
  const selection::SelectionInputs sel_inputs{clients, in.probabilities};
  const auto uniform = dist::ClassDistribution::uniform(in.dataset->num_classes);

  std::vector<RoundRecord> out;
  out.reserve(train.rounds);
  ModelWeights global = ModelWeights::zeros(in.task->num_classes, in.task->dim);
  std::vector<ModelWeights> locals;
  for (std::size_t round = 1; round <= train.rounds; ++round) {
    selection::SelectionConfig cfg;
    cfg.participants = train.participants;
    cfg.strategy = strategy;
    cfg.tries = strategy == selection::Strategy::kDubhe ? in.experiment->tries : 1;
    cfg.seed = derive_seed(seed, {3, round});
    const auto outcome = selection::multi_time_select(sel_inputs, cfg);

    locals.clear();
    for (std::size_t k : outcome.selected) {
      const LabeledData data = materialize_client_data(*in.task, clients[k], derive_seed(seed, {4, round, k}));
      locals.push_back(local_train(global, data, train, derive_seed(seed, {5, round, k})));
    }
    global = aggregate(locals);

    RoundRecord rec;
    rec.round = round;
    rec.strategy = strategy;
    rec.accuracy = evaluate(global, test);
    rec.emd_po_pu = dist::l1_distance(outcome.population, uniform);
    rec.weight_divergence = reference != nullptr ? weight_divergence(global, *reference) : 0.0;
    rec.seed = seed;
    out.push_back(rec);
  }
  return out;
}

}  // namespace

std::vector<RoundRecord> run_experiment(const dist::FederationDataset& dataset, const SyntheticTask& task,
                                        const ExperimentConfig& experiment, const TrainConfig& train,
                                        std::span<const std::uint64_t> seeds) {
  train.validate();
  if (dataset.num_classes != task.num_classes) throw std::invalid_argument("dataset and task class counts differ");
  if (train.participants > dataset.clients.size()) throw std::invalid_argument("K exceeds the number of clients");
  for (const auto& h : dataset.clients) {
    if (h.total() != train.samples_per_client) throw std::invalid_argument("client size differs from N_VC");
  }
  if (experiment.tries == 0) throw std::invalid_argument("H must be at least 1");

  SharedInputs in{&dataset, &task, &experiment, &train, {}};
  const bool needs_dubhe = std::find(experiment.strategies.begin(), experiment.strategies.end(),
                                     selection::Strategy::kDubhe) != experiment.strategies.end();
  if (needs_dubhe) {
    const auto scheme =
        registry::RegistryScheme::with_free_thresholds(dataset.num_classes, experiment.sizes, experiment.thresholds);
    std::vector<registry::Registration> regs;
    std::vector<registry::Registry> raw;
    for (const auto& h : dataset.clients) {
      regs.push_back(registry::register_client(h, scheme));
      raw.push_back(regs.back().registry);
    }
    in.probabilities = selection::participation_probabilities(regs, registry::aggregate(raw), train.participants);
  }

  // Per-seed test set and reference model, shared by all strategies.
  std::vector<LabeledData> tests;
  std::vector<ModelWeights> references;
  for (std::uint64_t seed : seeds) {
    tests.push_back(uniform_dataset(task, experiment.test_per_class, derive_seed(seed, {1})));
    if (experiment.with_reference) {
      references.push_back(train_reference(task, train, train.participants * train.samples_per_client,
                                           derive_seed(seed, {2})));
    }
  }

  const std::size_t ns = experiment.strategies.size();
  const std::size_t jobs = seeds.size() * ns;
  std::vector<std::vector<RoundRecord>> results(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        const std::size_t s = j / ns;
        results[j] = run_one(in, experiment.strategies[j % ns], seeds[s], tests[s],
                             experiment.with_reference ? &references[s] : nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(experiment.workers, jobs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<RoundRecord> out;
  out.reserve(jobs * train.rounds);
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

double tail_accuracy(std::span<const RoundRecord> trace, selection::Strategy strategy, std::uint64_t seed,
                     std::size_t window) {
  std::vector<double> acc;
  for (const auto& r : trace) {
    if (r.strategy == strategy && r.seed == seed) acc.push_back(r.accuracy);
  }
  if (acc.empty()) throw std::invalid_argument("no records for this strategy and seed");
  const std::size_t n = std::min(window, acc.size());
  return std::accumulate(acc.end() - static_cast<std::ptrdiff_t>(n), acc.end(), 0.0) / static_cast<double>(n);
}

void write_trace_csv(std::ostream& os, std::span<const RoundRecord> trace) {
  os << "round,strategy,accuracy,emd_po_pu,weight_divergence,seed\n";
  os.precision(10);
  for (const auto& r : trace) {
    os << r.round << ',' << selection::to_string(r.strategy) << ',' << r.accuracy << ',' << r.emd_po_pu << ','
       << r.weight_divergence << ',' << r.seed << '\n';
  }
}

}  // namespace dubhe::fl
