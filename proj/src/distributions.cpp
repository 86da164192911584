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

#include "dubhe/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dubhe/diagnostics.hpp"
#include "dubhe/kernels.hpp"
#include "json.hpp"

namespace dubhe::dist {

ClassHistogram::ClassHistogram(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
  total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  double s = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("distribution entries must be finite and >= 0");
    s += p;
  }
  if (std::fabs(s - 1.0) > kSumTolerance) throw std::invalid_argument("distribution must sum to 1");
}

ClassDistribution ClassDistribution::uniform(std::size_t num_classes) {
  if (num_classes == 0) throw std::invalid_argument("uniform distribution needs at least one class");
  return ClassDistribution(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

ClassDistribution ClassDistribution::normalized(std::span<const double> weights) {
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
    s += w;
  }
  if (!(s > 0.0)) throw std::invalid_argument("weights must have a positive sum");
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= s;
  return ClassDistribution(std::move(p));
}

ClassDistribution ClassDistribution::from_histogram(const ClassHistogram& h) {
  if (h.total() == 0) throw std::invalid_argument("histogram is empty");
  std::vector<double> p(h.num_classes());
  const double total = static_cast<double>(h.total());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = static_cast<double>(h[j]) / total;
  return ClassDistribution(std::move(p));
}

double l1_distance(const ClassDistribution& p, const ClassDistribution& q) {
  if (p.num_classes() != q.num_classes()) throw std::invalid_argument("l1_distance: length mismatch");
  return simd::l1_distance(p.probs(), q.probs());
}

namespace {

template <typename T>
double ratio_of(const std::vector<T>& v) {
  if (v.empty()) throw std::invalid_argument("imbalance_ratio: no classes");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo <= T{0}) return kInfiniteRatio;
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

}  // namespace

double imbalance_ratio(const ClassHistogram& h) { return ratio_of(h.counts()); }
double imbalance_ratio(const ClassDistribution& p) { return ratio_of(p.probs()); }

double kl_divergence(const ClassDistribution& p, const ClassDistribution& q) {
  if (p.num_classes() != q.num_classes()) throw std::invalid_argument("kl_divergence: length mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < p.num_classes(); ++j) {
    if (p[j] == 0.0) continue;
    if (q[j] == 0.0) return std::numeric_limits<double>::infinity();
    acc += p[j] * std::log(p[j] / q[j]);
  }
  return acc;
}

ClassDistribution generate_global_proportions(std::size_t num_classes, double rho) {
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (!(rho >= 1.0) || !std::isfinite(rho)) throw std::invalid_argument("imbalance ratio must be >= 1");
  const double span = static_cast<double>(num_classes - 1);
  const double alpha = std::log(rho) / (span * span);
  std::vector<double> w(num_classes);
  for (std::size_t j = 0; j < num_classes; ++j) {
    const double x = static_cast<double>(j);
    w[j] = std::exp(-alpha * x * x);
  }
  return ClassDistribution::normalized(w);
}

ClassDistribution shuffle_classes(const ClassDistribution& p, Rng& rng) {
  std::vector<double> v = p.probs();
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_int(0, i - 1)]);
  }
  return ClassDistribution(std::move(v));
}

std::vector<std::uint64_t> largest_remainder(std::span<const double> weights, std::uint64_t total) {
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("largest_remainder: negative weight");
    s += w;
  }
  std::vector<std::uint64_t> out(weights.size(), 0);
  if (total == 0) return out;
  if (!(s > 0.0)) throw std::invalid_argument("largest_remainder: zero weights");
  std::vector<double> frac(weights.size());
  std::uint64_t assigned = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double quota = weights[j] / s * static_cast<double>(total);
    const double fl = std::floor(quota);
    out[j] = static_cast<std::uint64_t>(fl);
    frac[j] = quota - fl;
    assigned += out[j];
  }
  // Floating error can push the floors past the total; trim from the smallest remainders.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (out[*it] > 0) {
        --out[*it];
        --assigned;
      }
    }
  }
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++out[order[i]];
    ++assigned;
  }
  return out;
}

ClassDistribution population_distribution(std::span<const ClassHistogram> selected) {
  if (selected.empty()) throw std::invalid_argument("population_distribution: empty selection");
  const std::size_t c = selected.front().num_classes();
  std::vector<std::uint64_t> sum(c, 0);
  for (const ClassHistogram& h : selected) {
    if (h.num_classes() != c) throw std::invalid_argument("population_distribution: class count mismatch");
    for (std::size_t j = 0; j < c; ++j) sum[j] += h[j];
  }
  return ClassDistribution::from_histogram(ClassHistogram(std::move(sum)));
}

ClassDistribution population_distribution(std::span<const ClassHistogram> all, std::span<const std::size_t> ids) {
  if (ids.empty()) throw std::invalid_argument("population_distribution: empty selection");
  const std::size_t c = all.empty() ? 0 : all.front().num_classes();
  std::vector<std::uint64_t> sum(c, 0);
  for (std::size_t id : ids) {
    if (id >= all.size()) throw std::out_of_range("population_distribution: client id out of range");
    for (std::size_t j = 0; j < c; ++j) sum[j] += all[id][j];
  }
  return ClassDistribution::from_histogram(ClassHistogram(std::move(sum)));
}

double client_emd(const ClassHistogram& client, const ClassDistribution& population) {
  return l1_distance(ClassDistribution::from_histogram(client), population);
}

double mean_emd(std::span<const ClassHistogram> clients, const ClassDistribution& reference) {
  if (clients.empty()) return 0.0;
  double acc = 0.0;
  for (const ClassHistogram& h : clients) acc += client_emd(h, reference);
  return acc / static_cast<double>(clients.size());
}

std::string to_string(SkewFamily family) {
  switch (family) {
    case SkewFamily::kTwoClass:
      return "two-class";
    case SkewFamily::kOneClass:
      return "one-class";
    case SkewFamily::kAuto:
      return "auto";
  }
  return "auto";
}

SkewFamily parse_skew_family(const std::string& text) {
  if (text == "two-class") return SkewFamily::kTwoClass;
  if (text == "one-class") return SkewFamily::kOneClass;
  if (text == "auto") return SkewFamily::kAuto;
  throw std::invalid_argument("unknown skew family '" + text + "' (expected two-class, one-class or auto)");
}

ClassDistribution FederationDataset::realized_global() const { return population_distribution(clients); }

namespace {

// Dominating classes of one client; second == first for a one-class client.
struct Dominating {
  std::size_t first;
  std::size_t second;
};

std::vector<Dominating> draw_dominating(const ClassDistribution& global, std::size_t n, std::size_t one_class,
                                        Rng& rng) {
  const std::size_t c = global.num_classes();
  std::vector<double> scaled(c);
  for (std::size_t j = 0; j < c; ++j) scaled[j] = global[j];
  const std::vector<std::uint64_t> units_int = largest_remainder(scaled, 2 * n);
  std::vector<double> units(units_int.begin(), units_int.end());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);

  auto take = [&](std::size_t j) { units[j] = std::max(0.0, units[j] - 1.0); };

  std::vector<Dominating> out(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t k = order[idx];
    if (idx < one_class) {
      std::vector<double> w(c, 0.0);
      for (std::size_t j = 0; j < c; ++j) w[j] = units[j] >= 2.0 ? units[j] : 0.0;
      if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w = units;
      if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w = global.probs();
      const std::size_t a = rng.weighted_index(w);
      take(a);
      take(a);
      out[k] = {a, a};
    } else {
      std::vector<double> w = units;
      if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w = global.probs();
      const std::size_t a = rng.weighted_index(w);
      take(a);
      w = units;
      w[a] = 0.0;
      if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) {
        w = global.probs();
        w[a] = 0.0;
      }
      const std::size_t b = rng.weighted_index(w);
      take(b);
      out[k] = {std::min(a, b), std::max(a, b)};
    }
  }
  return out;
}

std::vector<double> skew_vector(const Dominating& d, std::size_t c) {
  std::vector<double> v(c, 0.0);
  if (d.first == d.second) {
    v[d.first] = 1.0;
  } else {
    v[d.first] = 0.5;
    v[d.second] = 0.5;
  }
  return v;
}

double family_max_emd(const ClassDistribution& global, const std::vector<Dominating>& doms) {
  const std::size_t c = global.num_classes();
  double acc = 0.0;
  for (const Dominating& d : doms) acc += simd::l1_distance(skew_vector(d, c), global.probs());
  return acc / static_cast<double>(doms.size());
}

// Mixed real-valued client proportions scaled to N_VC samples.
std::vector<std::vector<double>> client_quotas(const ClassDistribution& global, const std::vector<Dominating>& doms,
                                               double lambda, std::uint64_t nvc) {
  const std::size_t c = global.num_classes();
  std::vector<std::vector<double>> quotas(doms.size(), std::vector<double>(c));
  for (std::size_t k = 0; k < doms.size(); ++k) {
    const std::vector<double> d = skew_vector(doms[k], c);
    for (std::size_t j = 0; j < c; ++j) {
      quotas[k][j] = ((1.0 - lambda) * global[j] + lambda * d[j]) * static_cast<double>(nvc);
    }
  }
  return quotas;
}

// Per-client largest-remainder rounding, then single-sample transfers that
// bring every pooled class total to the rounded pooled quota. Transfers go
// to the client whose rounding most under-served the deficit class relative
// to the surplus class; ties by lowest client id.
std::vector<std::vector<std::uint64_t>> round_counts(const std::vector<std::vector<double>>& quotas,
                                                     std::uint64_t nvc) {
  const std::size_t n = quotas.size();
  const std::size_t c = n == 0 ? 0 : quotas.front().size();
  std::vector<std::vector<std::uint64_t>> counts(n);
  std::vector<double> pooled_quota(c, 0.0);
  std::vector<std::int64_t> pooled(c, 0);
  for (std::size_t k = 0; k < n; ++k) {
    counts[k] = largest_remainder(quotas[k], nvc);
    for (std::size_t j = 0; j < c; ++j) {
      pooled_quota[j] += quotas[k][j];
      pooled[j] += static_cast<std::int64_t>(counts[k][j]);
    }
  }
  const std::vector<std::uint64_t> target = largest_remainder(pooled_quota, nvc * n);
  std::vector<std::int64_t> gap(c);
  for (std::size_t j = 0; j < c; ++j) gap[j] = static_cast<std::int64_t>(target[j]) - pooled[j];

  for (;;) {
    std::size_t deficit = c;
    std::size_t surplus = c;
    for (std::size_t j = 0; j < c; ++j) {
      if (gap[j] > 0 && deficit == c) deficit = j;
      if (gap[j] < 0 && surplus == c) surplus = j;
    }
    if (deficit == c || surplus == c) break;
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (counts[k][surplus] == 0) continue;
      const double under = quotas[k][deficit] - static_cast<double>(counts[k][deficit]);
      const double over = static_cast<double>(counts[k][surplus]) - quotas[k][surplus];
      const double score = under + over;
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (best == n) break;
    --counts[best][surplus];
    ++counts[best][deficit];
    --gap[deficit];
    ++gap[surplus];
  }
  return counts;
}

struct Realization {
  std::vector<ClassHistogram> clients;
  double emd = 0.0;
};

Realization realize(const ClassDistribution& global, const std::vector<Dominating>& doms, double lambda,
                    std::uint64_t nvc) {
  Realization r;
  auto counts = round_counts(client_quotas(global, doms, lambda, nvc), nvc);
  r.clients.reserve(counts.size());
  for (auto& row : counts) r.clients.emplace_back(std::move(row));
  r.emd = mean_emd(r.clients, global);
  return r;
}

}  // namespace

FederationDataset generate_client_partitions(const ClassDistribution& global, std::size_t num_clients,
                                             std::uint64_t samples_per_client, double target_emd, Rng& rng,
                                             const PartitionOptions& options) {
  const std::size_t c = global.num_classes();
  if (c < 2) throw std::invalid_argument("need at least two classes");
  if (num_clients == 0) throw std::invalid_argument("need at least one client");
  if (samples_per_client == 0) throw std::invalid_argument("samples per client must be positive");
  if (!(target_emd >= 0.0) || !(target_emd < 2.0)) throw std::invalid_argument("EMD target must be in [0, 2)");

  constexpr double kFeasibilityMargin = 0.01;
  constexpr double kRealizedTolerance = 0.02;

  std::vector<std::size_t> one_class_counts;
  switch (options.family) {
    case SkewFamily::kTwoClass:
      one_class_counts = {0};
      break;
    case SkewFamily::kOneClass:
      one_class_counts = {num_clients};
      break;
    case SkewFamily::kAuto:
      for (int tenth = 0; tenth <= 10; ++tenth) one_class_counts.push_back(num_clients * tenth / 10);
      break;
  }

  const std::uint64_t family_seed = rng();
  std::vector<Dominating> doms;
  std::size_t chosen_one_class = 0;
  double max_emd = -1.0;
  for (std::size_t i = 0; i < one_class_counts.size(); ++i) {
    Rng family_rng(derive_seed(family_seed, {i}));
    doms = draw_dominating(global, num_clients, one_class_counts[i], family_rng);
    chosen_one_class = one_class_counts[i];
    max_emd = family_max_emd(global, doms);
    if (target_emd == 0.0 || max_emd >= target_emd + kFeasibilityMargin) break;
  }
  if (target_emd > 0.0 && max_emd < target_emd + kFeasibilityMargin) {
    std::ostringstream msg;
    msg << "EMD target " << target_emd << " is infeasible: the " << to_string(options.family)
        << " skew family reaches at most " << std::setprecision(4) << max_emd;
    throw InfeasibleTarget(msg.str());
  }

  // Bisection on the realized (post-rounding) mean distance.
  double lo = 0.0;
  double hi = 1.0;
  double lambda = 0.0;
  Realization best = realize(global, doms, 0.0, samples_per_client);
  // With lambda = 0 every client is p_g rounded to N_VC samples; targets
  // below that rounding floor are served by the floor itself.
  const double rounding_floor = best.emd;
  if (target_emd > rounding_floor) {
    double best_err = std::fabs(best.emd - target_emd);
    for (int it = 0; it < options.max_bisection_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      Realization r = realize(global, doms, mid, samples_per_client);
      const double err = std::fabs(r.emd - target_emd);
      const bool below = r.emd < target_emd;
      if (err < best_err) {
        best_err = err;
        best = std::move(r);
        lambda = mid;
      }
      if (best_err <= options.bisection_tolerance) break;
      (below ? lo : hi) = mid;
    }
  }
  if (target_emd <= rounding_floor) {
    if (rounding_floor - target_emd > kRealizedTolerance) {
      std::ostringstream msg;
      msg << "EMD target " << target_emd << " is below the rounding floor " << std::setprecision(4) << rounding_floor
          << " of " << samples_per_client << " samples per client; using lambda = 0";
      warn(msg.str());
    }
  } else if (std::fabs(best.emd - target_emd) > kRealizedTolerance) {
    std::ostringstream msg;
    msg << "could not realize EMD target " << target_emd << " after rounding (closest " << best.emd << ")";
    throw InfeasibleTarget(msg.str());
  }

  FederationDataset ds;
  ds.num_classes = c;
  ds.num_clients = num_clients;
  ds.samples_per_client = samples_per_client;
  ds.clients = std::move(best.clients);
  ds.global = global;
  ds.rho_target = imbalance_ratio(global);
  ds.rho_realized = imbalance_ratio(ds.realized_global());
  ds.emd_target = target_emd;
  ds.emd_realized = best.emd;
  ds.mixing = lambda;
  ds.one_class_fraction = static_cast<double>(chosen_one_class) / static_cast<double>(num_clients);
  ds.family = options.family;
  return ds;
}

FederationDataset make_dataset(const DatasetParams& params) {
  Rng rng(params.seed);
  ClassDistribution global = generate_global_proportions(params.num_classes, params.rho);
  if (params.shuffle_classes) global = shuffle_classes(global, rng);
  PartitionOptions options;
  options.family = params.family;
  FederationDataset ds =
      generate_client_partitions(global, params.num_clients, params.samples_per_client, params.emd, rng, options);
  ds.rho_target = params.rho;
  ds.shuffled_classes = params.shuffle_classes;
  ds.seed = params.seed;
  return ds;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_dataset_text(std::ostream& os, const FederationDataset& ds) {
  os << "# dubhe-dataset v1\n";
  os << "# classes = " << ds.num_classes << "\n";
  os << "# clients = " << ds.num_clients << "\n";
  os << "# samples_per_client = " << ds.samples_per_client << "\n";
  os << "# rho_target = " << fmt_double(ds.rho_target) << "\n";
  os << "# rho_realized = " << fmt_double(ds.rho_realized) << "\n";
  os << "# emd_target = " << fmt_double(ds.emd_target) << "\n";
  os << "# emd_realized = " << fmt_double(ds.emd_realized) << "\n";
  os << "# mixing = " << fmt_double(ds.mixing) << "\n";
  os << "# one_class_fraction = " << fmt_double(ds.one_class_fraction) << "\n";
  os << "# family = " << to_string(ds.family) << "\n";
  os << "# shuffled_classes = " << (ds.shuffled_classes ? 1 : 0) << "\n";
  os << "# seed = " << ds.seed << "\n";
  os << "# global =";
  for (double p : ds.global.probs()) os << ' ' << fmt_double(p);
  os << "\n";
  for (std::size_t k = 0; k < ds.clients.size(); ++k) {
    os << k;
    for (std::uint64_t v : ds.clients[k].counts()) os << ' ' << v;
    os << '\n';
  }
}

FederationDataset read_dataset_text(std::istream& is) {
  FederationDataset ds;
  std::string line;
  if (!std::getline(is, line) || line != "# dubhe-dataset v1") {
    throw std::invalid_argument("not a dubhe dataset file (missing header)");
  }
  std::vector<double> global;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      std::istringstream value(line.substr(eq + 1));
      if (key == "classes") value >> ds.num_classes;
      else if (key == "clients") value >> ds.num_clients;
      else if (key == "samples_per_client") value >> ds.samples_per_client;
      else if (key == "rho_target") value >> ds.rho_target;
      else if (key == "rho_realized") value >> ds.rho_realized;
      else if (key == "emd_target") value >> ds.emd_target;
      else if (key == "emd_realized") value >> ds.emd_realized;
      else if (key == "mixing") value >> ds.mixing;
      else if (key == "one_class_fraction") value >> ds.one_class_fraction;
      else if (key == "seed") value >> ds.seed;
      else if (key == "shuffled_classes") { int b = 0; value >> b; ds.shuffled_classes = b != 0; }
      else if (key == "family") { std::string f; value >> f; ds.family = parse_skew_family(f); }
      else if (key == "global") { double p; while (value >> p) global.push_back(p); }
      continue;
    }
    std::istringstream row(line);
    std::size_t id = 0;
    row >> id;
    if (id != ds.clients.size()) throw std::invalid_argument("client ids must be consecutive from 0");
    std::vector<std::uint64_t> counts(ds.num_classes);
    for (auto& v : counts) {
      if (!(row >> v)) throw std::invalid_argument("client row has too few counts");
    }
    ds.clients.emplace_back(std::move(counts));
  }
  if (ds.clients.size() != ds.num_clients) throw std::invalid_argument("client count does not match header");
  ds.global = global.empty() ? ds.realized_global() : ClassDistribution::normalized(global);
  return ds;
}

std::string dataset_to_json(const FederationDataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = "dubhe-dataset";
  j["version"] = 1;
  j["classes"] = ds.num_classes;
  j["clients"] = ds.num_clients;
  j["samples_per_client"] = ds.samples_per_client;
  j["rho_target"] = ds.rho_target;
  j["rho_realized"] = ds.rho_realized;
  j["emd_target"] = ds.emd_target;
  j["emd_realized"] = ds.emd_realized;
  j["mixing"] = ds.mixing;
  j["one_class_fraction"] = ds.one_class_fraction;
  j["family"] = to_string(ds.family);
  j["shuffled_classes"] = ds.shuffled_classes;
  j["seed"] = ds.seed;
  j["global"] = ds.global.probs();
  auto& rows = j["histograms"] = nlohmann::ordered_json::array();
  for (const ClassHistogram& h : ds.clients) rows.push_back(h.counts());
  return j.dump(2);
}

}  // namespace dubhe::dist
