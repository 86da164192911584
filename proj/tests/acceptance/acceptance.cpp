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

// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any criterion fails. Pass a list of numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dubhe/diagnostics.hpp"
#include "dubhe/experiment.hpp"
#include "dubhe/fl_train.hpp"
#include "dubhe/paillier.hpp"
#include "dubhe/protocol.hpp"
#include "dubhe/registry.hpp"
#include "dubhe/selection.hpp"

using namespace dubhe;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failed.push_back(what);
    }
  }
};

constexpr std::size_t kParticipants = 20;
constexpr std::uint64_t kSelectionSeed = 7;
const std::vector<std::size_t> kSizes{1, 2, 10};

dist::FederationDataset dataset(double rho, double emd) {
  dist::DatasetParams p;
  p.rho = rho;
  p.emd = emd;
  return dist::make_dataset(p);
}

// Thresholds from the plaintext grid search with 200 tries per point.
// Grid points with few occupied categories clamp probabilities; the search
// only needs their scores, so their warnings are dropped here.
std::vector<double> searched_thresholds(const dist::FederationDataset& ds) {
  const auto grid = selection::default_grid(kSizes, ds.num_classes);
  WarningSink prev = set_warning_sink([](const std::string&) {});
  auto best = selection::parameter_search(ds.clients, ds.num_classes, kSizes, grid, 200, kParticipants, kSelectionSeed)
                  .best_thresholds;
  set_warning_sink(prev);
  return best;
}

std::map<std::pair<selection::Strategy, std::size_t>, double> emd_means(const dist::FederationDataset& ds,
                                                                        const std::vector<double>& thresholds,
                                                                        const std::vector<selection::Strategy>& strategies,
                                                                        const std::vector<std::size_t>& h_list) {
  const auto probs = experiment::dubhe_probabilities(ds, kSizes, thresholds, kParticipants);
  std::map<std::pair<selection::Strategy, std::size_t>, double> out;
  for (const auto& row : experiment::emd_table(ds, probs, strategies, h_list, kParticipants, 100, kSelectionSeed)) {
    out[{row.strategy, row.tries}] = row.mean_emd;
  }
  return out;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1. Homomorphic addition roundtrips.
void criterion_he(Verdict& v) {
  crypto::KeygenOptions insecure;
  insecure.allow_insecure = true;
  Rng rng(101);
  std::size_t ok64 = 0;
  for (int key = 0; key < 100; ++key) {
    const auto kp = crypto::keygen(64, rng, insecure);
    const mpz_class half = kp.public_key.n / 2;
    for (int t = 0; t < 100; ++t) {
      const mpz_class a = crypto::random_below(half, rng), b = crypto::random_below(half, rng);
      const auto c = crypto::add(kp.public_key, crypto::encrypt(kp.public_key, a, rng),
                                 crypto::encrypt(kp.public_key, b, rng));
      if (crypto::decrypt(kp.secret_key, c) == a + b) ++ok64;
    }
  }
  v.require(ok64 == 10000, "64-bit roundtrips");

  const auto big = crypto::keygen(2048, rng);
  std::size_t ok2048 = 0;
  const mpz_class half = big.public_key.n / 2;
  for (int t = 0; t < 100; ++t) {
    const mpz_class a = crypto::random_below(half, rng), b = crypto::random_below(half, rng);
    const auto c = crypto::add(big.public_key, crypto::encrypt(big.public_key, a, rng),
                               crypto::encrypt(big.public_key, b, rng));
    if (crypto::decrypt(big.secret_key, c) == a + b) ++ok2048;
  }
  v.require(ok2048 == 100, "2048-bit roundtrips");

  const auto tiny = crypto::keypair_from_primes(11, 13);
  std::size_t ok_tiny = 0;
  for (unsigned a = 0; a < 50; ++a) {
    for (unsigned b = 0; b < 50; ++b) {
      const auto c = crypto::add(tiny.public_key, crypto::encrypt(tiny.public_key, std::uint64_t{a}, rng),
                                 crypto::encrypt(tiny.public_key, std::uint64_t{b}, rng));
      if (crypto::decrypt_u64(tiny.secret_key, c) == a + b) ++ok_tiny;
    }
  }
  v.require(ok_tiny == 2500, "exhaustive p=11 q=13");
  v.detail << "64-bit " << ok64 << "/10000, 2048-bit " << ok2048 << "/100, exhaustive " << ok_tiny << "/2500";
}

// 2. Expected participant count and per-category mass.
void criterion_identities(Verdict& v) {
  const auto ds = dataset(10.0, 1.5);
  const auto thresholds = searched_thresholds(ds);
  const auto scheme = registry::RegistryScheme::with_free_thresholds(10, kSizes, thresholds);
  std::vector<registry::Registration> regs;
  std::vector<registry::Registry> raw;
  for (const auto& h : ds.clients) {
    regs.push_back(registry::register_client(h, scheme));
    raw.push_back(regs.back().registry);
  }
  const auto agg = registry::aggregate(raw);
  bool clamped = false;
  for (const auto& r : regs) {
    clamped |= double(agg.count_for(r.registry)) * double(agg.support()) < double(kParticipants);
  }
  v.require(!clamped, "probabilities unclamped");
  const auto probs = selection::participation_probabilities(regs, agg, kParticipants);

  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  v.require(std::fabs(total - double(kParticipants)) <= 1e-9, "sum of P = K");
  std::map<std::size_t, double> mass;
  std::map<std::size_t, double> var;
  for (std::size_t k = 0; k < regs.size(); ++k) {
    mass[regs[k].registry.slot()] += probs[k];
    var[regs[k].registry.slot()] += probs[k] * (1 - probs[k]);
  }
  const double target = double(kParticipants) / double(agg.support());
  double worst_mass = 0.0;
  for (const auto& [slot, m] : mass) worst_mass = std::max(worst_mass, std::fabs(m - target));
  v.require(worst_mass <= 1e-9, "category mass = K/support");

  const int draws = 10000;
  double size_sum = 0.0;
  std::map<std::size_t, double> hits;
  for (int t = 0; t < draws; ++t) {
    Rng rng(derive_seed(2024, {std::uint64_t(t)}));
    const auto s = selection::draw_dubhe(probs, rng);
    size_sum += double(s.size());
    for (auto k : s) hits[regs[k].registry.slot()] += 1.0;
  }
  double size_var = 0.0;
  for (double p : probs) size_var += p * (1 - p);
  const double size_z = (size_sum / draws - double(kParticipants)) / std::sqrt(size_var / draws);
  v.require(std::fabs(size_z) <= 3.0, "Monte-Carlo |S| within 3 sigma");
  double worst_z = 0.0;
  for (const auto& [slot, m] : mass) {
    const double z = (hits[slot] / draws - target) / std::sqrt(var[slot] / draws);
    worst_z = std::max(worst_z, std::fabs(z));
  }
  v.require(worst_z <= 3.0, "Monte-Carlo category mass within 3 sigma");
  v.detail << "support " << agg.support() << ", |sum P - K| " << std::fabs(total - double(kParticipants))
           << ", max mass error " << worst_mass << ", |S| z " << fmt(size_z, 2) << ", worst category z "
           << fmt(worst_z, 2);
}

// 3. Dubhe halves the population bias of random selection.
void criterion_unbiasedness(Verdict& v) {
  const auto ds = dataset(10.0, 1.5);
  const auto m = emd_means(ds, searched_thresholds(ds), {selection::Strategy::kRandom, selection::Strategy::kDubhe}, {1});
  const double random = m.at({selection::Strategy::kRandom, 1});
  const double dubhe = m.at({selection::Strategy::kDubhe, 1});
  v.require(dubhe <= 0.5 * random, "Dubhe <= 0.5 x random");
  v.detail << "random " << fmt(random) << ", dubhe " << fmt(dubhe) << ", reduction " << fmt(100 * (1 - dubhe / random), 1)
           << "%";
}

// 4. EMD* against H.
void criterion_multi_time(Verdict& v) {
  const auto ds = dataset(10.0, 1.5);
  const std::vector<std::size_t> hs{1, 2, 5, 10, 20};
  const auto m = emd_means(ds, searched_thresholds(ds), {selection::Strategy::kDubhe, selection::Strategy::kGreedy}, hs);
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  v.detail << "dubhe";
  for (auto h : hs) {
    const double e = m.at({selection::Strategy::kDubhe, h});
    monotone &= e <= prev;
    prev = e;
    v.detail << " H=" << h << ":" << fmt(e);
  }
  v.require(monotone, "monotone in H");
  const double h1 = m.at({selection::Strategy::kDubhe, 1});
  const double h20 = m.at({selection::Strategy::kDubhe, 20});
  v.require(std::fabs(h1 - 0.2946) <= 0.06, "H=1 in 0.2946 +/- 0.06");
  v.require(std::fabs(h20 - 0.1750) <= 0.06, "H=20 in 0.1750 +/- 0.06");
  const double greedy = m.at({selection::Strategy::kGreedy, 1});
  v.require(greedy <= 0.10, "greedy <= 0.10");
  v.detail << ", greedy " << fmt(greedy);
}

// 5. greedy <= Dubhe <= random on every skewed grid point.
void criterion_ordering(Verdict& v) {
  for (double rho : {2.0, 5.0, 10.0}) {
    for (double emd : {0.5, 1.0, 1.5}) {
      const auto ds = dataset(rho, emd);
      const auto m = emd_means(ds, searched_thresholds(ds),
                               {selection::Strategy::kGreedy, selection::Strategy::kDubhe, selection::Strategy::kRandom},
                               {1});
      const double g = m.at({selection::Strategy::kGreedy, 1});
      const double d = m.at({selection::Strategy::kDubhe, 1});
      const double r = m.at({selection::Strategy::kRandom, 1});
      std::ostringstream tag;
      tag << rho << "/" << emd;
      v.require(g <= d && d <= r, "ordering at " + tag.str());
      v.detail << tag.str() << " " << fmt(g, 3) << "<=" << fmt(d, 3) << "<=" << fmt(r, 3) << "; ";
    }
  }
}

// One-sided sign test: P(X >= wins) for X ~ Bin(n, 1/2).
double sign_test(std::size_t wins, std::size_t n) {
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    p += c * std::pow(0.5, double(n));
  }
  return p;
}

// 6. Training effect of balanced selection.
void criterion_training(Verdict& v) {
  const experiment::ExperimentSpec spec;
  const auto task = fl::SyntheticTask::make(spec.classes, spec.dim, spec.noise, spec.task_seed);
  const auto train = spec.train_config();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

  auto tails = [&](double rho, double emd) {
    const auto ds = dataset(rho, emd);
    fl::ExperimentConfig ex;
    ex.thresholds = searched_thresholds(ds);
    ex.with_reference = false;
    ex.workers = workers;
    const auto trace = fl::run_experiment(ds, task, ex, train, seeds);
    std::map<selection::Strategy, std::vector<double>> out;
    for (auto s : ex.strategies)
      for (auto seed : seeds) out[s].push_back(fl::tail_accuracy(trace, s, seed));
    return out;
  };
  auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size()); };

  const auto skewed = tails(10.0, 1.5);
  const auto& r = skewed.at(selection::Strategy::kRandom);
  const auto& d = skewed.at(selection::Strategy::kDubhe);
  const auto& g = skewed.at(selection::Strategy::kGreedy);
  std::size_t wins = 0, trials = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (d[i] == r[i]) continue;
    ++trials;
    if (d[i] > r[i]) ++wins;
  }
  const double p = trials > 0 ? sign_test(wins, trials) : 1.0;
  v.require(mean(d) > mean(r) && p < 0.05, "Dubhe > random (sign test p < 0.05)");
  v.require(mean(g) >= mean(d) - 0.02, "greedy >= Dubhe - 0.02");
  v.detail << "10/1.5: random " << fmt(mean(r)) << ", dubhe " << fmt(mean(d)) << ", greedy " << fmt(mean(g))
           << ", sign " << wins << "/" << trials << " p=" << fmt(p, 4);

  WarningSink prev = set_warning_sink([](const std::string&) {});
  const auto flat = tails(1.0, 0.0);
  set_warning_sink(prev);
  std::vector<double> means;
  for (const auto& [s, acc] : flat) means.push_back(mean(acc));
  const double spread = *std::max_element(means.begin(), means.end()) - *std::min_element(means.begin(), means.end());
  v.require(spread <= 0.02, "1/0 strategies within 0.02");
  v.detail << "; 1/0 spread " << fmt(spread);
}

// 7. Analytic against numeric gradients.
void criterion_gradient(Verdict& v) {
  const auto task = fl::SyntheticTask::make(10, 16, 0.35, 11);
  const auto data = fl::uniform_dataset(task, 5, 1);
  Rng rng(77);
  auto w = fl::ModelWeights::zeros(10, 16);
  for (double& x : w.weights) x = 0.5 * rng.normal();
  for (double& x : w.bias) x = 0.5 * rng.normal();
  fl::ModelWeights grad;
  fl::loss_and_gradient(w, data, {}, &grad);
  const double eps = 1e-6;
  double worst = 0.0;
  for (int probe = 0; probe < 50; ++probe) {
    const bool bias = rng.uniform01() < 0.2;
    auto& params = bias ? w.bias : w.weights;
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, params.size() - 1));
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = fl::loss_and_gradient(w, data, {}, nullptr);
    params[i] = saved - eps;
    const double down = fl::loss_and_gradient(w, data, {}, nullptr);
    params[i] = saved;
    const double analytic = bias ? grad.bias[i] : grad.weights[i];
    const double rel = std::fabs((up - down) / (2 * eps) - analytic) / std::max(1.0, std::fabs(analytic));
    worst = std::max(worst, rel);
  }
  v.require(worst <= 1e-5, "relative error <= 1e-5");
  v.detail << "worst relative error " << worst << " over 50 probes";
}

// 8. Protocol runs equal plaintext runs; the server sees no plaintext.
void criterion_protocol(Verdict& v) {
  WarningSink prev = set_warning_sink([](const std::string&) {});
  const auto ds = dataset(10.0, 1.5);
  const auto thresholds = searched_thresholds(ds);
  const auto scheme = registry::RegistryScheme::with_free_thresholds(10, kSizes, thresholds);
  protocol::ProtocolOptions opts;
  opts.key_bits = 256;
  opts.allow_insecure_keys = true;
  Rng rng(8);
  const auto reg = protocol::run_registration_round(ds, scheme, opts, rng);
  const auto probs = experiment::dubhe_probabilities(ds, kSizes, thresholds, kParticipants);
  std::vector<protocol::TranscriptEntry> all = reg.transcript;
  std::size_t compared = 0, equal = 0;
  for (auto strategy : {selection::Strategy::kDubhe, selection::Strategy::kRandom}) {
    for (std::size_t h : {1, 5, 20}) {
      for (std::uint64_t r = 0; r < 3; ++r) {
        selection::SelectionConfig cfg;
        cfg.participants = kParticipants;
        cfg.tries = h;
        cfg.strategy = strategy;
        cfg.seed = derive_seed(kSelectionSeed, {r});
        const auto run = protocol::run_selection_round(reg, ds, cfg, opts, rng);
        const auto pure = selection::multi_time_select({ds.clients, probs}, cfg);
        ++compared;
        if (run.outcome.selected == pure.selected && run.outcome.best_try == pure.best_try &&
            run.outcome.per_try_emd == pure.per_try_emd)
          ++equal;
        all.insert(all.end(), run.transcript.begin(), run.transcript.end());
      }
    }
  }
  v.require(equal == compared, "selection equivalence");

  const std::vector<std::vector<double>> grid{thresholds, {0.5, 0.2}, {0.9, 0.05}, {0.6, 0.6}};
  const auto phase = protocol::run_parameter_search_phase(ds, kSizes, grid, 5, kParticipants, kSelectionSeed, opts, rng);
  const auto pure = selection::parameter_search(ds.clients, 10, kSizes, grid, 5, kParticipants, kSelectionSeed);
  bool scores = phase.server_verdict == pure.best_index;
  for (std::size_t g = 0; g < grid.size(); ++g) scores &= phase.result.trace[g].score == pure.trace[g].score;
  v.require(scores, "search equivalence");
  all.insert(all.end(), phase.transcript.begin(), phase.transcript.end());
  set_warning_sink(prev);

  const auto audit = protocol::audit_server_view(all);
  v.require(audit.clean(), "server audit");
  v.detail << equal << "/" << compared << " selections identical, search verdict " << phase.server_verdict
           << " (plaintext " << pure.best_index << "), audit " << audit.server_messages << " server messages, "
           << audit.violations.size() << " violations";
}

// 9. Communication counts and payload sizes.
void criterion_overhead(Verdict& v) {
  WarningSink prev = set_warning_sink([](const std::string&) {});
  const auto ds = dataset(10.0, 1.5);
  const auto thresholds = searched_thresholds(ds);
  const auto scheme = registry::RegistryScheme::with_free_thresholds(10, kSizes, thresholds);
  protocol::ProtocolOptions opts;
  opts.key_bits = 256;
  opts.allow_insecure_keys = true;
  Rng rng(9);
  const auto reg = protocol::run_registration_round(ds, scheme, opts, rng);
  v.require(reg.report.of(protocol::MessageKind::kRegistryUpload).communications == ds.clients.size(),
            "registration uploads = N");

  std::uint64_t uploads = 0, expected = 0;
  const std::size_t rounds = 5, h = 20;
  for (std::uint64_t r = 0; r < rounds; ++r) {
    selection::SelectionConfig cfg;
    cfg.participants = kParticipants;
    cfg.tries = h;
    cfg.seed = derive_seed(kSelectionSeed, {r});
    const auto run = protocol::run_selection_round(reg, ds, cfg, opts, rng);
    uploads += run.report.of(protocol::MessageKind::kDistributionUpload).communications;
    for (auto u : run.uploads_per_try) expected += u;
  }
  set_warning_sink(prev);
  v.require(uploads == expected, "selection uploads = sum |S_h|");
  const double per_hk = double(uploads) / double(rounds * h * kParticipants);

  // Registry upload at 2048-bit keys on a ten-client federation.
  dist::DatasetParams small;
  small.num_clients = 10;
  const auto tiny = dist::make_dataset(small);
  protocol::ProtocolOptions secure;
  secure.key_bits = 2048;
  const auto reg2048 = protocol::run_registration_round(tiny, scheme, secure, rng);
  const auto& up = reg2048.report.of(protocol::MessageKind::kRegistryUpload);
  const std::size_t per_upload = up.bytes / up.communications;
  v.require(scheme.length() == 56, "l = 56");
  v.require(crypto::ciphertext_payload_size(2048, 56) == 56 * 512, "raw payload 56 x 512 B");
  v.require(per_upload == 56 * 512 + crypto::kVectorLengthPrefixBytes, "wire upload = raw + length prefix");
  const double framed_kib = double(crypto::bignum_object_footprint(2048, 56)) / 1024.0;
  const double reported = std::round(framed_kib * 100.0) / 100.0;
  v.require(reported >= 29.6 && reported <= 31.28, "framed size within 29.6-31.28 KB");
  v.detail << "registration " << reg.report.of(protocol::MessageKind::kRegistryUpload).communications
           << " uploads, selection " << uploads << " = sum |S_h| (" << fmt(per_hk, 3) << " x HK), 2048-bit upload "
           << per_upload << " B wire, " << fmt(framed_kib, 2) << " KiB framed";
}

// 10. Codebook bijection and registration invariants.
void criterion_codebook(Verdict& v) {
  std::size_t checked = 0;
  bool bijective = true;
  for (std::size_t c = 1; c <= 12; ++c) {
    for (std::size_t i = 1; i <= c; ++i) {
      std::set<std::vector<std::size_t>> seen;
      const auto n = registry::binomial(c, i);
      for (std::uint64_t r = 0; r < n; ++r) {
        const auto u = registry::unrank_combination(r, i, c);
        bijective &= registry::rank_combination(u, c) == r;
        bijective &= seen.insert(u.classes()).second;
        ++checked;
      }
    }
  }
  v.require(bijective, "rank/unrank bijection");

  const auto scheme = registry::RegistryScheme::with_free_thresholds(10, kSizes, std::vector<double>{0.7, 0.1});
  Rng rng(10);
  std::size_t good = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<std::uint64_t> counts(10);
    for (auto& x : counts) x = rng.uniform_int(0, 30) * rng.uniform_int(0, 2);
    if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == 0) counts[rng.uniform_int(0, 9)] = 1;
    const auto a = registry::register_client(dist::ClassHistogram(counts), scheme);
    const auto scale = rng.uniform_int(2, 9);
    for (auto& x : counts) x *= scale;
    const auto b = registry::register_client(dist::ClassHistogram(counts), scheme);
    const auto& bits = a.registry.bits();
    if (std::count(bits.begin(), bits.end(), 1) == 1 && bits.size() == 56 && a.registry.slot() == b.registry.slot())
      ++good;
  }
  v.require(good == 10000, "one-hot and scale invariant");
  v.detail << checked << " ranks checked, " << good << "/10000 histograms one-hot and scale invariant";
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 means no time gate
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "homomorphic encryption correctness", 120, criterion_he},
      {2, "participation probability identities", 0, criterion_identities},
      {3, "bias reduction over random selection", 60, criterion_unbiasedness},
      {4, "multi-time selection trend", 300, criterion_multi_time},
      {5, "strategy ordering on the skewed grid", 0, criterion_ordering},
      {6, "training effect", 900, criterion_training},
      {7, "gradient check", 0, criterion_gradient},
      {8, "protocol equivalence and server audit", 0, criterion_protocol},
      {9, "overhead accounting", 0, criterion_overhead},
      {10, "codebook", 0, criterion_codebook},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      v.require(false, "runtime over " + fmt(c.budget_seconds, 0) + " s");
    }
    if (!v.pass) ++failures;
    std::string failed;
    for (const auto& f : v.failed) failed += (failed.empty() ? " | failed: " : "; ") + f;
    std::printf("[%s] C%d %s: %s (%.1f s)%s\n", v.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), v.detail.str().c_str(),
                secs, failed.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
