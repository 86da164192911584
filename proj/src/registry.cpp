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

#include "dubhe/registry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dubhe::registry {

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t out = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // out * (n - k + i) / i stays integral at every step.
    const std::uint64_t num = n - k + i;
    if (out > std::numeric_limits<std::uint64_t>::max() / num) throw std::overflow_error("binomial overflow");
    out = out * num / i;
  }
  return out;
}

Category::Category(std::vector<std::size_t> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 1; i < classes_.size(); ++i) {
    if (classes_[i] <= classes_[i - 1]) throw std::invalid_argument("category indices must be strictly increasing");
  }
}

std::string Category::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < classes_.size(); ++i) os << (i ? "," : "") << classes_[i];
  os << ')';
  return os.str();
}

std::uint64_t rank_combination(const Category& u, std::size_t num_classes) {
  const std::size_t k = u.size();
  if (k == 0 || k > num_classes) throw std::invalid_argument("category size out of range");
  if (u.classes().back() >= num_classes) throw std::invalid_argument("category class index out of range");
  std::uint64_t rank = 0;
  std::size_t next = 0;
  for (std::size_t t = 0; t < k; ++t) {
    // Count the combinations that agree so far and pick a smaller element here.
    for (std::size_t v = next; v < u.classes()[t]; ++v) rank += binomial(num_classes - 1 - v, k - 1 - t);
    next = u.classes()[t] + 1;
  }
  return rank;
}

Category unrank_combination(std::uint64_t rank, std::size_t subset_size, std::size_t num_classes) {
  if (subset_size == 0 || subset_size > num_classes) throw std::invalid_argument("subset size out of range");
  if (rank >= binomial(num_classes, subset_size)) throw std::out_of_range("combination rank out of range");
  std::vector<std::size_t> out;
  out.reserve(subset_size);
  std::size_t v = 0;
  for (std::size_t t = 0; t < subset_size; ++t) {
    for (;; ++v) {
      const std::uint64_t block = binomial(num_classes - 1 - v, subset_size - 1 - t);
      if (rank < block) break;
      rank -= block;
    }
    out.push_back(v++);
  }
  return Category(std::move(out));
}

bool thresholds_valid(const std::vector<std::size_t>& sizes, std::size_t num_classes,
                      std::span<const double> free_thresholds, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason != nullptr) *reason = why;
    return false;
  };
  std::size_t f = 0;
  for (std::size_t size : sizes) {
    if (size == num_classes) continue;
    if (f >= free_thresholds.size()) return fail("too few thresholds for the reference set");
    const double sigma = free_thresholds[f++];
    if (!(sigma >= 0.0 && sigma <= 1.0)) return fail("threshold outside [0, 1]");
    // The i-th largest of C proportions never exceeds 1/i.
    if (sigma > 1.0 / static_cast<double>(size) + 1e-12) {
      std::ostringstream os;
      os << "threshold " << sigma << " for " << size << " dominating classes exceeds 1/" << size
         << ", so that category size could never be reached";
      return fail(os.str());
    }
  }
  if (f != free_thresholds.size()) return fail("too many thresholds for the reference set");
  return true;
}

RegistryScheme::RegistryScheme(std::size_t num_classes, std::vector<std::size_t> sizes,
                               std::vector<double> thresholds)
    : num_classes_(num_classes), sizes_(std::move(sizes)), thresholds_(std::move(thresholds)) {
  if (num_classes_ < 2) throw std::invalid_argument("scheme needs at least two classes");
  if (sizes_.empty()) throw std::invalid_argument("reference set must not be empty");
  if (sizes_.size() != thresholds_.size()) throw std::invalid_argument("one threshold per reference size");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] == 0 || sizes_[i] > num_classes_) throw std::invalid_argument("reference size out of range");
    if (i > 0 && sizes_[i] <= sizes_[i - 1]) throw std::invalid_argument("reference set must be strictly ascending");
  }
  if (sizes_.back() != num_classes_) throw std::invalid_argument("reference set must contain the class count");
  thresholds_.back() = 0.0;
  std::vector<double> free(thresholds_.begin(), thresholds_.end() - 1);
  std::string reason;
  if (!thresholds_valid(sizes_, num_classes_, free, &reason)) throw std::invalid_argument(reason);

  offsets_.reserve(sizes_.size());
  lengths_.reserve(sizes_.size());
  for (std::size_t size : sizes_) {
    offsets_.push_back(length_);
    lengths_.push_back(static_cast<std::size_t>(binomial(num_classes_, size)));
    length_ += lengths_.back();
  }
}

RegistryScheme RegistryScheme::with_free_thresholds(std::size_t num_classes, std::vector<std::size_t> sizes,
                                                    std::span<const double> free_thresholds) {
  std::vector<double> all(free_thresholds.begin(), free_thresholds.end());
  all.push_back(0.0);
  return RegistryScheme(num_classes, std::move(sizes), std::move(all));
}

std::vector<double> RegistryScheme::free_thresholds() const {
  return std::vector<double>(thresholds_.begin(), thresholds_.end() - 1);
}

namespace {

std::size_t index_of(const std::vector<std::size_t>& sizes, std::size_t size) {
  const auto it = std::find(sizes.begin(), sizes.end(), size);
  if (it == sizes.end()) throw std::invalid_argument("size is not in the reference set");
  return static_cast<std::size_t>(it - sizes.begin());
}

}  // namespace

double RegistryScheme::threshold_for(std::size_t size) const { return thresholds_[index_of(sizes_, size)]; }
std::size_t RegistryScheme::offset_of(std::size_t size) const { return offsets_[index_of(sizes_, size)]; }
std::size_t RegistryScheme::sub_length(std::size_t size) const { return lengths_[index_of(sizes_, size)]; }

std::size_t RegistryScheme::slot_of(const Category& u) const {
  return offset_of(u.size()) + static_cast<std::size_t>(rank_combination(u, num_classes_));
}

Category RegistryScheme::category_at(std::size_t slot) const {
  if (slot >= length_) throw std::out_of_range("registry slot out of range");
  std::size_t g = sizes_.size() - 1;
  while (offsets_[g] > slot) --g;
  return unrank_combination(slot - offsets_[g], sizes_[g], num_classes_);
}

void RegistryScheme::dump_codebook(std::ostream& os) const {
  for (std::size_t slot = 0; slot < length_; ++slot) {
    const Category u = category_at(slot);
    os << slot << ' ' << u.size() << ' ' << u.to_string() << '\n';
  }
}

Registry::Registry(std::size_t length, std::size_t slot) : bits_(length, 0), slot_(slot) {
  if (slot >= length) throw std::out_of_range("registry slot out of range");
  bits_[slot] = 1;
}

std::vector<std::uint64_t> Registry::as_counts() const { return {bits_.begin(), bits_.end()}; }

AggregateRegistry::AggregateRegistry(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
  for (std::uint64_t c : counts_) {
    support_ += c != 0 ? 1 : 0;
    total_ += c;
  }
}

std::uint64_t AggregateRegistry::count_for(const Registry& r) const {
  if (r.length() != counts_.size()) throw std::invalid_argument("registry length mismatch");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) acc += r.bits()[i] * counts_[i];
  return acc;
}

Registration register_client(const dist::ClassHistogram& h, const RegistryScheme& scheme) {
  if (h.num_classes() != scheme.num_classes()) throw std::invalid_argument("histogram class count mismatch");
  if (h.total() == 0) throw std::invalid_argument("cannot register an empty histogram");

  // Classes by decreasing count, ties to the lower index.
  std::vector<std::size_t> order(h.num_classes());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });

  const double total = static_cast<double>(h.total());
  for (std::size_t g = 0; g < scheme.sizes().size(); ++g) {
    const std::size_t i = scheme.sizes()[g];
    const double ith_largest = static_cast<double>(h[order[i - 1]]) / total;
    if (ith_largest >= scheme.thresholds()[g]) {
      std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(i));
      std::sort(top.begin(), top.end());
      Category u(std::move(top));
      return Registration{Registry(scheme.length(), scheme.slot_of(u)), std::move(u)};
    }
  }
  // Unreachable: the last size is C with threshold 0.
  throw std::logic_error("registration fell through the reference set");
}

AggregateRegistry aggregate(std::span<const Registry> registries) {
  if (registries.empty()) return AggregateRegistry{};
  std::vector<std::uint64_t> counts(registries.front().length(), 0);
  for (const Registry& r : registries) {
    if (r.length() != counts.size()) throw std::invalid_argument("aggregate: registry length mismatch");
    counts[r.slot()] += 1;
  }
  return AggregateRegistry(std::move(counts));
}

}  // namespace dubhe::registry
