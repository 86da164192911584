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

#ifndef DUBHE_REGISTRY_HPP_
#define DUBHE_REGISTRY_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dubhe/distributions.hpp"

namespace dubhe::registry {

/// Binomial coefficient; throws on 64-bit overflow.
std::uint64_t binomial(std::size_t n, std::size_t k);

/// Sorted tuple of distinct class indices: a client's dominating classes.
class Category {
 public:
  Category() = default;
  /// Validates strictly increasing indices.
  explicit Category(std::vector<std::size_t> classes);

  std::size_t size() const { return classes_.size(); }
  const std::vector<std::size_t>& classes() const { return classes_; }
  std::string to_string() const;  // "(0,1)"

  friend bool operator==(const Category& a, const Category& b) { return a.classes_ == b.classes_; }
  friend auto operator<=>(const Category& a, const Category& b) { return a.classes_ <=> b.classes_; }

 private:
  std::vector<std::size_t> classes_;
};

/// Lexicographic rank of an i-subset of [C] among all i-subsets.
std::uint64_t rank_combination(const Category& u, std::size_t num_classes);
Category unrank_combination(std::uint64_t rank, std::size_t subset_size, std::size_t num_classes);

/// The codebook: which dominating-class counts exist (G) and the threshold
/// for each. Immutable once built.
class RegistryScheme {
 public:
  /// `sizes` is the reference set G and must contain num_classes;
  /// `thresholds[i]` pairs with sizes[i]. The threshold for size C is forced to 0.
  RegistryScheme(std::size_t num_classes, std::vector<std::size_t> sizes, std::vector<double> thresholds);

  /// Convenience for the common G with thresholds given only for sizes < C.
  static RegistryScheme with_free_thresholds(std::size_t num_classes, std::vector<std::size_t> sizes,
                                             std::span<const double> free_thresholds);

  std::size_t num_classes() const { return num_classes_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  /// Thresholds for every size except C, in G order.
  std::vector<double> free_thresholds() const;
  double threshold_for(std::size_t size) const;
  /// Registry length l = sum over G of C choose i.
  std::size_t length() const { return length_; }
  std::size_t offset_of(std::size_t size) const;
  std::size_t sub_length(std::size_t size) const;

  std::size_t slot_of(const Category& u) const;
  Category category_at(std::size_t slot) const;

  /// One line per slot: "<slot> <i> <category>".
  void dump_codebook(std::ostream& os) const;

 private:
  std::size_t num_classes_;
  std::vector<std::size_t> sizes_;
  std::vector<double> thresholds_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> lengths_;
  std::size_t length_ = 0;
};

/// True when a threshold vector (free sizes only) passes scheme validation.
bool thresholds_valid(const std::vector<std::size_t>& sizes, std::size_t num_classes,
                      std::span<const double> free_thresholds, std::string* reason = nullptr);

/// One-hot registry of a single client.
class Registry {
 public:
  Registry(std::size_t length, std::size_t slot);
  std::size_t length() const { return bits_.size(); }
  std::size_t slot() const { return slot_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  /// Bits widened for encryption.
  std::vector<std::uint64_t> as_counts() const;

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t slot_;
};

class AggregateRegistry {
 public:
  AggregateRegistry() = default;
  explicit AggregateRegistry(std::vector<std::uint64_t> counts);

  std::size_t length() const { return counts_.size(); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t operator[](std::size_t slot) const { return counts_[slot]; }
  /// ||R_A||_0
  std::size_t support() const { return support_; }
  std::uint64_t total() const { return total_; }
  /// R . R_A^T: the count of the registry's own category.
  std::uint64_t count_for(const Registry& r) const;

  friend bool operator==(const AggregateRegistry& a, const AggregateRegistry& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<std::uint64_t> counts_;
  std::size_t support_ = 0;
  std::uint64_t total_ = 0;
};

struct Registration {
  Registry registry;
  Category category;
};

/// Walks G in ascending order; for size i takes the top-i classes by count
/// (ties to the lower class index) and stops at the first i whose i-th
/// largest proportion reaches sigma_i.
Registration register_client(const dist::ClassHistogram& h, const RegistryScheme& scheme);

/// Element-wise sum of plaintext registries.
AggregateRegistry aggregate(std::span<const Registry> registries);

}  // namespace dubhe::registry

#endif  // DUBHE_REGISTRY_HPP_
