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

#ifndef DUBHE_PROTOCOL_HPP_
#define DUBHE_PROTOCOL_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dubhe/distributions.hpp"
#include "dubhe/paillier.hpp"
#include "dubhe/random.hpp"
#include "dubhe/registry.hpp"
#include "dubhe/selection.hpp"

namespace dubhe::protocol {

enum class Role { kServer, kClient, kAgent };

/// Party address on the bus. Clients are 0..N-1.
using PartyId = std::int64_t;
inline constexpr PartyId kServer = -1;

enum class MessageKind : std::size_t {
  kKeyDispatch,
  kRegistryUpload,
  kAggregateBroadcast,
  kDistributionUpload,
  kAggregateDistribution,
  kSelectionNotice,
  kParamDispatch,
  kUploadRequest,  // server asks a client added by cardinality repair to upload
  kVerdict,        // agent -> server: chosen try or chosen grid point
};
inline constexpr std::size_t kMessageKindCount = 9;

enum class Phase : std::size_t { kRegistration, kSelection, kParameterSearch, kTraining };
inline constexpr std::size_t kPhaseCount = 4;

std::string to_string(MessageKind kind);
std::string to_string(Phase phase);

// --- payloads ---------------------------------------------------------------

struct KeyMaterial {
  crypto::KeyPair keys;
};
struct IdSet {
  std::vector<std::size_t> ids;
};
struct Index {
  std::uint32_t value = 0;
};
struct Thresholds {
  std::vector<double> values;
};

using Payload = std::variant<crypto::PublicKey, KeyMaterial, crypto::EncryptedVector, IdSet, Index, Thresholds>;

enum class PayloadType { kPublicKey, kKeyMaterial, kCiphertextVector, kIdSet, kIndex, kThresholds };
std::string to_string(PayloadType type);
PayloadType payload_type(const Payload& payload);

/// Wire size in bytes. Ciphertext vectors and public keys use the crypto
/// serialization; ids and indices are u32, thresholds f64, each list with a
/// u32 length prefix. A secret key is lambda and mu at modulus width.
std::size_t payload_bytes(const Payload& payload, unsigned key_bits);
std::size_t secret_key_serialized_size(unsigned key_bits);

struct Message {
  MessageKind kind = MessageKind::kKeyDispatch;
  Phase phase = Phase::kRegistration;
  PartyId sender = kServer;
  PartyId receiver = kServer;
  std::uint64_t round = 0;
  std::size_t bytes = 0;
  std::shared_ptr<const Payload> payload;
};

// --- accounting -------------------------------------------------------------

struct KindStats {
  std::uint64_t communications = 0;  // logical sends; a broadcast counts once
  std::uint64_t deliveries = 0;      // per-recipient copies
  std::uint64_t bytes = 0;           // summed over deliveries

  friend bool operator==(const KindStats&, const KindStats&) = default;
};

struct OverheadReport {
  std::array<KindStats, kMessageKindCount> kinds{};
  std::array<std::uint64_t, kPhaseCount> phase_communications{};
  std::array<std::uint64_t, kPhaseCount> phase_bytes{};
  std::uint64_t encryptions = 0;
  std::uint64_t decryptions = 0;

  const KindStats& of(MessageKind kind) const { return kinds[static_cast<std::size_t>(kind)]; }
  std::uint64_t total_bytes() const;
  std::uint64_t total_communications() const;
  std::uint64_t total_deliveries() const;
  std::string to_json() const;

  friend bool operator==(const OverheadReport&, const OverheadReport&) = default;
};

/// Componentwise sum; the empty list gives a zero report.
OverheadReport overhead_report_merge(std::span<const OverheadReport> reports);

struct TranscriptEntry {
  std::uint64_t round = 0;
  Phase phase = Phase::kRegistration;
  MessageKind kind = MessageKind::kKeyDispatch;
  PartyId sender = kServer;
  PartyId receiver = kServer;  // meaningless when deliveries > 1
  std::size_t deliveries = 1;
  std::size_t bytes = 0;       // summed over deliveries
  PayloadType payload = PayloadType::kIndex;
  bool to_server = false;
};

/// "round phase kind sender receiver bytes payload", one line per send.
/// Broadcast receivers print as "all:<deliveries>".
std::string format_transcript_line(const TranscriptEntry& entry, PartyId agent);

struct AuditResult {
  std::size_t server_messages = 0;
  std::vector<std::string> violations;
  bool clean() const { return violations.empty(); }
};

/// Checks that everything the server received is a public key, a ciphertext
/// vector, an id set or an index.
AuditResult audit_server_view(std::span<const TranscriptEntry> transcript);

/// In-process bus. Delivery is FIFO per receiver, hence per sender/receiver
/// pair. Every send is logged and counted.
class MessageBus {
 public:
  explicit MessageBus(unsigned key_bits) : key_bits_(key_bits) {}

  void set_round(std::uint64_t round) { round_ = round; }
  void set_agent(PartyId agent) { agent_ = agent; }
  PartyId agent() const { return agent_; }
  void set_key_bits(unsigned key_bits) { key_bits_ = key_bits; }

  void send(MessageKind kind, Phase phase, PartyId sender, PartyId receiver, Payload payload);
  /// One communication, one delivery per receiver, one shared payload.
  void broadcast(MessageKind kind, Phase phase, PartyId sender, std::span<const PartyId> receivers, Payload payload);

  std::optional<Message> receive(PartyId receiver);
  std::size_t pending(PartyId receiver) const;

  void count_encryptions(std::uint64_t n) { report_.encryptions += n; }
  void count_decryptions(std::uint64_t n) { report_.decryptions += n; }

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const OverheadReport& report() const { return report_; }
  std::vector<std::string> transcript_lines() const;

 private:
  void record(const Message& m, std::size_t deliveries);

  unsigned key_bits_;
  std::uint64_t round_ = 0;
  PartyId agent_ = kServer;
  std::map<PartyId, std::deque<Message>> inbox_;
  std::vector<TranscriptEntry> transcript_;
  OverheadReport report_;
};

/// Uniform over [0, N).
std::size_t choose_agent(std::size_t num_clients, Rng& rng);

// --- rounds -----------------------------------------------------------------

struct ProtocolOptions {
  unsigned key_bits = 2048;
  bool allow_insecure_keys = false;  // needed below 1024 bits
  std::uint64_t round = 0;
};

struct RegistrationRound {
  std::size_t agent = 0;
  /// Client-side state. Every client holds the same key pair and decrypted
  /// aggregate; the server only ever held `server_key`.
  crypto::KeyPair client_keys;
  std::vector<registry::Registration> registrations;
  registry::AggregateRegistry aggregate;
  /// Server-side state.
  crypto::PublicKey server_key;
  crypto::EncryptedVector server_folded;

  OverheadReport report;
  std::vector<TranscriptEntry> transcript;
};

/// Key dispatch by a uniformly chosen agent, encrypted registry uploads,
/// homomorphic folding at the server and the aggregate broadcast.
/// `agent` overrides the random choice (the search phase keeps one agent).
RegistrationRound run_registration_round(const dist::FederationDataset& dataset,
                                         const registry::RegistryScheme& scheme, const ProtocolOptions& options,
                                         Rng& rng, std::optional<std::size_t> agent = std::nullopt);

struct SelectionRound {
  selection::SelectionOutcome outcome;
  std::vector<std::size_t> uploads_per_try;  // clients that uploaded in try h
  OverheadReport report;
  std::vector<TranscriptEntry> transcript;
};

/// Multi-time selection over the bus. Randomness of try h comes from
/// selection::try_stream(config.seed, h) exactly as in the plaintext path;
/// `rng` only feeds encryption nonces. Greedy selection is rejected since it
/// needs plaintext histograms at the server.
SelectionRound run_selection_round(const RegistrationRound& registration, const dist::FederationDataset& dataset,
                                   const selection::SelectionConfig& config, const ProtocolOptions& options,
                                   Rng& rng);

struct SearchPhase {
  selection::SearchResult result;  // agent-side scores; the server learns only best_index
  std::size_t agent = 0;
  std::uint32_t server_verdict = 0;
  OverheadReport report;
  std::vector<TranscriptEntry> transcript;
};

/// Grid search with one agent for the whole phase and a fresh key per grid
/// point. For each valid point: ParamDispatch broadcast, re-registration,
/// then H encrypted tries; the agent scores points privately and sends the
/// index of the best one.
SearchPhase run_parameter_search_phase(const dist::FederationDataset& dataset, const std::vector<std::size_t>& sizes,
                                       const std::vector<std::vector<double>>& grid, std::size_t tries,
                                       std::size_t participants, std::uint64_t seed, const ProtocolOptions& options,
                                       Rng& rng);

}  // namespace dubhe::protocol

#endif  // DUBHE_PROTOCOL_HPP_
