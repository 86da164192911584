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

#include "dubhe/protocol.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "dubhe/diagnostics.hpp"
#include "json.hpp"

namespace dubhe::protocol {

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kKeyDispatch:
      return "KeyDispatch";
    case MessageKind::kRegistryUpload:
      return "RegistryUpload";
    case MessageKind::kAggregateBroadcast:
      return "AggregateBroadcast";
    case MessageKind::kDistributionUpload:
      return "DistributionUpload";
    case MessageKind::kAggregateDistribution:
      return "AggregateDistribution";
    case MessageKind::kSelectionNotice:
      return "SelectionNotice";
    case MessageKind::kParamDispatch:
      return "ParamDispatch";
    case MessageKind::kUploadRequest:
      return "UploadRequest";
    case MessageKind::kVerdict:
      return "Verdict";
  }
  return "?";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kRegistration:
      return "registration";
    case Phase::kSelection:
      return "selection";
    case Phase::kParameterSearch:
      return "search";
    case Phase::kTraining:
      return "training";
  }
  return "?";
}

std::string to_string(PayloadType type) {
  switch (type) {
    case PayloadType::kPublicKey:
      return "public-key";
    case PayloadType::kKeyMaterial:
      return "key-material";
    case PayloadType::kCiphertextVector:
      return "ciphertexts";
    case PayloadType::kIdSet:
      return "id-set";
    case PayloadType::kIndex:
      return "index";
    case PayloadType::kThresholds:
      return "thresholds";
  }
  return "?";
}

PayloadType payload_type(const Payload& payload) {
  struct Visitor {
    PayloadType operator()(const crypto::PublicKey&) const { return PayloadType::kPublicKey; }
    PayloadType operator()(const KeyMaterial&) const { return PayloadType::kKeyMaterial; }
    PayloadType operator()(const crypto::EncryptedVector&) const { return PayloadType::kCiphertextVector; }
    PayloadType operator()(const IdSet&) const { return PayloadType::kIdSet; }
    PayloadType operator()(const Index&) const { return PayloadType::kIndex; }
    PayloadType operator()(const Thresholds&) const { return PayloadType::kThresholds; }
  };
  return std::visit(Visitor{}, payload);
}

std::size_t secret_key_serialized_size(unsigned key_bits) { return 2 * (4 + (key_bits + 7) / 8); }

std::size_t payload_bytes(const Payload& payload, unsigned key_bits) {
  struct Visitor {
    unsigned bits;
    std::size_t operator()(const crypto::PublicKey&) const { return crypto::public_key_serialized_size(bits); }
    std::size_t operator()(const KeyMaterial&) const {
      return crypto::public_key_serialized_size(bits) + secret_key_serialized_size(bits);
    }
    std::size_t operator()(const crypto::EncryptedVector& v) const {
      return crypto::ciphertext_serialized_size(bits, v.size());
    }
    std::size_t operator()(const IdSet& s) const { return 4 + 4 * s.ids.size(); }
    std::size_t operator()(const Index&) const { return 4; }
    std::size_t operator()(const Thresholds& t) const { return 4 + 8 * t.values.size(); }
  };
  return std::visit(Visitor{key_bits}, payload);
}

// --- accounting -------------------------------------------------------------

std::uint64_t OverheadReport::total_bytes() const {
  std::uint64_t acc = 0;
  for (const auto& k : kinds) acc += k.bytes;
  return acc;
}

std::uint64_t OverheadReport::total_communications() const {
  std::uint64_t acc = 0;
  for (const auto& k : kinds) acc += k.communications;
  return acc;
}

std::uint64_t OverheadReport::total_deliveries() const {
  std::uint64_t acc = 0;
  for (const auto& k : kinds) acc += k.deliveries;
  return acc;
}

std::string OverheadReport::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_kind = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kMessageKindCount; ++i) {
    const auto& k = kinds[i];
    per_kind[to_string(static_cast<MessageKind>(i))] = {
        {"communications", k.communications}, {"deliveries", k.deliveries}, {"bytes", k.bytes}};
  }
  j["kinds"] = per_kind;
  nlohmann::ordered_json phases = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kPhaseCount; ++i) {
    phases[to_string(static_cast<Phase>(i))] = {{"communications", phase_communications[i]},
                                                {"bytes", phase_bytes[i]}};
  }
  j["phases"] = phases;
  j["total_communications"] = total_communications();
  j["total_deliveries"] = total_deliveries();
  j["total_bytes"] = total_bytes();
  j["encryptions"] = encryptions;
  j["decryptions"] = decryptions;
  return j.dump(2);
}

OverheadReport overhead_report_merge(std::span<const OverheadReport> reports) {
  OverheadReport out;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < kMessageKindCount; ++i) {
      out.kinds[i].communications += r.kinds[i].communications;
      out.kinds[i].deliveries += r.kinds[i].deliveries;
      out.kinds[i].bytes += r.kinds[i].bytes;
    }
    for (std::size_t i = 0; i < kPhaseCount; ++i) {
      out.phase_communications[i] += r.phase_communications[i];
      out.phase_bytes[i] += r.phase_bytes[i];
    }
    out.encryptions += r.encryptions;
    out.decryptions += r.decryptions;
  }
  return out;
}

namespace {

std::string party_name(PartyId id, PartyId agent) {
  if (id == kServer) return "server";
  return (id == agent ? "agent:" : "client:") + std::to_string(id);
}

}  // namespace

std::string format_transcript_line(const TranscriptEntry& e, PartyId agent) {
  std::ostringstream os;
  os << e.round << ' ' << to_string(e.phase) << ' ' << to_string(e.kind) << ' ' << party_name(e.sender, agent) << ' ';
  if (e.deliveries > 1) {
    os << "all:" << e.deliveries;
  } else {
    os << party_name(e.receiver, agent);
  }
  os << ' ' << e.bytes << ' ' << to_string(e.payload);
  return os.str();
}

AuditResult audit_server_view(std::span<const TranscriptEntry> transcript) {
  AuditResult out;
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto& e = transcript[i];
    if (!e.to_server) continue;
    ++out.server_messages;
    switch (e.payload) {
      case PayloadType::kPublicKey:
      case PayloadType::kCiphertextVector:
      case PayloadType::kIdSet:
      case PayloadType::kIndex:
        break;
      default:
        out.violations.push_back("entry " + std::to_string(i) + ": server received " + to_string(e.payload) +
                                 " in " + to_string(e.kind));
    }
  }
  return out;
}

// --- bus --------------------------------------------------------------------

void MessageBus::record(const Message& m, std::size_t deliveries) {
  TranscriptEntry e;
  e.round = m.round;
  e.phase = m.phase;
  e.kind = m.kind;
  e.sender = m.sender;
  e.receiver = m.receiver;
  e.deliveries = deliveries;
  e.bytes = m.bytes * deliveries;
  e.payload = payload_type(*m.payload);
  e.to_server = m.receiver == kServer;
  transcript_.push_back(e);

  auto& k = report_.kinds[static_cast<std::size_t>(m.kind)];
  k.communications += 1;
  k.deliveries += deliveries;
  k.bytes += e.bytes;
  report_.phase_communications[static_cast<std::size_t>(m.phase)] += 1;
  report_.phase_bytes[static_cast<std::size_t>(m.phase)] += e.bytes;
}

void MessageBus::send(MessageKind kind, Phase phase, PartyId sender, PartyId receiver, Payload payload) {
  Message m;
  m.kind = kind;
  m.phase = phase;
  m.sender = sender;
  m.receiver = receiver;
  m.round = round_;
  m.bytes = payload_bytes(payload, key_bits_);
  m.payload = std::make_shared<const Payload>(std::move(payload));
  record(m, 1);
  inbox_[receiver].push_back(std::move(m));
}

void MessageBus::broadcast(MessageKind kind, Phase phase, PartyId sender, std::span<const PartyId> receivers,
                           Payload payload) {
  if (receivers.empty()) return;
  if (receivers.size() > 1 && std::find(receivers.begin(), receivers.end(), kServer) != receivers.end()) {
    throw std::invalid_argument("broadcasts go to clients only; address the server with send()");
  }
  Message m;
  m.kind = kind;
  m.phase = phase;
  m.sender = sender;
  m.receiver = receivers.front();
  m.round = round_;
  m.bytes = payload_bytes(payload, key_bits_);
  m.payload = std::make_shared<const Payload>(std::move(payload));
  record(m, receivers.size());
  for (PartyId r : receivers) {
    Message copy = m;
    copy.receiver = r;
    inbox_[r].push_back(std::move(copy));
  }
}

std::optional<Message> MessageBus::receive(PartyId receiver) {
  auto it = inbox_.find(receiver);
  if (it == inbox_.end() || it->second.empty()) return std::nullopt;
  Message m = std::move(it->second.front());
  it->second.pop_front();
  return m;
}

std::size_t MessageBus::pending(PartyId receiver) const {
  const auto it = inbox_.find(receiver);
  return it == inbox_.end() ? 0 : it->second.size();
}

std::vector<std::string> MessageBus::transcript_lines() const {
  std::vector<std::string> out;
  out.reserve(transcript_.size());
  for (const auto& e : transcript_) out.push_back(format_transcript_line(e, agent_));
  return out;
}

std::size_t choose_agent(std::size_t num_clients, Rng& rng) {
  if (num_clients == 0) throw std::invalid_argument("no clients to choose an agent from");
  return static_cast<std::size_t>(rng.uniform_int(0, num_clients - 1));
}

// --- rounds -----------------------------------------------------------------

namespace {

template <typename T>
const T& expect(const Message& m) {
  const T* p = std::get_if<T>(m.payload.get());
  if (p == nullptr) throw std::logic_error("unexpected payload in " + to_string(m.kind));
  return *p;
}

Message take(MessageBus& bus, PartyId receiver, MessageKind kind) {
  auto m = bus.receive(receiver);
  if (!m) throw std::logic_error("missing " + to_string(kind) + " message");
  if (m->kind != kind) throw std::logic_error("expected " + to_string(kind) + ", got " + to_string(m->kind));
  return std::move(*m);
}

std::vector<PartyId> all_clients(std::size_t n, std::optional<std::size_t> except = std::nullopt) {
  std::vector<PartyId> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (except && *except == k) continue;
    out.push_back(static_cast<PartyId>(k));
  }
  return out;
}

void check_dataset(const dist::FederationDataset& ds) {
  if (ds.clients.empty()) throw std::invalid_argument("dataset has no clients");
}

RegistrationRound register_on_bus(MessageBus& bus, Phase phase, const dist::FederationDataset& ds,
                                  const registry::RegistryScheme& scheme, const ProtocolOptions& options, Rng& rng,
                                  std::size_t agent) {
  const std::size_t n = ds.clients.size();
  RegistrationRound out;
  out.agent = agent;
  bus.set_agent(static_cast<PartyId>(agent));

  // Agent generates the round key and dispatches it.
  crypto::KeygenOptions kopts;
  kopts.allow_insecure = options.allow_insecure_keys;
  crypto::KeyPair keys = crypto::keygen(options.key_bits, rng, kopts);
  bus.set_key_bits(keys.public_key.bit_length);
  const auto others = all_clients(n, agent);
  bus.broadcast(MessageKind::kKeyDispatch, phase, static_cast<PartyId>(agent), others, KeyMaterial{keys});
  bus.send(MessageKind::kKeyDispatch, phase, static_cast<PartyId>(agent), kServer, keys.public_key);
  for (PartyId k : others) take(bus, k, MessageKind::kKeyDispatch);
  out.server_key = expect<crypto::PublicKey>(take(bus, kServer, MessageKind::kKeyDispatch));
  out.client_keys = std::move(keys);
  const crypto::PublicKey& pk = out.client_keys.public_key;

  // Clients register locally and upload encrypted one-hot registries.
  out.registrations.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.registrations.push_back(registry::register_client(ds.clients[k], scheme));
    const auto counts = out.registrations.back().registry.as_counts();
    bus.count_encryptions(counts.size());
    bus.send(MessageKind::kRegistryUpload, phase, static_cast<PartyId>(k), kServer,
             crypto::encrypt_vector(pk, counts, rng));
  }

  // Server folds ciphertexts without any key material beyond pk.
  for (std::size_t k = 0; k < n; ++k) {
    const Message m = take(bus, kServer, MessageKind::kRegistryUpload);
    const auto& v = expect<crypto::EncryptedVector>(m);
    out.server_folded = k == 0 ? v : crypto::add_vectors(out.server_key, out.server_folded, v);
  }
  const auto everyone = all_clients(n);
  bus.broadcast(MessageKind::kAggregateBroadcast, phase, kServer, everyone, out.server_folded);

  // Every client decrypts the same broadcast to the same vector; decrypt once.
  std::optional<std::vector<std::uint64_t>> decrypted;
  for (PartyId k : everyone) {
    const Message m = take(bus, k, MessageKind::kAggregateBroadcast);
    if (!decrypted) decrypted = crypto::decrypt_vector(out.client_keys.secret_key, expect<crypto::EncryptedVector>(m));
  }
  bus.count_decryptions(static_cast<std::uint64_t>(n) * scheme.length());
  out.aggregate = registry::AggregateRegistry(std::move(*decrypted));
  return out;
}

struct TryResult {
  std::vector<std::size_t> selected;
  std::vector<std::uint64_t> counts;  // agent-decrypted class counts of `selected`
  std::size_t uploads = 0;
};

// One tentative selection. Client coins and the server's cardinality repair
// read the try stream in the same order as selection::tentative_selection.
TryResult run_try(MessageBus& bus, Phase phase, const dist::FederationDataset& ds, const RegistrationRound& reg,
                  selection::Strategy strategy, std::span<const double> probabilities, std::size_t participants,
                  std::uint64_t seed, std::size_t h, Rng& nonce_rng) {
  const std::size_t n = ds.clients.size();
  const crypto::PublicKey& pk = reg.client_keys.public_key;
  const auto agent = static_cast<PartyId>(reg.agent);
  Rng stream = selection::try_stream(seed, h);

  auto upload = [&](std::size_t k) {
    const auto& counts = ds.clients[k].counts();
    bus.count_encryptions(counts.size());
    bus.send(MessageKind::kDistributionUpload, phase, static_cast<PartyId>(k), kServer,
             crypto::encrypt_vector(pk, counts, nonce_rng));
  };

  TryResult out;
  std::vector<std::size_t> volunteers;
  switch (strategy) {
    case selection::Strategy::kDubhe:
      volunteers = selection::draw_dubhe(probabilities, stream);
      for (std::size_t k : volunteers) upload(k);
      out.selected = selection::fix_cardinality(volunteers, participants, n, stream);
      break;
    case selection::Strategy::kRandom:
      out.selected = selection::select_random(n, participants, stream);
      break;
    case selection::Strategy::kGreedy:
      throw std::invalid_argument("greedy selection needs plaintext histograms and has no protocol form");
  }

  // Members added by the repair are asked to upload.
  for (std::size_t k : out.selected) {
    if (std::binary_search(volunteers.begin(), volunteers.end(), k)) continue;
    bus.send(MessageKind::kUploadRequest, phase, kServer, static_cast<PartyId>(k), Index{static_cast<std::uint32_t>(h)});
    take(bus, static_cast<PartyId>(k), MessageKind::kUploadRequest);
    upload(k);
  }

  // Server folds the uploads of the final set in id order; dropped volunteers are discarded.
  std::map<std::size_t, crypto::EncryptedVector> received;
  while (auto m = bus.receive(kServer)) {
    if (m->kind != MessageKind::kDistributionUpload) throw std::logic_error("unexpected message at server");
    received.emplace(static_cast<std::size_t>(m->sender), expect<crypto::EncryptedVector>(*m));
  }
  out.uploads = received.size();
  crypto::EncryptedVector folded;
  for (std::size_t k : out.selected) {
    const auto& v = received.at(k);
    folded = folded.empty() ? v : crypto::add_vectors(reg.server_key, folded, v);
  }
  bus.send(MessageKind::kAggregateDistribution, phase, kServer, agent, std::move(folded));

  const Message m = take(bus, agent, MessageKind::kAggregateDistribution);
  const auto& enc = expect<crypto::EncryptedVector>(m);
  out.counts = crypto::decrypt_vector(reg.client_keys.secret_key, enc);
  bus.count_decryptions(enc.size());
  return out;
}

std::vector<double> local_probabilities(const RegistrationRound& reg, std::size_t participants) {
  if (participants >= reg.aggregate.support()) {
    warn("K = " + std::to_string(participants) + " is not below the number of occupied categories (" +
         std::to_string(reg.aggregate.support()) + ")");
  }
  return selection::participation_probabilities(reg.registrations, reg.aggregate, participants);
}

}  // namespace

RegistrationRound run_registration_round(const dist::FederationDataset& dataset,
                                         const registry::RegistryScheme& scheme, const ProtocolOptions& options,
                                         Rng& rng, std::optional<std::size_t> agent) {
  check_dataset(dataset);
  MessageBus bus(options.key_bits);
  bus.set_round(options.round);
  const std::size_t chosen = agent ? *agent : choose_agent(dataset.clients.size(), rng);
  if (chosen >= dataset.clients.size()) throw std::out_of_range("agent id out of range");
  RegistrationRound out = register_on_bus(bus, Phase::kRegistration, dataset, scheme, options, rng, chosen);
  out.report = bus.report();
  out.transcript = bus.transcript();
  return out;
}

SelectionRound run_selection_round(const RegistrationRound& registration, const dist::FederationDataset& dataset,
                                   const selection::SelectionConfig& config, const ProtocolOptions& options,
                                   Rng& rng) {
  check_dataset(dataset);
  if (config.tries == 0) throw std::invalid_argument("H must be at least 1");
  if (config.participants == 0) throw std::invalid_argument("K must be at least 1");
  if (config.participants > dataset.clients.size()) throw std::invalid_argument("K exceeds the number of clients");
  if (registration.registrations.size() != dataset.clients.size()) {
    throw std::invalid_argument("registration does not match the dataset");
  }
  MessageBus bus(registration.client_keys.public_key.bit_length);
  bus.set_round(options.round);
  bus.set_agent(static_cast<PartyId>(registration.agent));

  std::vector<double> probs;
  if (config.strategy == selection::Strategy::kDubhe) probs = local_probabilities(registration, config.participants);

  const auto uniform = dist::ClassDistribution::uniform(dataset.num_classes);
  SelectionRound out;
  auto& best = out.outcome;
  best.emd_star = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> server_sets;  // server's record of each try
  for (std::size_t h = 0; h < config.tries; ++h) {
    TryResult t = run_try(bus, Phase::kSelection, dataset, registration, config.strategy, probs,
                          config.participants, config.seed, h, rng);
    out.uploads_per_try.push_back(t.uploads);
    server_sets.push_back(t.selected);
    // Agent side: p_o of this try and its distance to uniform.
    auto po = dist::ClassDistribution::from_histogram(dist::ClassHistogram(std::move(t.counts)));
    const double emd = dist::l1_distance(po, uniform);
    best.per_try_emd.push_back(emd);
    if (emd < best.emd_star) {
      best.emd_star = emd;
      best.selected = std::move(t.selected);
      best.population = std::move(po);
      best.best_try = h;
    }
  }
  best.tries_used = config.tries;

  const auto agent = static_cast<PartyId>(registration.agent);
  bus.send(MessageKind::kVerdict, Phase::kSelection, agent, kServer, Index{static_cast<std::uint32_t>(best.best_try)});
  const auto verdict = expect<Index>(take(bus, kServer, MessageKind::kVerdict)).value;

  // The server notifies from its own record of try h*.
  if (verdict >= server_sets.size()) throw std::logic_error("verdict out of range");
  const auto& chosen = server_sets[verdict];
  std::vector<PartyId> notified(chosen.begin(), chosen.end());
  bus.broadcast(MessageKind::kSelectionNotice, Phase::kTraining, kServer, notified, IdSet{chosen});
  for (PartyId k : notified) take(bus, k, MessageKind::kSelectionNotice);

  out.report = bus.report();
  out.transcript = bus.transcript();
  return out;
}

SearchPhase run_parameter_search_phase(const dist::FederationDataset& dataset, const std::vector<std::size_t>& sizes,
                                       const std::vector<std::vector<double>>& grid, std::size_t tries,
                                       std::size_t participants, std::uint64_t seed, const ProtocolOptions& options,
                                       Rng& rng) {
  check_dataset(dataset);
  if (grid.empty()) throw std::invalid_argument("parameter grid is empty");
  if (tries == 0) throw std::invalid_argument("H must be at least 1");
  const std::size_t n = dataset.clients.size();
  const std::size_t c = dataset.num_classes;
  MessageBus bus(options.key_bits);
  bus.set_round(options.round);

  SearchPhase out;
  out.agent = choose_agent(n, rng);
  const auto uniform = dist::ClassDistribution::uniform(c);
  auto& result = out.result;
  result.best_score = std::numeric_limits<double>::infinity();
  bool any_valid = false;
  const auto everyone = all_clients(n);

  for (std::size_t g = 0; g < grid.size(); ++g) {
    selection::SearchPoint point;
    point.thresholds = grid[g];
    // Validity is public, so invalid points are skipped without traffic.
    if (!registry::thresholds_valid(sizes, c, grid[g], &point.reason)) {
      result.trace.push_back(std::move(point));
      continue;
    }
    point.valid = true;
    const auto scheme = registry::RegistryScheme::with_free_thresholds(c, sizes, grid[g]);
    bus.broadcast(MessageKind::kParamDispatch, Phase::kParameterSearch, kServer, everyone, Thresholds{grid[g]});
    for (PartyId k : everyone) take(bus, k, MessageKind::kParamDispatch);

    const RegistrationRound reg =
        register_on_bus(bus, Phase::kParameterSearch, dataset, scheme, options, rng, out.agent);
    point.support = reg.aggregate.support();
    const auto probs = selection::participation_probabilities(reg.registrations, reg.aggregate, participants);

    std::vector<double> mean(c, 0.0);
    for (std::size_t h = 0; h < tries; ++h) {
      TryResult t = run_try(bus, Phase::kParameterSearch, dataset, reg, selection::Strategy::kDubhe, probs,
                            participants, seed, h, rng);
      const auto po = dist::ClassDistribution::from_histogram(dist::ClassHistogram(std::move(t.counts)));
      for (std::size_t j = 0; j < c; ++j) mean[j] += po[j];
    }
    point.score = dist::l1_distance(dist::ClassDistribution::normalized(mean), uniform);
    if (!any_valid || point.score < result.best_score) {
      result.best_score = point.score;
      result.best_thresholds = point.thresholds;
      result.best_index = g;
      any_valid = true;
    }
    result.trace.push_back(std::move(point));
  }
  if (!any_valid) throw std::invalid_argument("no valid point in the parameter grid");

  bus.send(MessageKind::kVerdict, Phase::kParameterSearch, static_cast<PartyId>(out.agent), kServer,
           Index{static_cast<std::uint32_t>(result.best_index)});
  out.server_verdict = expect<Index>(take(bus, kServer, MessageKind::kVerdict)).value;
  out.report = bus.report();
  out.transcript = bus.transcript();
  return out;
}

}  // namespace dubhe::protocol
