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

#ifndef DUBHE_PAILLIER_HPP_
#define DUBHE_PAILLIER_HPP_

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dubhe/random.hpp"

namespace dubhe::crypto {

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Paillier public key with generator fixed to g = n + 1.
struct PublicKey {
  mpz_class n;
  mpz_class n_squared;
  mpz_class g;
  unsigned bit_length = 0;

  /// Width in bytes of one serialized ciphertext: 2 * bit_length / 8, rounded up.
  std::size_t ciphertext_bytes() const { return (2 * static_cast<std::size_t>(bit_length) + 7) / 8; }
  /// Width in bytes of n.
  std::size_t modulus_bytes() const { return (static_cast<std::size_t>(bit_length) + 7) / 8; }

  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.n == b.n; }
};

struct SecretKey {
  mpz_class lambda;  // lcm(p - 1, q - 1)
  mpz_class mu;      // L(g^lambda mod n^2)^-1 mod n
  PublicKey public_key;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

struct Ciphertext {
  mpz_class value;
  friend bool operator==(const Ciphertext& a, const Ciphertext& b) { return a.value == b.value; }
};

using EncryptedVector = std::vector<Ciphertext>;

struct KeygenOptions {
  /// Keys below 1024 bits are refused unless this is set.
  bool allow_insecure = false;
  int miller_rabin_rounds = 40;
  int max_attempts = 10000;
};

inline constexpr unsigned kMinSecureBits = 1024;
inline constexpr unsigned kMinTestBits = 64;

/// Generates a keypair whose modulus has exactly `bit_length` bits from two
/// distinct bit_length/2-bit primes. Deterministic in the state of `rng`.
KeyPair keygen(unsigned bit_length, Rng& rng, const KeygenOptions& options = {});

/// Builds a keypair from caller-supplied primes. Intended for exhaustive tests
/// with tiny moduli; performs no primality check beyond p != q and
/// gcd(pq, (p-1)(q-1)) = 1.
KeyPair keypair_from_primes(const mpz_class& p, const mpz_class& q);

/// Miller-Rabin with `rounds` random bases drawn from `rng`, after trial
/// division by small primes.
bool is_probable_prime(const mpz_class& candidate, int rounds, Rng& rng);

mpz_class random_below(const mpz_class& bound, Rng& rng);
mpz_class random_bits(unsigned bits, Rng& rng);

Ciphertext encrypt(const PublicKey& pk, const mpz_class& message, Rng& rng);
Ciphertext encrypt(const PublicKey& pk, std::uint64_t message, Rng& rng);
/// Encryption with an explicit nonce r, gcd(r, n) = 1. Exposed for known-answer tests.
Ciphertext encrypt_with_nonce(const PublicKey& pk, const mpz_class& message, const mpz_class& nonce);

mpz_class decrypt(const SecretKey& sk, const Ciphertext& c);
std::uint64_t decrypt_u64(const SecretKey& sk, const Ciphertext& c);

/// Homomorphic addition: decrypt(add(a, b)) = (m_a + m_b) mod n.
Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
/// Folds a non-empty list of ciphertexts with add().
Ciphertext sum(const PublicKey& pk, std::span<const Ciphertext> values);

EncryptedVector encrypt_vector(const PublicKey& pk, std::span<const std::uint64_t> values, Rng& rng);
std::vector<std::uint64_t> decrypt_vector(const SecretKey& sk, const EncryptedVector& values);
EncryptedVector add_vectors(const PublicKey& pk, const EncryptedVector& a, const EncryptedVector& b);

// ---------------------------------------------------------------------------
// Serialization
//
//   integer      : fixed-width big-endian, width = pk.ciphertext_bytes()
//   vector       : u32 big-endian element count, then the elements
//   public key   : u32 big-endian bit length, then n as pk.modulus_bytes()
//                  big-endian bytes
//
// A vector of L ciphertexts under a B-bit key is therefore exactly
// 4 + L * (2B / 8) bytes on the wire.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kVectorLengthPrefixBytes = 4;

std::vector<std::uint8_t> serialize(const PublicKey& pk, const Ciphertext& c);
Ciphertext deserialize_ciphertext(const PublicKey& pk, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize(const PublicKey& pk, const EncryptedVector& v);
EncryptedVector deserialize_vector(const PublicKey& pk, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize(const PublicKey& pk);
PublicKey deserialize_public_key(std::span<const std::uint8_t> bytes);

/// Bytes of the ciphertext payload alone: length * ciphertext width.
std::size_t ciphertext_payload_size(unsigned key_bits, std::size_t length);
/// Bytes of a serialized vector: prefix + payload.
std::size_t ciphertext_serialized_size(unsigned key_bits, std::size_t length);
std::size_t public_key_serialized_size(unsigned key_bits);

/// In-memory footprint of a list of `length` ciphertexts held as
/// arbitrary-precision integers with 30-bit digits: each integer costs a
/// 24-byte object header plus 4 bytes per digit of a (2 * key_bits)-bit
/// value. This is how interpreter-hosted Paillier libraries size their
/// encrypted objects, so it is reported next to the wire size.
std::size_t bignum_object_footprint(unsigned key_bits, std::size_t length);

}  // namespace dubhe::crypto

#endif  // DUBHE_PAILLIER_HPP_
