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

#include "dubhe/paillier.hpp"

#include <array>
#include <string>

namespace dubhe::crypto {
namespace {

constexpr std::array<unsigned, 54> kSmallPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,  61,
    67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251};

mpz_class from_u64(std::uint64_t v) {
  mpz_class out;
  mpz_import(out.get_mpz_t(), 1, 1, sizeof(v), 0, 0, &v);
  return out;
}

std::uint64_t to_u64(const mpz_class& v) {
  if (sgn(v) < 0 || mpz_sizeinbase(v.get_mpz_t(), 2) > 64) {
    throw CryptoError("plaintext does not fit in 64 bits");
  }
  std::uint64_t out = 0;
  std::size_t count = 0;
  mpz_export(&out, &count, 1, sizeof(out), 0, 0, v.get_mpz_t());
  return count == 0 ? 0 : out;
}

// L(x) = (x - 1) / n
mpz_class l_function(const mpz_class& x, const mpz_class& n) {
  mpz_class out = x - 1;
  mpz_fdiv_q(out.get_mpz_t(), out.get_mpz_t(), n.get_mpz_t());
  return out;
}

mpz_class powm(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

mpz_class generate_prime(unsigned bits, Rng& rng, const KeygenOptions& options) {
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    mpz_class candidate = random_bits(bits, rng);
    // Top two bits set so that a product of two such primes has exactly 2*bits bits.
    mpz_setbit(candidate.get_mpz_t(), bits - 1);
    mpz_setbit(candidate.get_mpz_t(), bits - 2);
    mpz_setbit(candidate.get_mpz_t(), 0);
    if (is_probable_prime(candidate, options.miller_rabin_rounds, rng)) return candidate;
  }
  throw CryptoError("prime search exhausted its retry bound");
}

void write_fixed(const mpz_class& v, std::size_t width, std::vector<std::uint8_t>& out) {
  const std::size_t needed = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (sgn(v) < 0 || needed > width) throw CryptoError("integer does not fit serialization width");
  const std::size_t start = out.size();
  out.resize(start + width, 0);
  std::size_t count = 0;
  if (sgn(v) != 0) {
    mpz_export(out.data() + start + (width - needed), &count, 1, 1, 1, 0, v.get_mpz_t());
  }
}

mpz_class read_fixed(std::span<const std::uint8_t> bytes) {
  mpz_class out;
  if (!bytes.empty()) mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return out;
}

void write_u32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t read_u32(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw CryptoError("truncated length prefix");
  return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) | (std::uint32_t{bytes[2]} << 8) |
         std::uint32_t{bytes[3]};
}

void check_same_key(const PublicKey& pk, const Ciphertext& c) {
  if (sgn(c.value) <= 0 || c.value >= pk.n_squared) {
    throw CryptoError("ciphertext is not in [1, n^2 - 1] for this key");
  }
}

}  // namespace

mpz_class random_bits(unsigned bits, Rng& rng) {
  mpz_class out = 0;
  unsigned remaining = bits;
  while (remaining > 0) {
    const unsigned take = remaining >= 64 ? 64 : remaining;
    std::uint64_t word = rng();
    if (take < 64) word &= (std::uint64_t{1} << take) - 1;
    out <<= take;
    out += from_u64(word);
    remaining -= take;
  }
  return out;
}

mpz_class random_below(const mpz_class& bound, Rng& rng) {
  if (sgn(bound) <= 0) throw std::invalid_argument("random_below: bound must be positive");
  const unsigned bits = static_cast<unsigned>(mpz_sizeinbase(bound.get_mpz_t(), 2));
  for (;;) {
    mpz_class v = random_bits(bits, rng);
    if (v < bound) return v;
  }
}

bool is_probable_prime(const mpz_class& candidate, int rounds, Rng& rng) {
  if (candidate < 2) return false;
  for (unsigned p : kSmallPrimes) {
    if (candidate == p) return true;
    if (mpz_divisible_ui_p(candidate.get_mpz_t(), p) != 0) return false;
  }
  // candidate - 1 = d * 2^s with d odd
  const mpz_class n_minus_1 = candidate - 1;
  mpz_class d = n_minus_1;
  unsigned long s = mpz_scan1(d.get_mpz_t(), 0);
  mpz_fdiv_q_2exp(d.get_mpz_t(), d.get_mpz_t(), s);

  const mpz_class base_range = candidate - 3;  // bases in [2, n - 2]
  for (int round = 0; round < rounds; ++round) {
    const mpz_class a = random_below(base_range, rng) + 2;
    mpz_class x = powm(a, d, candidate);
    if (x == 1 || x == n_minus_1) continue;
    bool composite = true;
    for (unsigned long r = 1; r < s; ++r) {
      x = x * x % candidate;
      if (x == n_minus_1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

KeyPair keypair_from_primes(const mpz_class& p, const mpz_class& q) {
  if (p == q) throw CryptoError("primes must be distinct");
  if (p < 2 || q < 2) throw CryptoError("primes must be at least 2");
  const mpz_class n = p * q;
  const mpz_class p1 = p - 1;
  const mpz_class q1 = q - 1;
  mpz_class phi = p1 * q1;
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
  if (g != 1) throw CryptoError("gcd(pq, (p-1)(q-1)) != 1");

  KeyPair kp;
  PublicKey& pk = kp.public_key;
  pk.n = n;
  pk.n_squared = n * n;
  pk.g = n + 1;
  pk.bit_length = static_cast<unsigned>(mpz_sizeinbase(n.get_mpz_t(), 2));

  SecretKey& sk = kp.secret_key;
  mpz_lcm(sk.lambda.get_mpz_t(), p1.get_mpz_t(), q1.get_mpz_t());
  const mpz_class lg = l_function(powm(pk.g, sk.lambda, pk.n_squared), n);
  if (mpz_invert(sk.mu.get_mpz_t(), lg.get_mpz_t(), n.get_mpz_t()) == 0) {
    throw CryptoError("L(g^lambda) is not invertible mod n");
  }
  sk.public_key = pk;
  return kp;
}

KeyPair keygen(unsigned bit_length, Rng& rng, const KeygenOptions& options) {
  if (bit_length < kMinTestBits || bit_length % 2 != 0) {
    throw std::invalid_argument("key size must be an even number of bits >= " + std::to_string(kMinTestBits));
  }
  if (bit_length < kMinSecureBits && !options.allow_insecure) {
    throw std::invalid_argument("key size below " + std::to_string(kMinSecureBits) +
                                " bits requires the insecure option");
  }
  const unsigned half = bit_length / 2;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const mpz_class p = generate_prime(half, rng, options);
    const mpz_class q = generate_prime(half, rng, options);
    if (p == q) continue;
    const mpz_class phi = (p - 1) * (q - 1);
    const mpz_class n = p * q;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    return keypair_from_primes(p, q);
  }
  throw CryptoError("could not find distinct primes within the retry bound");
}

Ciphertext encrypt_with_nonce(const PublicKey& pk, const mpz_class& message, const mpz_class& nonce) {
  if (sgn(message) < 0) throw std::invalid_argument("plaintext must be non-negative");
  if (message >= pk.n) throw std::invalid_argument("plaintext must be smaller than n");
  mpz_class gcd;
  mpz_gcd(gcd.get_mpz_t(), nonce.get_mpz_t(), pk.n.get_mpz_t());
  if (sgn(nonce) <= 0 || gcd != 1) throw std::invalid_argument("nonce must be a unit mod n");
  // g^m = (1 + n)^m = 1 + m n (mod n^2)
  const mpz_class gm = (1 + message * pk.n) % pk.n_squared;
  return Ciphertext{gm * powm(nonce, pk.n, pk.n_squared) % pk.n_squared};
}

Ciphertext encrypt(const PublicKey& pk, const mpz_class& message, Rng& rng) {
  for (;;) {
    const mpz_class r = random_below(pk.n, rng);
    if (sgn(r) == 0) continue;
    mpz_class gcd;
    mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
    if (gcd == 1) return encrypt_with_nonce(pk, message, r);
  }
}

Ciphertext encrypt(const PublicKey& pk, std::uint64_t message, Rng& rng) {
  return encrypt(pk, from_u64(message), rng);
}

mpz_class decrypt(const SecretKey& sk, const Ciphertext& c) {
  const PublicKey& pk = sk.public_key;
  check_same_key(pk, c);
  mpz_class gcd;
  mpz_gcd(gcd.get_mpz_t(), c.value.get_mpz_t(), pk.n_squared.get_mpz_t());
  if (gcd != 1) throw CryptoError("ciphertext is not coprime to n^2 (corrupted)");
  return l_function(powm(c.value, sk.lambda, pk.n_squared), pk.n) * sk.mu % pk.n;
}

std::uint64_t decrypt_u64(const SecretKey& sk, const Ciphertext& c) { return to_u64(decrypt(sk, c)); }

Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  check_same_key(pk, a);
  check_same_key(pk, b);
  return Ciphertext{a.value * b.value % pk.n_squared};
}

Ciphertext sum(const PublicKey& pk, std::span<const Ciphertext> values) {
  if (values.empty()) throw std::invalid_argument("sum of an empty ciphertext list");
  Ciphertext acc = values.front();
  check_same_key(pk, acc);
  for (std::size_t i = 1; i < values.size(); ++i) acc = add(pk, acc, values[i]);
  return acc;
}

EncryptedVector encrypt_vector(const PublicKey& pk, std::span<const std::uint64_t> values, Rng& rng) {
  EncryptedVector out;
  out.reserve(values.size());
  for (std::uint64_t v : values) out.push_back(encrypt(pk, v, rng));
  return out;
}

std::vector<std::uint64_t> decrypt_vector(const SecretKey& sk, const EncryptedVector& values) {
  std::vector<std::uint64_t> out;
  out.reserve(values.size());
  for (const Ciphertext& c : values) out.push_back(decrypt_u64(sk, c));
  return out;
}

EncryptedVector add_vectors(const PublicKey& pk, const EncryptedVector& a, const EncryptedVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add_vectors: length mismatch");
  EncryptedVector out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(add(pk, a[i], b[i]));
  return out;
}

std::vector<std::uint8_t> serialize(const PublicKey& pk, const Ciphertext& c) {
  std::vector<std::uint8_t> out;
  write_fixed(c.value, pk.ciphertext_bytes(), out);
  return out;
}

Ciphertext deserialize_ciphertext(const PublicKey& pk, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != pk.ciphertext_bytes()) throw CryptoError("ciphertext has wrong width");
  Ciphertext c{read_fixed(bytes)};
  check_same_key(pk, c);
  return c;
}

std::vector<std::uint8_t> serialize(const PublicKey& pk, const EncryptedVector& v) {
  std::vector<std::uint8_t> out;
  out.reserve(ciphertext_serialized_size(pk.bit_length, v.size()));
  write_u32(static_cast<std::uint32_t>(v.size()), out);
  for (const Ciphertext& c : v) write_fixed(c.value, pk.ciphertext_bytes(), out);
  return out;
}

EncryptedVector deserialize_vector(const PublicKey& pk, std::span<const std::uint8_t> bytes) {
  const std::uint32_t count = read_u32(bytes);
  const std::size_t width = pk.ciphertext_bytes();
  if (bytes.size() != kVectorLengthPrefixBytes + count * width) throw CryptoError("vector has wrong size");
  EncryptedVector out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out.push_back(deserialize_ciphertext(pk, bytes.subspan(kVectorLengthPrefixBytes + i * width, width)));
  }
  return out;
}

std::vector<std::uint8_t> serialize(const PublicKey& pk) {
  std::vector<std::uint8_t> out;
  write_u32(pk.bit_length, out);
  write_fixed(pk.n, pk.modulus_bytes(), out);
  return out;
}

PublicKey deserialize_public_key(std::span<const std::uint8_t> bytes) {
  const std::uint32_t bits = read_u32(bytes);
  const std::size_t width = (bits + 7) / 8;
  if (bytes.size() != 4 + width) throw CryptoError("public key has wrong size");
  PublicKey pk;
  pk.n = read_fixed(bytes.subspan(4));
  pk.n_squared = pk.n * pk.n;
  pk.g = pk.n + 1;
  pk.bit_length = bits;
  if (mpz_sizeinbase(pk.n.get_mpz_t(), 2) != bits) throw CryptoError("modulus does not match bit length");
  return pk;
}

std::size_t ciphertext_payload_size(unsigned key_bits, std::size_t length) {
  return length * ((2 * static_cast<std::size_t>(key_bits) + 7) / 8);
}

std::size_t ciphertext_serialized_size(unsigned key_bits, std::size_t length) {
  return kVectorLengthPrefixBytes + ciphertext_payload_size(key_bits, length);
}

std::size_t public_key_serialized_size(unsigned key_bits) { return 4 + (key_bits + 7) / 8; }

std::size_t bignum_object_footprint(unsigned key_bits, std::size_t length) {
  constexpr std::size_t kHeaderBytes = 24;
  constexpr std::size_t kDigitBits = 30;
  constexpr std::size_t kDigitBytes = 4;
  const std::size_t value_bits = 2 * static_cast<std::size_t>(key_bits);
  const std::size_t digits = (value_bits + kDigitBits - 1) / kDigitBits;
  return length * (kHeaderBytes + digits * kDigitBytes);
}

}  // namespace dubhe::crypto
