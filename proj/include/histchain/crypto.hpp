#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "histchain/rng.hpp"
#include "histchain/timestamp.hpp"

namespace histchain {

using Bytes = std::vector<std::uint8_t>;
using EndpointId = std::uint16_t;

Bytes to_bytes(std::string_view text);
std::string to_string(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

struct SerializationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing

enum class HashAlgorithm { Sha256, Sha512 };

std::string_view to_string(HashAlgorithm algo);
HashAlgorithm parse_hash_algorithm(std::string_view name);
std::size_t digest_size(HashAlgorithm algo);

/// Lowercase hex fingerprint. Equality is on the hex text.
class Digest {
 public:
  Digest() = default;
  /// Throws SerializationError unless `hex` is non-empty lowercase hex.
  static Digest from_hex(std::string_view hex);
  static Digest from_raw(std::span<const std::uint8_t> raw);

  const std::string& hex() const { return hex_; }
  Bytes raw() const;
  bool empty() const { return hex_.empty(); }

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  std::string hex_;
};

Digest digest(std::span<const std::uint8_t> bytes, HashAlgorithm algo = HashAlgorithm::Sha256);
Digest digest(std::string_view text, HashAlgorithm algo = HashAlgorithm::Sha256);

// ---------------------------------------------------------------------------
// Measurement vectors

/// One sensor's readings over one interval, the unit that is signed, stored,
/// indexed and replicated.
struct MeasurementVector {
  std::string sensor_name;
  MinuteStamp captured_at;
  std::vector<std::uint32_t> values;

  friend bool operator==(const MeasurementVector&, const MeasurementVector&) = default;
};

/// `name|YYYY-MM-DDTHH:MM|v1,v2,...`. Throws SerializationError on an empty
/// value list or a name containing a separator.
std::string canonical_serialize(const MeasurementVector& v);
MeasurementVector parse_canonical(std::string_view text);
Digest vector_digest(const MeasurementVector& v, HashAlgorithm algo = HashAlgorithm::Sha256);

// ---------------------------------------------------------------------------
// Keys

inline constexpr std::size_t kEncKeyBytes = 32;
inline constexpr std::size_t kSigPublicBytes = 32;
inline constexpr std::size_t kSigSecretBytes = 64;

struct PublicKeys {
  EndpointId id = 0;
  std::array<std::uint8_t, kEncKeyBytes> encryption{};
  std::array<std::uint8_t, kSigPublicBytes> signature{};
};

/// Both keypairs of one endpoint. Only the owner should ever hold this.
struct NodeKeys {
  EndpointId id = 0;
  std::array<std::uint8_t, kEncKeyBytes> enc_public{};
  std::array<std::uint8_t, kEncKeyBytes> enc_secret{};
  std::array<std::uint8_t, kSigPublicBytes> sig_public{};
  std::array<std::uint8_t, kSigSecretBytes> sig_secret{};

  /// Deterministic keypairs drawn from `rng`.
  static NodeKeys generate(EndpointId id, RngStream& rng);
  PublicKeys public_keys() const { return {id, enc_public, sig_public}; }
};

/// Globally known public halves, keyed by endpoint.
class KeyDirectory {
 public:
  void add(const PublicKeys& keys) { keys_[keys.id] = keys; }
  /// Throws std::out_of_range for an unknown endpoint.
  const PublicKeys& at(EndpointId id) const { return keys_.at(id); }
  bool contains(EndpointId id) const { return keys_.count(id) != 0; }

 private:
  std::map<EndpointId, PublicKeys> keys_;
};

/// Keystore text file: one `id enc_pub enc_priv sig_pub sig_priv` record per
/// line, key blobs base64, `#` starts a comment line.
void save_keystore(const std::filesystem::path& path, std::span<const NodeKeys> keys);
std::vector<NodeKeys> load_keystore(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Envelope

/// Ciphertext for the recipient plus the sender's signature over the
/// plaintext digest.
///
/// ciphertext = ephemeral X25519 public key (32) | key check (16) | body.
/// The body is XChaCha20 under a key derived from the X25519 shared secret,
/// without a MAC; body tampering shows up as a digest mismatch.
/// signature = Ed25519 signed message over the raw plaintext digest.
struct SignedEnvelope {
  EndpointId sender_id = 0;
  EndpointId recipient_id = 0;
  Bytes ciphertext;
  Bytes signature;

  /// `ciphertext_len:4 (big-endian) | ciphertext | signature`.
  Bytes payload_bytes() const;
  static SignedEnvelope from_payload(EndpointId sender, EndpointId recipient,
                                     std::span<const std::uint8_t> payload);

  friend bool operator==(const SignedEnvelope&, const SignedEnvelope&) = default;
};

enum class AuthErrorKind { DecryptFailed, BadSignature, DigestMismatch };

std::string_view to_string(AuthErrorKind kind);

struct AuthError {
  AuthErrorKind kind = AuthErrorKind::DecryptFailed;
  std::string received_digest;  // empty when the signature did not verify
  std::string rebuilt_digest;   // empty when decryption failed
  std::string reason;

  std::string describe() const;
};

using OpenResult = std::variant<Bytes, AuthError>;

SignedEnvelope seal(std::span<const std::uint8_t> plaintext, const NodeKeys& sender,
                    const PublicKeys& recipient, RngStream& entropy,
                    HashAlgorithm algo = HashAlgorithm::Sha256);

OpenResult open(const SignedEnvelope& envelope, const NodeKeys& recipient,
                const PublicKeys& sender, HashAlgorithm algo = HashAlgorithm::Sha256);

}  // namespace histchain
