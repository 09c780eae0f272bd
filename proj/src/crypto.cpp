#include "histchain/crypto.hpp"

#include <sodium.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace histchain {

namespace {

constexpr std::size_t kCheckBytes = 16;
constexpr std::size_t kHeaderBytes = kEncKeyBytes + kCheckBytes;
constexpr std::string_view kCheckLabel = "histchain/key-check";

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) {
      throw std::runtime_error("libsodium initialisation failed");
    }
    return true;
  }();
  (void)ready;
}

template <std::size_t N>
std::array<std::uint8_t, N> blake2b(std::initializer_list<std::span<const std::uint8_t>> parts) {
  std::array<std::uint8_t, N> out{};
  crypto_generichash_state state;
  crypto_generichash_init(&state, nullptr, 0, N);
  for (auto part : parts) {
    crypto_generichash_update(&state, part.data(), part.size());
  }
  crypto_generichash_final(&state, out.data(), N);
  return out;
}

struct SessionKeys {
  std::array<std::uint8_t, 32> key;
  std::array<std::uint8_t, kCheckBytes> check;
  std::array<std::uint8_t, crypto_stream_xchacha20_NONCEBYTES> nonce;
};

SessionKeys derive_session(std::span<const std::uint8_t> shared,
                           std::span<const std::uint8_t> ephemeral_public,
                           std::span<const std::uint8_t> recipient_public) {
  SessionKeys s;
  s.key = blake2b<32>({shared, ephemeral_public, recipient_public});
  const auto label = std::span(reinterpret_cast<const std::uint8_t*>(kCheckLabel.data()),
                               kCheckLabel.size());
  s.check = blake2b<kCheckBytes>({s.key, label});
  s.nonce = blake2b<crypto_stream_xchacha20_NONCEBYTES>({ephemeral_public, recipient_public});
  return s;
}

std::string base64(std::span<const std::uint8_t> raw) {
  std::string out(sodium_base64_encoded_len(raw.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), raw.data(), raw.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.find('\0'));
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> unbase64(std::string_view text) {
  std::array<std::uint8_t, N> out{};
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      len != N) {
    throw SerializationError("bad key blob in keystore");
  }
  return out;
}

}  // namespace

Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

std::string to_string(std::span<const std::uint8_t> bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out(bytes.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes.data(), bytes.size());
  out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(HashAlgorithm algo) {
  return algo == HashAlgorithm::Sha256 ? "sha256" : "sha512";
}

HashAlgorithm parse_hash_algorithm(std::string_view name) {
  if (name == "sha256") {
    return HashAlgorithm::Sha256;
  }
  if (name == "sha512") {
    return HashAlgorithm::Sha512;
  }
  throw std::invalid_argument("unknown hash algorithm: " + std::string(name));
}

std::size_t digest_size(HashAlgorithm algo) {
  return algo == HashAlgorithm::Sha256 ? crypto_hash_sha256_BYTES : crypto_hash_sha512_BYTES;
}

Digest Digest::from_hex(std::string_view hex) {
  if (hex.empty() || hex.size() % 2 != 0) {
    throw SerializationError("bad digest hex: " + std::string(hex));
  }
  for (char c : hex) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      throw SerializationError("bad digest hex: " + std::string(hex));
    }
  }
  Digest d;
  d.hex_ = std::string(hex);
  return d;
}

Digest Digest::from_raw(std::span<const std::uint8_t> raw) {
  Digest d;
  d.hex_ = to_hex(raw);
  return d;
}

Bytes Digest::raw() const {
  Bytes out(hex_.size() / 2);
  sodium_hex2bin(out.data(), out.size(), hex_.data(), hex_.size(), nullptr, nullptr, nullptr);
  return out;
}

Digest digest(std::span<const std::uint8_t> bytes, HashAlgorithm algo) {
  ensure_sodium();
  Bytes out(digest_size(algo));
  if (algo == HashAlgorithm::Sha256) {
    crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
  } else {
    crypto_hash_sha512(out.data(), bytes.data(), bytes.size());
  }
  return Digest::from_raw(out);
}

Digest digest(std::string_view text, HashAlgorithm algo) {
  return digest(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), algo);
}

// ---------------------------------------------------------------------------

std::string canonical_serialize(const MeasurementVector& v) {
  if (v.values.empty()) {
    throw SerializationError("measurement vector has no values");
  }
  if (v.sensor_name.empty() || v.sensor_name.find_first_of("|,\n\r\t") != std::string::npos) {
    throw SerializationError("invalid sensor name: " + v.sensor_name);
  }
  std::string out = v.sensor_name;
  out += '|';
  out += v.captured_at.iso();
  out += '|';
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (i != 0) {
      out += ',';
    }
    out += std::to_string(v.values[i]);
  }
  return out;
}

MeasurementVector parse_canonical(std::string_view text) {
  const auto first = text.find('|');
  const auto second = first == std::string_view::npos ? first : text.find('|', first + 1);
  if (second == std::string_view::npos || first == 0) {
    throw SerializationError("malformed measurement: " + std::string(text));
  }
  MeasurementVector v;
  v.sensor_name = std::string(text.substr(0, first));
  try {
    v.captured_at = MinuteStamp::parse(text.substr(first + 1, second - first - 1));
  } catch (const std::invalid_argument& e) {
    throw SerializationError(e.what());
  }
  std::string_view rest = text.substr(second + 1);
  while (true) {
    const auto comma = rest.find(',');
    const auto token = rest.substr(0, comma);
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size() ||
        (token.size() > 1 && token[0] == '0')) {
      throw SerializationError("malformed measurement values: " + std::string(text));
    }
    v.values.push_back(value);
    if (comma == std::string_view::npos) {
      break;
    }
    rest = rest.substr(comma + 1);
  }
  // Same name rules as canonical_serialize.
  if (v.sensor_name.find_first_of(",\n\r\t") != std::string::npos) {
    throw SerializationError("invalid sensor name: " + v.sensor_name);
  }
  return v;
}

Digest vector_digest(const MeasurementVector& v, HashAlgorithm algo) {
  return digest(canonical_serialize(v), algo);
}

// ---------------------------------------------------------------------------

NodeKeys NodeKeys::generate(EndpointId id, RngStream& rng) {
  ensure_sodium();
  NodeKeys k;
  k.id = id;
  std::array<std::uint8_t, crypto_box_SEEDBYTES> box_seed{};
  std::array<std::uint8_t, crypto_sign_SEEDBYTES> sign_seed{};
  rng.fill(box_seed.data(), box_seed.size());
  rng.fill(sign_seed.data(), sign_seed.size());
  crypto_box_seed_keypair(k.enc_public.data(), k.enc_secret.data(), box_seed.data());
  crypto_sign_seed_keypair(k.sig_public.data(), k.sig_secret.data(), sign_seed.data());
  sodium_memzero(box_seed.data(), box_seed.size());
  sodium_memzero(sign_seed.data(), sign_seed.size());
  return k;
}

void save_keystore(const std::filesystem::path& path, std::span<const NodeKeys> keys) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write keystore " + path.string());
  }
  out << "# id enc_pub enc_priv sig_pub sig_priv\n";
  for (const auto& k : keys) {
    out << k.id << ' ' << base64(k.enc_public) << ' ' << base64(k.enc_secret) << ' '
        << base64(k.sig_public) << ' ' << base64(k.sig_secret) << '\n';
  }
}

std::vector<NodeKeys> load_keystore(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read keystore " + path.string());
  }
  std::vector<NodeKeys> keys;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream fields(line);
    unsigned id = 0;
    std::string enc_pub, enc_priv, sig_pub, sig_priv, extra;
    if (!(fields >> id >> enc_pub >> enc_priv >> sig_pub >> sig_priv) || (fields >> extra) ||
        id > 0xffff) {
      throw SerializationError("malformed keystore line: " + line);
    }
    NodeKeys k;
    k.id = static_cast<EndpointId>(id);
    k.enc_public = unbase64<kEncKeyBytes>(enc_pub);
    k.enc_secret = unbase64<kEncKeyBytes>(enc_priv);
    k.sig_public = unbase64<kSigPublicBytes>(sig_pub);
    k.sig_secret = unbase64<kSigSecretBytes>(sig_priv);
    keys.push_back(k);
  }
  return keys;
}

// ---------------------------------------------------------------------------

Bytes SignedEnvelope::payload_bytes() const {
  Bytes out;
  out.reserve(4 + ciphertext.size() + signature.size());
  const auto n = static_cast<std::uint32_t>(ciphertext.size());
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(n >> shift));
  }
  out.insert(out.end(), ciphertext.begin(), ciphertext.end());
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

SignedEnvelope SignedEnvelope::from_payload(EndpointId sender, EndpointId recipient,
                                            std::span<const std::uint8_t> payload) {
  if (payload.size() < 4) {
    throw SerializationError("envelope payload truncated");
  }
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) {
    n = (n << 8) | payload[i];
  }
  if (n > payload.size() - 4) {
    throw SerializationError("envelope ciphertext length exceeds payload");
  }
  SignedEnvelope env;
  env.sender_id = sender;
  env.recipient_id = recipient;
  env.ciphertext.assign(payload.begin() + 4, payload.begin() + 4 + n);
  env.signature.assign(payload.begin() + 4 + n, payload.end());
  return env;
}

std::string_view to_string(AuthErrorKind kind) {
  switch (kind) {
    case AuthErrorKind::DecryptFailed:
      return "DecryptFailed";
    case AuthErrorKind::BadSignature:
      return "BadSignature";
    case AuthErrorKind::DigestMismatch:
      return "DigestMismatch";
  }
  return "?";
}

std::string AuthError::describe() const {
  std::string out(to_string(kind));
  if (!reason.empty()) {
    out += ": " + reason;
  }
  out += " received=" + (received_digest.empty() ? std::string("-") : received_digest);
  out += " rebuilt=" + (rebuilt_digest.empty() ? std::string("-") : rebuilt_digest);
  return out;
}

SignedEnvelope seal(std::span<const std::uint8_t> plaintext, const NodeKeys& sender,
                    const PublicKeys& recipient, RngStream& entropy, HashAlgorithm algo) {
  ensure_sodium();
  std::array<std::uint8_t, kEncKeyBytes> eph_secret{};
  std::array<std::uint8_t, kEncKeyBytes> eph_public{};
  std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
  // Redraw while scalarmult rejects the key pair.
  do {
    entropy.fill(eph_secret.data(), eph_secret.size());
    crypto_scalarmult_base(eph_public.data(), eph_secret.data());
  } while (crypto_scalarmult(shared.data(), eph_secret.data(), recipient.encryption.data()) != 0);

  const auto session = derive_session(shared, eph_public, recipient.encryption);
  sodium_memzero(shared.data(), shared.size());
  sodium_memzero(eph_secret.data(), eph_secret.size());

  SignedEnvelope env;
  env.sender_id = sender.id;
  env.recipient_id = recipient.id;
  env.ciphertext.resize(kHeaderBytes + plaintext.size());
  std::copy(eph_public.begin(), eph_public.end(), env.ciphertext.begin());
  std::copy(session.check.begin(), session.check.end(), env.ciphertext.begin() + kEncKeyBytes);
  crypto_stream_xchacha20_xor(env.ciphertext.data() + kHeaderBytes, plaintext.data(),
                              plaintext.size(), session.nonce.data(), session.key.data());

  const Bytes fingerprint = digest(plaintext, algo).raw();
  env.signature.resize(crypto_sign_BYTES + fingerprint.size());
  unsigned long long signed_len = 0;
  crypto_sign(env.signature.data(), &signed_len, fingerprint.data(), fingerprint.size(),
              sender.sig_secret.data());
  env.signature.resize(signed_len);
  return env;
}

OpenResult open(const SignedEnvelope& envelope, const NodeKeys& recipient,
                const PublicKeys& sender, HashAlgorithm algo) {
  ensure_sodium();
  if (envelope.recipient_id != recipient.id) {
    return AuthError{AuthErrorKind::DecryptFailed, "", "", "envelope addressed to another node"};
  }
  if (envelope.ciphertext.size() < kHeaderBytes) {
    return AuthError{AuthErrorKind::DecryptFailed, "", "", "ciphertext truncated"};
  }
  const auto ct = std::span(envelope.ciphertext);
  const auto eph_public = ct.first(kEncKeyBytes);
  const auto check = ct.subspan(kEncKeyBytes, kCheckBytes);
  const auto body = ct.subspan(kHeaderBytes);

  std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
  if (crypto_scalarmult(shared.data(), recipient.enc_secret.data(), eph_public.data()) != 0) {
    return AuthError{AuthErrorKind::DecryptFailed, "", "", "invalid ephemeral key"};
  }
  const auto session = derive_session(shared, eph_public, recipient.enc_public);
  sodium_memzero(shared.data(), shared.size());
  if (sodium_memcmp(session.check.data(), check.data(), kCheckBytes) != 0) {
    return AuthError{AuthErrorKind::DecryptFailed, "", "", "key check failed"};
  }

  Bytes plaintext(body.size());
  crypto_stream_xchacha20_xor(plaintext.data(), body.data(), body.size(), session.nonce.data(),
                              session.key.data());
  const Digest rebuilt = digest(plaintext, algo);

  Bytes received(envelope.signature.size());
  unsigned long long received_len = 0;
  if (envelope.signature.size() < crypto_sign_BYTES ||
      crypto_sign_open(received.data(), &received_len, envelope.signature.data(),
                       envelope.signature.size(), sender.signature.data()) != 0) {
    return AuthError{AuthErrorKind::BadSignature, "", rebuilt.hex(),
                     "signature does not verify under sender key"};
  }
  received.resize(received_len);
  const Digest claimed = Digest::from_raw(received);
  if (claimed != rebuilt) {
    return AuthError{AuthErrorKind::DigestMismatch, claimed.hex(), rebuilt.hex(),
                     "the data has been damaged"};
  }
  return plaintext;
}

}  // namespace histchain
