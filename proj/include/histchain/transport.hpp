#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "histchain/crypto.hpp"
#include "histchain/events.hpp"

namespace histchain {

namespace endpoint {
inline constexpr EndpointId kChain = 1000;
inline constexpr EndpointId kPlcBase = 2000;
inline constexpr EndpointId plc(int n) { return static_cast<EndpointId>(kPlcBase + n); }
inline constexpr bool is_storage(EndpointId id) { return id >= 1 && id < kChain; }
/// "node3", "chain", "plc1"
std::string name(EndpointId id);
}  // namespace endpoint

enum class MsgType : std::uint8_t {
  Measurement = 1,
  Index = 2,
  Log = 3,
  ReplicaReq = 4,
  ReplicaResp = 5,
};

std::string_view to_string(MsgType t);

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 10;

/// Wire layout, big-endian:
///   version:1 | msg_type:1 | sender:2 | recipient:2 | payload_len:4 | payload
/// where payload is a SignedEnvelope (`ciphertext_len:4 | ciphertext | signature`).
struct Frame {
  std::uint8_t version = kFrameVersion;
  MsgType msg_type = MsgType::Measurement;
  EndpointId sender_id = 0;
  EndpointId recipient_id = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

Frame make_frame(MsgType type, const SignedEnvelope& envelope);
/// Throws SerializationError if the payload is not a well-formed envelope.
SignedEnvelope envelope_of(const Frame& frame);

struct EncodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DecodeErrorKind { Truncated, BadLength, UnknownType, BadVersion };
std::string_view to_string(DecodeErrorKind k);

struct DecodeError : std::runtime_error {
  DecodeError(DecodeErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  DecodeErrorKind kind;
};

/// Throws EncodeError for an unknown msg_type or bad version.
Bytes encode_frame(const Frame& frame);
/// Throws DecodeError.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Returns the (possibly rewritten) frame, or nullopt to drop it.
using Interceptor = std::function<std::optional<Frame>(const Frame&)>;

struct InterceptorHandle {
  EndpointId a = 0;
  EndpointId b = 0;
  std::uint64_t serial = 0;
};

/// Simulated wire. Every pair of connected endpoints shares one link with a
/// FIFO queue per direction and at most one interceptor that sees traffic in
/// both directions. Queues hold encoded bytes; the scheduler decides when
/// the head of a queue is delivered.
class Network {
 public:
  explicit Network(EventLog& log) : log_(&log) {}

  void connect(EndpointId a, EndpointId b);
  bool connected(EndpointId a, EndpointId b) const;

  /// Replaces any interceptor already installed on the link (logged).
  InterceptorHandle install_interceptor(EndpointId a, EndpointId b, Interceptor mutator);
  /// No-op when the handle was already superseded.
  void remove_interceptor(const InterceptorHandle& handle);

  enum class SendOutcome { Enqueued, Dropped };
  /// Throws EncodeError for a malformed frame and std::out_of_range when the
  /// endpoints are not connected. A dropped frame is still a successful send.
  SendOutcome send(const Frame& frame);

  /// Pops the oldest frame queued from `from` to `to`; nullopt if empty.
  /// Throws DecodeError when the queued bytes do not decode.
  std::optional<Frame> receive(EndpointId from, EndpointId to);
  std::size_t pending(EndpointId from, EndpointId to) const;

  /// Request/response exchange completed within the current step; both legs
  /// cross the link's interceptor. Used for replica pulls.
  std::optional<Frame> transact(const Frame& request,
                                const std::function<std::optional<Frame>(const Frame&)>& responder);

  /// One hex-encoded frame per line, as delivered onto the wire.
  void set_trace(std::ostream* out) { trace_ = out; }

 private:
  struct Link {
    std::deque<Bytes> forward;   // lo -> hi
    std::deque<Bytes> backward;  // hi -> lo
    Interceptor interceptor;
    std::uint64_t serial = 0;
  };
  static std::pair<EndpointId, EndpointId> key(EndpointId a, EndpointId b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }
  Link& link(EndpointId a, EndpointId b);
  const Link& link(EndpointId a, EndpointId b) const;
  std::deque<Bytes>& queue(EndpointId from, EndpointId to);
  std::optional<Bytes> pass(const Frame& frame);

  EventLog* log_;
  std::map<std::pair<EndpointId, EndpointId>, Link> links_;
  std::uint64_t next_serial_ = 1;
  std::ostream* trace_ = nullptr;
};

}  // namespace histchain
