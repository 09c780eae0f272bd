#include "histchain/transport.hpp"

namespace histchain {

namespace endpoint {
std::string name(EndpointId id) {
  if (id == kChain) {
    return "chain";
  }
  if (id > kPlcBase) {
    return "plc" + std::to_string(id - kPlcBase);
  }
  return "node" + std::to_string(id);
}
}  // namespace endpoint

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::Measurement:
      return "MEASUREMENT";
    case MsgType::Index:
      return "INDEX";
    case MsgType::Log:
      return "LOG";
    case MsgType::ReplicaReq:
      return "REPLICA_REQ";
    case MsgType::ReplicaResp:
      return "REPLICA_RESP";
  }
  return "UNKNOWN";
}

std::string_view to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::Truncated:
      return "Truncated";
    case DecodeErrorKind::BadLength:
      return "BadLength";
    case DecodeErrorKind::UnknownType:
      return "UnknownType";
    case DecodeErrorKind::BadVersion:
      return "BadVersion";
  }
  return "?";
}

namespace {

bool known_type(std::uint8_t t) { return t >= 1 && t <= 5; }

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

Bytes encode_unchecked(const Frame& frame) {
  Bytes out;
  out.reserve(kFrameHeaderBytes + frame.payload.size());
  out.push_back(frame.version);
  out.push_back(static_cast<std::uint8_t>(frame.msg_type));
  put16(out, frame.sender_id);
  put16(out, frame.recipient_id);
  const auto n = static_cast<std::uint32_t>(frame.payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(n >> shift));
  }
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

}  // namespace

Frame make_frame(MsgType type, const SignedEnvelope& envelope) {
  return Frame{kFrameVersion, type, envelope.sender_id, envelope.recipient_id,
               envelope.payload_bytes()};
}

SignedEnvelope envelope_of(const Frame& frame) {
  return SignedEnvelope::from_payload(frame.sender_id, frame.recipient_id, frame.payload);
}

Bytes encode_frame(const Frame& frame) {
  if (frame.version != kFrameVersion) {
    throw EncodeError("unsupported frame version " + std::to_string(frame.version));
  }
  if (!known_type(static_cast<std::uint8_t>(frame.msg_type))) {
    throw EncodeError("unknown msg_type " +
                      std::to_string(static_cast<int>(frame.msg_type)));
  }
  if (frame.payload.size() > UINT32_MAX) {
    throw EncodeError("payload too large");
  }
  return encode_unchecked(frame);
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) {
    throw DecodeError(DecodeErrorKind::Truncated, "frame shorter than header");
  }
  Frame f;
  f.version = bytes[0];
  if (f.version != kFrameVersion) {
    throw DecodeError(DecodeErrorKind::BadVersion,
                      "unsupported frame version " + std::to_string(f.version));
  }
  if (!known_type(bytes[1])) {
    throw DecodeError(DecodeErrorKind::UnknownType,
                      "unknown msg_type " + std::to_string(bytes[1]));
  }
  f.msg_type = static_cast<MsgType>(bytes[1]);
  f.sender_id = static_cast<EndpointId>((bytes[2] << 8) | bytes[3]);
  f.recipient_id = static_cast<EndpointId>((bytes[4] << 8) | bytes[5]);
  std::uint32_t len = 0;
  for (int i = 6; i < 10; ++i) {
    len = (len << 8) | bytes[i];
  }
  if (len != bytes.size() - kFrameHeaderBytes) {
    throw DecodeError(DecodeErrorKind::BadLength,
                      "payload_len " + std::to_string(len) + " but " +
                          std::to_string(bytes.size() - kFrameHeaderBytes) + " bytes follow");
  }
  f.payload.assign(bytes.begin() + kFrameHeaderBytes, bytes.end());
  return f;
}

// ---------------------------------------------------------------------------

void Network::connect(EndpointId a, EndpointId b) { links_.try_emplace(key(a, b)); }

bool Network::connected(EndpointId a, EndpointId b) const { return links_.count(key(a, b)) != 0; }

Network::Link& Network::link(EndpointId a, EndpointId b) {
  const auto it = links_.find(key(a, b));
  if (it == links_.end()) {
    throw std::out_of_range("no link between " + endpoint::name(a) + " and " +
                            endpoint::name(b));
  }
  return it->second;
}

const Network::Link& Network::link(EndpointId a, EndpointId b) const {
  const auto it = links_.find(key(a, b));
  if (it == links_.end()) {
    throw std::out_of_range("no link between " + endpoint::name(a) + " and " +
                            endpoint::name(b));
  }
  return it->second;
}

std::deque<Bytes>& Network::queue(EndpointId from, EndpointId to) {
  auto& l = link(from, to);
  return from < to ? l.forward : l.backward;
}

InterceptorHandle Network::install_interceptor(EndpointId a, EndpointId b,
                                               Interceptor mutator) {
  auto& l = link(a, b);
  if (l.interceptor) {
    log_->info("network", code::kInterceptorReplaced,
               "link " + endpoint::name(a) + "<->" + endpoint::name(b));
  }
  l.interceptor = std::move(mutator);
  l.serial = next_serial_++;
  return InterceptorHandle{a, b, l.serial};
}

void Network::remove_interceptor(const InterceptorHandle& handle) {
  auto& l = link(handle.a, handle.b);
  if (l.serial == handle.serial) {
    l.interceptor = nullptr;
    l.serial = 0;
  }
}

std::optional<Bytes> Network::pass(const Frame& frame) {
  encode_frame(frame);  // the sender's frame must be well formed
  auto& l = link(frame.sender_id, frame.recipient_id);
  std::optional<Frame> out = frame;
  if (l.interceptor) {
    out = l.interceptor(frame);
  }
  if (!out) {
    return std::nullopt;
  }
  Bytes wire = encode_unchecked(*out);
  if (trace_ != nullptr) {
    *trace_ << to_hex(wire) << '\n';
  }
  return wire;
}

Network::SendOutcome Network::send(const Frame& frame) {
  auto wire = pass(frame);
  if (!wire) {
    return SendOutcome::Dropped;
  }
  queue(frame.sender_id, frame.recipient_id).push_back(std::move(*wire));
  return SendOutcome::Enqueued;
}

std::optional<Frame> Network::receive(EndpointId from, EndpointId to) {
  auto& q = queue(from, to);
  if (q.empty()) {
    return std::nullopt;
  }
  Bytes wire = std::move(q.front());
  q.pop_front();
  return decode_frame(wire);
}

std::size_t Network::pending(EndpointId from, EndpointId to) const {
  const auto& l = link(from, to);
  return (from < to ? l.forward : l.backward).size();
}

std::optional<Frame> Network::transact(
    const Frame& request, const std::function<std::optional<Frame>(const Frame&)>& responder) {
  auto wire = pass(request);
  if (!wire) {
    return std::nullopt;
  }
  auto response = responder(decode_frame(*wire));
  if (!response) {
    return std::nullopt;
  }
  auto back = pass(*response);
  if (!back) {
    return std::nullopt;
  }
  return decode_frame(*back);
}

}  // namespace histchain
