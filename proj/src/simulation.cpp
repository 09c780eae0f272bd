#include "histchain/simulation.hpp"

#include <charconv>
#include <fstream>
#include <istream>

namespace histchain {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("bad value for " + std::string(key) + ": " + std::string(value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no") {
    return false;
  }
  throw ConfigError("bad boolean for " + std::string(key) + ": " + std::string(value));
}

}  // namespace

void SimConfig::validate() const {
  if (n_storage_nodes < 1 || n_storage_nodes >= endpoint::kChain) {
    throw ConfigError("nodes must be in [1, 999]");
  }
  if (replication_factor < 1) {
    throw ConfigError("replication factor must be at least 1");
  }
  if (replication_factor > n_storage_nodes) {
    throw ConfigError("replication factor " + std::to_string(replication_factor) +
                      " exceeds storage node count " + std::to_string(n_storage_nodes));
  }
  if (interval_ticks < 4) {
    throw ConfigError("interval_ticks must be at least 4");
  }
  if (minutes < 0) {
    throw ConfigError("minutes must be non-negative");
  }
  plant.validate();
}

void SimConfig::set(std::string_view key, std::string_view value) {
  if (key == "n_storage_nodes" || key == "nodes") {
    n_storage_nodes = parse_number<int>(key, value);
  } else if (key == "replication_factor") {
    replication_factor = parse_number<int>(key, value);
  } else if (key == "interval_ticks") {
    interval_ticks = parse_number<Tick>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
    plant.seed = seed;
  } else if (key == "minutes") {
    minutes = parse_number<int>(key, value);
  } else if (key == "start") {
    try {
      start = MinuteStamp::parse(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "hash") {
    try {
      hash = parse_hash_algorithm(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "capacity") {
    plant.capacity = parse_number<double>(key, value);
  } else if (key == "flow_rate.A1") {
    plant.flow_rate[0] = parse_number<double>(key, value);
  } else if (key == "flow_rate.A2") {
    plant.flow_rate[1] = parse_number<double>(key, value);
  } else if (key == "flow_rate.A3") {
    plant.flow_rate[2] = parse_number<double>(key, value);
  } else if (key == "setpoint_low") {
    plant.setpoint_low = parse_number<double>(key, value);
  } else if (key == "setpoint_high") {
    plant.setpoint_high = parse_number<double>(key, value);
  } else if (key == "sensor_noise") {
    plant.sensor_noise = parse_bool(key, value);
  } else if (key == "trace_wire") {
    trace_wire = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key: " + std::string(key));
  }
}

SimConfig SimConfig::parse(std::istream& in) {
  SimConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') {
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key=value: " + text);
    }
    cfg.set(trim(std::string_view(text).substr(0, eq)),
            trim(std::string_view(text).substr(eq + 1)));
  }
  return cfg;
}

SimConfig SimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config " + path.string());
  }
  return parse(in);
}

// ---------------------------------------------------------------------------

void Scheduler::at(Tick tick, Phase phase, std::function<void()> action) {
  if (tick < now_) {
    throw std::logic_error("cannot schedule in the past");
  }
  queue_.push(Entry{tick, static_cast<int>(phase), seq_++, std::move(action)});
}

void Scheduler::run_until(Tick end) {
  while (!queue_.empty() && queue_.top().tick < end) {
    auto entry = queue_.top();
    queue_.pop();
    now_ = entry.tick;
    log_->set_tick(now_);
    entry.action();
  }
  if (now_ < end - 1) {
    now_ = end - 1;
    log_->set_tick(now_);
  }
}

// ---------------------------------------------------------------------------

Simulation::Simulation(SimConfig config, std::optional<std::vector<NodeKeys>> keystore)
    : config_([&] {
        config.plant.seed = config.seed;
        config.validate();
        return config;
      }()),
      scheduler_(events_),
      network_(events_),
      plant_(config_.plant) {
  std::vector<EndpointId> endpoints;
  for (int i = 1; i <= config_.n_storage_nodes; ++i) {
    endpoints.push_back(static_cast<EndpointId>(i));
  }
  endpoints.push_back(endpoint::kChain);
  endpoints.push_back(endpoint::plc(1));
  endpoints.push_back(endpoint::plc(2));

  if (keystore) {
    for (const auto& k : *keystore) {
      keys_[k.id] = k;
    }
  }
  RngStream key_rng(config_.seed, "keys");
  for (EndpointId id : endpoints) {
    // One draw per endpoint, keystore or not.
    auto generated = NodeKeys::generate(id, key_rng);
    keys_.try_emplace(id, generated);
    directory_.add(keys_.at(id).public_keys());
  }

  std::vector<NodeId> ids;
  for (int i = 1; i <= config_.n_storage_nodes; ++i) {
    const auto id = static_cast<NodeId>(i);
    ids.push_back(id);
    nodes_.push_back(std::make_unique<StorageNode>(
        keys_.at(id), directory_, endpoint::kChain, config_.hash,
        RngStream(config_.seed, "entropy/" + endpoint::name(id)), events_));
  }
  chain_ = std::make_unique<ChainModule>(keys_.at(endpoint::kChain), directory_, ids,
                                         config_.replication_factor, config_.hash, config_.seed,
                                         events_);
  plc_entropy_.emplace(PlcId::PLC1, RngStream(config_.seed, "entropy/plc1"));
  plc_entropy_.emplace(PlcId::PLC2, RngStream(config_.seed, "entropy/plc2"));

  for (NodeId a : ids) {
    network_.connect(a, endpoint::kChain);
    for (NodeId b : ids) {
      if (a < b) {
        network_.connect(a, b);
      }
    }
  }
  network_.connect(endpoint::plc(1), route(PlcId::PLC1));
  network_.connect(endpoint::plc(2), route(PlcId::PLC2));
  if (config_.trace_wire) {
    network_.set_trace(&wire_);
  }

  const Tick interval = config_.interval_ticks;
  scheduler_.at(0, Phase::Plant, [this] { plant_tick(0); });
  scheduler_.at(interval, Phase::ChainClose, [this, interval] { close_interval(interval); });
  scheduler_.at(interval / 2, Phase::Validator, [this, interval] { validator_tick(interval / 2); });
}

NodeId Simulation::route(PlcId plc) const {
  const int wanted = static_cast<int>(plc);
  return static_cast<NodeId>(wanted <= config_.n_storage_nodes ? wanted : 1);
}

StorageNode& Simulation::node(NodeId id) {
  if (id < 1 || id > nodes_.size()) {
    throw std::out_of_range("no storage node " + std::to_string(id));
  }
  return *nodes_[id - 1];
}

const StorageNode& Simulation::node(NodeId id) const {
  if (id < 1 || id > nodes_.size()) {
    throw std::out_of_range("no storage node " + std::to_string(id));
  }
  return *nodes_[id - 1];
}

std::vector<NodeId> Simulation::node_ids() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    out.push_back(n->id());
  }
  return out;
}

std::vector<NodeKeys> Simulation::all_keys() const {
  std::vector<NodeKeys> out;
  for (const auto& [id, k] : keys_) {
    out.push_back(k);
  }
  return out;
}

Tick Simulation::next_validator_tick(Tick t) const {
  const Tick interval = config_.interval_ticks;
  const Tick offset = interval / 2;
  if (t <= offset) {
    return offset;
  }
  return ((t - offset + interval - 1) / interval) * interval + offset;
}

void Simulation::send(const Frame& frame) {
  if (network_.send(frame) == Network::SendOutcome::Enqueued) {
    const auto from = frame.sender_id;
    const auto to = frame.recipient_id;
    scheduler_.at(now() + 1, Phase::Delivery, [this, from, to] { deliver(from, to); });
  }
}

void Simulation::deliver(EndpointId from, EndpointId to) {
  std::optional<Frame> frame;
  SignedEnvelope envelope;
  try {
    frame = network_.receive(from, to);
    if (!frame) {
      return;
    }
    envelope = envelope_of(*frame);
  } catch (const std::exception& e) {
    events_.alarm(endpoint::name(to), "UNDELIVERABLE",
                  "frame from " + endpoint::name(from) + ": " + e.what());
    return;
  }
  // Addressing comes from the queue, not the header.
  envelope.sender_id = from;
  envelope.recipient_id = to;

  if (frame->msg_type == MsgType::Measurement && endpoint::is_storage(to)) {
    auto outcome = node(to).register_measurement(envelope);
    if (outcome.index_message) {
      send(make_frame(MsgType::Index, *outcome.index_message));
    }
  } else if (frame->msg_type == MsgType::Index && to == endpoint::kChain) {
    chain_->collect(envelope);
  } else if (frame->msg_type == MsgType::Log && endpoint::is_storage(to)) {
    node(to).handle_log(envelope, chain(), transport_for(to));
  } else {
    events_.alarm(endpoint::name(to), "UNDELIVERABLE",
                  std::string("unexpected ") + std::string(to_string(frame->msg_type)) +
                      " frame from " + endpoint::name(from));
  }
}

ReplicaTransport Simulation::transport_for(NodeId requester) {
  return [this, requester](const SignedEnvelope& request) -> std::optional<SignedEnvelope> {
    if (!endpoint::is_storage(request.recipient_id) ||
        request.recipient_id > nodes_.size() || request.sender_id != requester) {
      return std::nullopt;
    }
    try {
      auto response = network_.transact(
          make_frame(MsgType::ReplicaReq, request),
          [this](const Frame& req) -> std::optional<Frame> {
            auto reply = node(req.recipient_id).serve_replica(envelope_of(req));
            if (!reply) {
              return std::nullopt;
            }
            return make_frame(MsgType::ReplicaResp, *reply);
          });
      if (!response) {
        return std::nullopt;
      }
      return envelope_of(*response);
    } catch (const std::exception& e) {
      events_.alarm(endpoint::name(requester), "UNDELIVERABLE",
                    std::string("replica exchange failed: ") + e.what());
      return std::nullopt;
    }
  };
}

void Simulation::submit_vector(PlcId plc, const MeasurementVector& vector,
                               std::optional<NodeId> target) {
  const auto plc_id = endpoint::plc(static_cast<int>(plc));
  const NodeId to = target.value_or(route(plc));
  if (!network_.connected(plc_id, to)) {
    network_.connect(plc_id, to);
  }
  const auto envelope = seal(to_bytes(canonical_serialize(vector)), keys_.at(plc_id),
                             directory_.at(to), plc_entropy_.at(plc), config_.hash);
  send(make_frame(MsgType::Measurement, envelope));
}

void Simulation::plant_tick(Tick t) {
  const Tick interval = config_.interval_ticks;
  if (!plant_enabled_ || t >= config_.minutes * interval) {
    return;
  }
  const auto readings = plant_.tick(t);
  for (std::size_t i = 0; i < readings.size(); ++i) {
    buffers_[i].push_back(readings[i].value);
  }
  if ((t + 1) % interval == 0) {
    for (int i = 0; i < 2; ++i) {
      const auto sensor = static_cast<SensorId>(i + 1);
      MeasurementVector v{sensor_name(sensor), minute_at(t), std::move(buffers_[i])};
      buffers_[i].clear();
      submit_vector(static_cast<PlcId>(i + 1), v);
    }
  }
  scheduler_.at(t + 1, Phase::Plant, [this, t] { plant_tick(t + 1); });
}

void Simulation::close_interval(Tick t) {
  if (auto block = chain_->close_interval(minute_at(t))) {
    for (const auto& log : chain_->broadcast_log(block->block_hash)) {
      send(make_frame(MsgType::Log, log));
    }
  }
  const Tick next = t + config_.interval_ticks;
  if (next < horizon()) {
    scheduler_.at(next, Phase::ChainClose, [this, next] { close_interval(next); });
  }
}

std::vector<ValidationFinding> Simulation::validate_now(NodeId id) {
  const MinuteStamp stale_before = minute_at(now()) + (-1);
  auto findings = node(id).validate_cycle(chain(), transport_for(id), stale_before);
  history_.push_back(ValidatorCycle{now(), id, findings});
  return findings;
}

void Simulation::validator_tick(Tick t) {
  for (const auto& n : nodes_) {
    validate_now(n->id());
  }
  const Tick next = t + config_.interval_ticks;
  if (next < horizon()) {
    scheduler_.at(next, Phase::Validator, [this, next] { validator_tick(next); });
  }
}

std::string Simulation::chain_dump() const {
  std::ostringstream out;
  chain().write_dump(out);
  return out.str();
}

std::string Simulation::historian_dump(NodeId id) const {
  std::ostringstream out;
  node(id).historian().write_dump(out);
  return out.str();
}

std::string Simulation::event_dump() const {
  std::ostringstream out;
  events_.write(out);
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Simulation::write_artifacts(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text(dir / "events.tsv", event_dump());
  write_text(dir / "chain.txt", chain_dump());
  for (const auto& n : nodes_) {
    write_text(dir / ("historian_" + std::to_string(n->id()) + ".txt"), historian_dump(n->id()));
  }
  if (config_.trace_wire) {
    write_text(dir / "wire.txt", wire_trace());
  }
}

}  // namespace histchain
