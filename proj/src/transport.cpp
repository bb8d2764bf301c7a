#include "shoggoth/transport.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "shoggoth/wire.hpp"

namespace shoggoth::transport {

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kFrameBatchUp: return "frame_batch_up";
    case MessageKind::kLabelBatchDown: return "label_batch_down";
    case MessageKind::kModelDown: return "model_down";
    case MessageKind::kInferRequestUp: return "infer_request_up";
    case MessageKind::kInferResponseDown: return "infer_response_down";
    case MessageKind::kStatsUp: return "stats_up";
  }
  return "unknown";
}

Direction direction_of(MessageKind kind) {
  switch (kind) {
    case MessageKind::kFrameBatchUp:
    case MessageKind::kInferRequestUp:
    case MessageKind::kStatsUp:
      return Direction::kUp;
    case MessageKind::kLabelBatchDown:
    case MessageKind::kModelDown:
    case MessageKind::kInferResponseDown:
      return Direction::kDown;
  }
  throw SchemaError("unknown message kind");
}

const char* to_string(Direction dir) { return dir == Direction::kUp ? "up" : "down"; }

namespace {

bool known_kind(std::uint8_t k) { return k >= 1 && k <= 6; }

std::size_t pair_list_size(std::span<const std::uint8_t> payload, std::size_t trailer, const char* what) {
  if (payload.size() < 4 + trailer) throw SchemaError(fmt::format("{}: payload too short", what));
  wire::ByteReader r(payload);
  const std::uint32_t n = r.u32();
  if (payload.size() != 4 + 8 * static_cast<std::size_t>(n) + trailer) {
    throw SchemaError(fmt::format("{}: {} pairs do not fit {} payload bytes", what, n, payload.size()));
  }
  return n;
}

std::vector<LabelPair> read_pairs(wire::ByteReader& r, std::size_t n) {
  std::vector<LabelPair> out(n);
  for (auto& p : out) {
    p.frame_id = r.u32();
    p.label = r.u32();
  }
  return out;
}

void write_pairs(wire::ByteWriter& w, const std::vector<LabelPair>& pairs) {
  w.u32(static_cast<std::uint32_t>(pairs.size()));
  for (const auto& p : pairs) {
    w.u32(p.frame_id);
    w.u32(p.label);
  }
}

}  // namespace

void validate_payload(MessageKind kind, std::span<const std::uint8_t> payload) {
  switch (kind) {
    case MessageKind::kFrameBatchUp:
    case MessageKind::kInferRequestUp:
      return;
    case MessageKind::kLabelBatchDown:
      pair_list_size(payload, 16, "label batch");
      return;
    case MessageKind::kInferResponseDown:
      pair_list_size(payload, 0, "infer response");
      return;
    case MessageKind::kStatsUp:
      if (payload.size() != 16) throw SchemaError(fmt::format("stats: expected 16 bytes, got {}", payload.size()));
      return;
    case MessageKind::kModelDown:
      try {
        if (wire::decode_record(payload).empty()) throw SchemaError("model: empty record");
      } catch (const wire::DecodeError& e) {
        throw SchemaError(fmt::format("model: {}", e.what()));
      }
      return;
  }
  throw SchemaError("unknown message kind");
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  if (msg.payload.size() > 0xffffffffu) throw SchemaError("payload exceeds 4 GiB");
  wire::ByteWriter w;
  w.u8('S');
  w.u8('G');
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(msg.header.kind));
  w.u32(msg.header.device_id);
  w.u64(msg.header.seq);
  w.u32(static_cast<std::uint32_t>(msg.payload.size()));
  w.raw(msg.payload);
  return std::move(w).take();
}

std::size_t framed_length(std::span<const std::uint8_t> header_bytes) {
  if (header_bytes.size() < kHeaderSize) throw wire::DecodeError("incomplete header");
  wire::ByteReader r(header_bytes.subspan(0, kHeaderSize));
  if (r.u8() != 'S' || r.u8() != 'G') throw wire::DecodeError("bad magic");
  if (const auto v = r.u8(); v != kWireVersion) throw wire::DecodeError(fmt::format("unsupported version {}", v));
  if (const auto k = r.u8(); !known_kind(k)) throw wire::DecodeError(fmt::format("unknown kind {}", k));
  r.u32();
  r.u64();
  return kHeaderSize + r.u32();
}

Message decode_message(std::span<const std::uint8_t> bytes) {
  const std::size_t total = framed_length(bytes);
  if (bytes.size() != total) {
    throw wire::DecodeError(fmt::format("frame length {} but {} bytes given", total, bytes.size()));
  }
  wire::ByteReader r(bytes);
  r.u16();
  r.u8();
  Message msg;
  msg.header.kind = static_cast<MessageKind>(r.u8());
  msg.header.device_id = r.u32();
  msg.header.seq = r.u64();
  r.u32();
  msg.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  validate_payload(msg.header.kind, msg.payload);
  return msg;
}

std::vector<std::uint8_t> encode_label_batch(const LabelBatchPayload& p) {
  wire::ByteWriter w;
  write_pairs(w, p.labels);
  w.f64(p.new_rate);
  w.f64(p.phi_bar);
  return std::move(w).take();
}

LabelBatchPayload decode_label_batch(std::span<const std::uint8_t> payload) {
  const std::size_t n = pair_list_size(payload, 16, "label batch");
  wire::ByteReader r(payload);
  r.u32();
  LabelBatchPayload p;
  p.labels = read_pairs(r, n);
  p.new_rate = r.f64();
  p.phi_bar = r.f64();
  return p;
}

std::vector<std::uint8_t> encode_infer_response(const std::vector<LabelPair>& labels) {
  wire::ByteWriter w;
  write_pairs(w, labels);
  return std::move(w).take();
}

std::vector<LabelPair> decode_infer_response(std::span<const std::uint8_t> payload) {
  const std::size_t n = pair_list_size(payload, 0, "infer response");
  wire::ByteReader r(payload);
  r.u32();
  return read_pairs(r, n);
}

std::vector<std::uint8_t> encode_stats(const StatsPayload& p) {
  wire::ByteWriter w;
  w.f64(p.alpha);
  w.f64(p.lambda);
  return std::move(w).take();
}

StatsPayload decode_stats(std::span<const std::uint8_t> payload) {
  validate_payload(MessageKind::kStatsUp, payload);
  wire::ByteReader r(payload);
  StatsPayload p;
  p.alpha = r.f64();
  p.lambda = r.f64();
  return p;
}

std::vector<std::uint8_t> make_frame_blob(std::size_t bytes) {
  std::vector<std::uint8_t> blob(bytes);
  for (std::size_t i = 0; i < bytes; ++i) blob[i] = static_cast<std::uint8_t>(i * 131u + 7u);
  return blob;
}

std::size_t CompressionModel::compressed_size(std::size_t n_frames) const {
  const double raw = static_cast<double>(n_frames) * static_cast<double>(bytes_per_raw_frame);
  return static_cast<std::size_t>(std::ceil(raw / compression_ratio));
}

double CompressionModel::sample_latency(Rng& rng) const {
  if (latency_max_s <= latency_min_s) return latency_min_s;
  return std::uniform_real_distribution<double>(latency_min_s, latency_max_s)(rng);
}

std::vector<std::string> validate(const CompressionModel& m) {
  std::vector<std::string> errs;
  if (m.bytes_per_raw_frame < 1) errs.emplace_back("transport.bytes_per_raw_frame: must be >= 1");
  if (!(m.compression_ratio > 1.0) || !std::isfinite(m.compression_ratio)) {
    errs.emplace_back("transport.compression_ratio: must be > 1");
  }
  if (!(m.latency_min_s >= 1.0 && m.latency_min_s <= m.latency_max_s && m.latency_max_s <= 3.0)) {
    errs.emplace_back("transport.latency: need 1 <= latency_min_s <= latency_max_s <= 3");
  }
  return errs;
}

void LinkStats::record(const LogEntry& e) {
  (e.direction == Direction::kUp ? up_bytes : down_bytes) += e.bytes;
  kind_bytes[static_cast<std::size_t>(e.kind)] += e.bytes;
  kind_messages[static_cast<std::size_t>(e.kind)] += 1;
  log.push_back(e);
}

Bandwidth bandwidth_kbps(const LinkStats& stats, double window_seconds) {
  if (!(window_seconds > 0.0)) throw ContractError("bandwidth window must be positive");
  return {8.0 * static_cast<double>(stats.up_bytes) / 1000.0 / window_seconds,
          8.0 * static_cast<double>(stats.down_bytes) / 1000.0 / window_seconds};
}

Link::Link(double latency_s) : latency_s_(latency_s) {
  if (!(latency_s >= 0.0) || !std::isfinite(latency_s)) throw ContractError("link latency must be >= 0");
}

MessageHeader Link::send(Message msg, double now) {
  validate_payload(msg.header.kind, msg.payload);
  const Direction dir = direction_of(msg.header.kind);
  std::uint64_t& seq = seq_[{msg.header.device_id, static_cast<int>(dir)}];
  msg.header.seq = ++seq;
  auto bytes = encode_message(msg);
  sent_.record({now, dir, msg.header.device_id, msg.header.seq, msg.header.kind, bytes.size()});
  transmit(dir, Pending{now, now + latency_s_, next_order_++}, std::move(bytes));
  return msg.header;
}

std::vector<Delivery> Link::receive(Direction dir, double now) {
  auto items = collect(dir, now);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.first.due != b.first.due ? a.first.due < b.first.due : a.first.order < b.first.order;
  });
  std::vector<Delivery> out;
  out.reserve(items.size());
  for (auto& [p, bytes] : items) {
    Message msg = decode_message(bytes);
    received_.record({p.due, dir, msg.header.device_id, msg.header.seq, msg.header.kind, bytes.size()});
    out.push_back({std::move(msg), p.sent_at, p.due});
  }
  return out;
}

void Link::set_elapsed(double seconds) {
  sent_.elapsed_seconds = seconds;
  received_.elapsed_seconds = seconds;
}

SimLink::SimLink(double latency_s) : Link(latency_s) {}

std::size_t SimLink::in_flight() const { return queues_[0].size() + queues_[1].size(); }

void SimLink::transmit(Direction dir, const Pending& p, std::vector<std::uint8_t> bytes) {
  queues_[static_cast<int>(dir)].push_back({p, std::move(bytes)});
}

std::vector<std::pair<Link::Pending, std::vector<std::uint8_t>>> SimLink::collect(Direction dir, double now) {
  auto& q = queues_[static_cast<int>(dir)];
  std::vector<std::pair<Pending, std::vector<std::uint8_t>>> out;
  auto keep = q.begin();
  for (auto it = q.begin(); it != q.end(); ++it) {
    if (it->pending.due <= now) {
      out.emplace_back(it->pending, std::move(it->bytes));
    } else {
      if (keep != it) *keep = std::move(*it);
      ++keep;
    }
  }
  q.erase(keep, q.end());
  return out;
}

std::unique_ptr<Link> make_link(LinkKind kind, double latency_s) {
  if (kind == LinkKind::kSocket) return std::make_unique<SocketLink>(latency_s);
  return std::make_unique<SimLink>(latency_s);
}

}  // namespace shoggoth::transport
