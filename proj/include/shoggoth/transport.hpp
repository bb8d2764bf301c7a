#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shoggoth/common.hpp"

namespace shoggoth::transport {

/// Wire layout (little-endian):
///   header  : 'S' 'G' version:u8 kind:u8 device_id:u32 seq:u64 payload_len:u32   (20 bytes)
///   payload :
///     FrameBatchUp, InferRequestUp : opaque compressed frame buffer
///     LabelBatchDown               : n:u32, n x (frame_id:u32, class:u32), new_rate:f64, phi_bar:f64
///     InferResponseDown            : n:u32, n x (frame_id:u32, class:u32)
///     StatsUp                      : alpha:f64, lambda:f64
///     ModelDown                    : flat float record (u64 count + f64 values, per array)
enum class MessageKind : std::uint8_t {
  kFrameBatchUp = 1,
  kLabelBatchDown = 2,
  kModelDown = 3,
  kInferRequestUp = 4,
  kInferResponseDown = 5,
  kStatsUp = 6,
};
inline constexpr std::size_t kKindCount = 7;  // indexable by kind value

const char* to_string(MessageKind kind);

enum class Direction { kUp, kDown };

Direction direction_of(MessageKind kind);
const char* to_string(Direction dir);

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 20;

struct MessageHeader {
  std::uint32_t device_id = 0;
  std::uint64_t seq = 0;
  MessageKind kind = MessageKind::kFrameBatchUp;
};

struct Message {
  MessageHeader header;
  std::vector<std::uint8_t> payload;

  std::size_t wire_size() const { return kHeaderSize + payload.size(); }
};

/// Payload does not match the schema its kind requires.
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void validate_payload(MessageKind kind, std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_message(const Message& msg);

/// Decodes exactly one framed message. Throws wire::DecodeError on a bad
/// header or length and SchemaError on a malformed payload.
Message decode_message(std::span<const std::uint8_t> bytes);

/// Total framed length once at least kHeaderSize bytes are available.
std::size_t framed_length(std::span<const std::uint8_t> header_bytes);

struct LabelPair {
  std::uint32_t frame_id = 0;
  std::uint32_t label = 0;
};

struct LabelBatchPayload {
  std::vector<LabelPair> labels;
  double new_rate = 0.0;
  double phi_bar = 0.0;
};

std::vector<std::uint8_t> encode_label_batch(const LabelBatchPayload& p);
LabelBatchPayload decode_label_batch(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_infer_response(const std::vector<LabelPair>& labels);
std::vector<LabelPair> decode_infer_response(std::span<const std::uint8_t> payload);

struct StatsPayload {
  double alpha = 0.0;
  double lambda = 0.0;
};

std::vector<std::uint8_t> encode_stats(const StatsPayload& p);
StatsPayload decode_stats(std::span<const std::uint8_t> payload);

/// Placeholder for an encoded video buffer of the given size.
std::vector<std::uint8_t> make_frame_blob(std::size_t bytes);

/// Stand-in for buffered H.264 encoding.
struct CompressionModel {
  std::size_t bytes_per_raw_frame = 20000;
  double compression_ratio = 40.0;
  double latency_min_s = 1.0;
  double latency_max_s = 3.0;

  /// ceil(n_frames * bytes_per_raw_frame / compression_ratio).
  std::size_t compressed_size(std::size_t n_frames) const;
  double sample_latency(Rng& rng) const;
};

std::vector<std::string> validate(const CompressionModel& m);

struct LogEntry {
  double time = 0.0;
  Direction direction = Direction::kUp;
  std::uint32_t device_id = 0;
  std::uint64_t seq = 0;
  MessageKind kind = MessageKind::kFrameBatchUp;
  std::size_t bytes = 0;
};

struct LinkStats {
  std::uint64_t up_bytes = 0;
  std::uint64_t down_bytes = 0;
  std::array<std::uint64_t, kKindCount> kind_bytes{};
  std::array<std::uint64_t, kKindCount> kind_messages{};
  std::vector<LogEntry> log;
  double elapsed_seconds = 0.0;

  void record(const LogEntry& e);
  std::uint64_t total_bytes() const { return up_bytes + down_bytes; }
  std::uint64_t bytes_of(MessageKind kind) const { return kind_bytes[static_cast<std::size_t>(kind)]; }
};

struct Bandwidth {
  double up_kbps = 0.0;
  double down_kbps = 0.0;
};

/// 8 * bytes / 1000 / window_seconds per direction. Throws ContractError if
/// window_seconds <= 0.
Bandwidth bandwidth_kbps(const LinkStats& stats, double window_seconds);

struct Delivery {
  Message message;
  double sent_at = 0.0;
  double delivered_at = 0.0;
};

/// Reliable, ordered edge-cloud link with a fixed one-way latency. Sending
/// stamps the per-(device, direction) sequence number, validates the
/// payload, and accounts the framed bytes on the sender side; receiving
/// accounts them again on the receiver side.
class Link {
 public:
  explicit Link(double latency_s);
  virtual ~Link() = default;
  Link(const Link&) = delete;
  Link& operator=(const Link&) = delete;

  /// Throws SchemaError (with no accounting) if the payload does not fit the
  /// kind. Returns the stamped header.
  MessageHeader send(Message msg, double now);

  /// Every message of `dir` due at or before `now`, ordered by delivery time
  /// then send order.
  std::vector<Delivery> receive(Direction dir, double now);

  /// Messages sent but not yet received.
  virtual std::size_t in_flight() const = 0;

  double latency() const { return latency_s_; }
  const LinkStats& sent_stats() const { return sent_; }
  const LinkStats& received_stats() const { return received_; }
  void set_elapsed(double seconds);

 protected:
  struct Pending {
    double sent_at = 0.0;
    double due = 0.0;
    std::uint64_t order = 0;
  };

  virtual void transmit(Direction dir, const Pending& p, std::vector<std::uint8_t> bytes) = 0;
  virtual std::vector<std::pair<Pending, std::vector<std::uint8_t>>> collect(Direction dir, double now) = 0;

 private:
  double latency_s_;
  std::uint64_t next_order_ = 0;
  std::map<std::pair<std::uint32_t, int>, std::uint64_t> seq_;
  LinkStats sent_;
  LinkStats received_;
};

/// In-process link with deterministic latency.
class SimLink final : public Link {
 public:
  explicit SimLink(double latency_s);
  std::size_t in_flight() const override;

 private:
  struct Item {
    Pending pending;
    std::vector<std::uint8_t> bytes;
  };

  void transmit(Direction dir, const Pending& p, std::vector<std::uint8_t> bytes) override;
  std::vector<std::pair<Pending, std::vector<std::uint8_t>>> collect(Direction dir, double now) override;

  std::array<std::vector<Item>, 2> queues_;
};

/// Same framing over a loopback TCP connection (one socket per side). Each
/// direction's bytes are really written to and read back from the kernel;
/// the delivery schedule is still the simulated one, so results match
/// SimLink exactly. Throws std::system_error if the sockets cannot be set up.
class SocketLink final : public Link {
 public:
  explicit SocketLink(double latency_s);
  ~SocketLink() override;
  std::size_t in_flight() const override;

 private:
  struct Endpoint {
    int write_fd = -1;
    int read_fd = -1;
    std::vector<std::uint8_t> outbox;
    std::size_t outbox_pos = 0;
    std::vector<std::uint8_t> inbox;
    std::vector<Pending> sent;  // in write order, not yet parsed
    std::vector<std::pair<Pending, std::vector<std::uint8_t>>> parsed;
  };

  void transmit(Direction dir, const Pending& p, std::vector<std::uint8_t> bytes) override;
  std::vector<std::pair<Pending, std::vector<std::uint8_t>>> collect(Direction dir, double now) override;
  void pump(Endpoint& ep, bool block);

  int fds_[2] = {-1, -1};  // edge side, cloud side
  std::array<Endpoint, 2> ends_;
};

enum class LinkKind { kSim, kSocket };

std::unique_ptr<Link> make_link(LinkKind kind, double latency_s);

}  // namespace shoggoth::transport
