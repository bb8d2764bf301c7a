#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "shoggoth/transport.hpp"
#include "shoggoth/wire.hpp"

using namespace shoggoth;
using namespace shoggoth::transport;

namespace {

Message make(MessageKind kind, std::uint32_t device, std::vector<std::uint8_t> payload) {
  Message m;
  m.header.kind = kind;
  m.header.device_id = device;
  m.payload = std::move(payload);
  return m;
}

}  // namespace

TEST(Framing, StatsMessageGoldenBytes) {
  Message m = make(MessageKind::kStatsUp, 7, encode_stats({0.5, 0.25}));
  m.header.seq = 3;
  const std::vector<std::uint8_t> expected{
      'S', 'G', 0x01, 0x06,                            // magic, version, kind
      0x07, 0x00, 0x00, 0x00,                          // device
      0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // seq
      0x10, 0x00, 0x00, 0x00,                          // payload length
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xE0, 0x3F,  // 0.5
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xD0, 0x3F,  // 0.25
  };
  EXPECT_EQ(encode_message(m), expected);
  const Message back = decode_message(expected);
  EXPECT_EQ(back.header.kind, MessageKind::kStatsUp);
  EXPECT_EQ(back.header.device_id, 7u);
  EXPECT_EQ(back.header.seq, 3u);
  EXPECT_EQ(decode_stats(back.payload).lambda, 0.25);
}

TEST(Framing, LabelBatchGoldenBytes) {
  const LabelBatchPayload p{{{300, 2}, {315, 1}}, 2.0, 0.0};
  const std::vector<std::uint8_t> expected{
      0x02, 0x00, 0x00, 0x00,                          // n
      0x2C, 0x01, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00,  // (300, 2)
      0x3B, 0x01, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00,  // (315, 1)
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x40,  // 2.0
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // 0.0
  };
  EXPECT_EQ(encode_label_batch(p), expected);
  const auto back = decode_label_batch(expected);
  ASSERT_EQ(back.labels.size(), 2u);
  EXPECT_EQ(back.labels[1].frame_id, 315u);
  EXPECT_EQ(back.new_rate, 2.0);
}

TEST(Framing, RoundTripEveryKind) {
  const std::vector<Message> msgs{
      make(MessageKind::kFrameBatchUp, 1, make_frame_blob(37)),
      make(MessageKind::kLabelBatchDown, 1, encode_label_batch({{{1, 0}}, 0.5, 0.1})),
      make(MessageKind::kModelDown, 2, wire::encode_record({{1.0, 2.0}, {3.0}})),
      make(MessageKind::kInferRequestUp, 3, make_frame_blob(5)),
      make(MessageKind::kInferResponseDown, 3, encode_infer_response({{4, 1}, {5, 3}})),
      make(MessageKind::kStatsUp, 9, encode_stats({0.9, 0.1})),
  };
  for (const auto& m : msgs) {
    const auto bytes = encode_message(m);
    EXPECT_EQ(bytes.size(), m.wire_size());
    EXPECT_EQ(framed_length(bytes), bytes.size());
    const Message back = decode_message(bytes);
    EXPECT_EQ(back.header.kind, m.header.kind);
    EXPECT_EQ(back.header.device_id, m.header.device_id);
    EXPECT_EQ(back.payload, m.payload);
  }
}

TEST(Framing, RejectsCorruptHeaders) {
  auto bytes = encode_message(make(MessageKind::kStatsUp, 1, encode_stats({})));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_message(bad_magic), wire::DecodeError);
  auto bad_version = bytes;
  bad_version[2] = 9;
  EXPECT_THROW(decode_message(bad_version), wire::DecodeError);
  auto bad_kind = bytes;
  bad_kind[3] = 0;
  EXPECT_THROW(decode_message(bad_kind), wire::DecodeError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_message(truncated), wire::DecodeError);
  EXPECT_THROW(framed_length(std::span(bytes).first(10)), wire::DecodeError);
}

TEST(Framing, SchemaViolationsRejected) {
  EXPECT_THROW(validate_payload(MessageKind::kStatsUp, std::vector<std::uint8_t>(15)), SchemaError);
  EXPECT_THROW(validate_payload(MessageKind::kLabelBatchDown, std::vector<std::uint8_t>(10)), SchemaError);
  auto resp = encode_infer_response({{1, 1}});
  resp.push_back(0);
  EXPECT_THROW(validate_payload(MessageKind::kInferResponseDown, resp), SchemaError);
  EXPECT_THROW(validate_payload(MessageKind::kModelDown, std::vector<std::uint8_t>{1, 2, 3}), SchemaError);
  EXPECT_NO_THROW(validate_payload(MessageKind::kFrameBatchUp, {}));
}

TEST(Compression, SizeIsCeilingOfRatio) {
  const CompressionModel m{20000, 40.0, 1.0, 3.0};
  EXPECT_EQ(m.compressed_size(0), 0u);
  EXPECT_EQ(m.compressed_size(1), 500u);
  EXPECT_EQ(m.compressed_size(120), 60000u);
  const CompressionModel odd{1001, 3.0, 1.0, 3.0};
  EXPECT_EQ(odd.compressed_size(1), 334u);
}

TEST(Compression, LatencyWithinBounds) {
  const CompressionModel m;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double l = m.sample_latency(rng);
    ASSERT_GE(l, 1.0);
    ASSERT_LE(l, 3.0);
  }
  CompressionModel bad = m;
  bad.latency_max_s = 4.0;
  EXPECT_FALSE(validate(bad).empty());
}

TEST(Bandwidth, KbpsFromBytes) {
  LinkStats s;
  s.record({0.0, Direction::kUp, 1, 1, MessageKind::kFrameBatchUp, 1000});
  s.record({0.0, Direction::kDown, 1, 1, MessageKind::kLabelBatchDown, 250});
  const Bandwidth b = bandwidth_kbps(s, 2.0);
  EXPECT_DOUBLE_EQ(b.up_kbps, 4.0);
  EXPECT_DOUBLE_EQ(b.down_kbps, 1.0);
  EXPECT_THROW(bandwidth_kbps(s, 0.0), ContractError);
}

class LinkTest : public ::testing::TestWithParam<LinkKind> {};

TEST_P(LinkTest, DeliversInOrderAfterLatency) {
  auto link = make_link(GetParam(), 0.5);
  link->send(make(MessageKind::kStatsUp, 1, encode_stats({0.1, 0.0})), 1.0);
  link->send(make(MessageKind::kFrameBatchUp, 1, make_frame_blob(1000)), 1.2);
  link->send(make(MessageKind::kLabelBatchDown, 1, encode_label_batch({{}, 1.0, 0.0})), 1.0);
  EXPECT_TRUE(link->receive(Direction::kUp, 1.4).empty());
  auto up = link->receive(Direction::kUp, 1.5);
  ASSERT_EQ(up.size(), 1u);
  EXPECT_EQ(up[0].message.header.kind, MessageKind::kStatsUp);
  EXPECT_DOUBLE_EQ(up[0].delivered_at, 1.5);
  EXPECT_EQ(link->in_flight(), 2u);
  up = link->receive(Direction::kUp, 10.0);
  ASSERT_EQ(up.size(), 1u);
  EXPECT_EQ(up[0].message.payload, make_frame_blob(1000));
  const auto down = link->receive(Direction::kDown, 10.0);
  ASSERT_EQ(down.size(), 1u);
  EXPECT_EQ(link->in_flight(), 0u);
}

TEST_P(LinkTest, SequenceNumbersPerDeviceAndDirection) {
  auto link = make_link(GetParam(), 0.0);
  EXPECT_EQ(link->send(make(MessageKind::kStatsUp, 1, encode_stats({})), 0).seq, 1u);
  EXPECT_EQ(link->send(make(MessageKind::kFrameBatchUp, 1, {}), 0).seq, 2u);
  EXPECT_EQ(link->send(make(MessageKind::kStatsUp, 2, encode_stats({})), 0).seq, 1u);
  EXPECT_EQ(link->send(make(MessageKind::kLabelBatchDown, 1, encode_label_batch({})), 0).seq, 1u);
}

TEST_P(LinkTest, AccountingConservesBytes) {
  auto link = make_link(GetParam(), 0.05);
  std::uint64_t up = 0, down = 0;
  for (int i = 0; i < 50; ++i) {
    auto blob = make_frame_blob(static_cast<std::size_t>(100 + 37 * i));
    up += kHeaderSize + blob.size();
    link->send(make(MessageKind::kFrameBatchUp, 1, std::move(blob)), i);
    auto labels = encode_label_batch({{{static_cast<std::uint32_t>(i), 1}}, 1.0, 0.2});
    down += kHeaderSize + labels.size();
    link->send(make(MessageKind::kLabelBatchDown, 1, std::move(labels)), i + 0.5);
    link->receive(Direction::kUp, i + 0.2);
    link->receive(Direction::kDown, i + 0.2);
  }
  link->receive(Direction::kUp, 1e9);
  link->receive(Direction::kDown, 1e9);
  EXPECT_EQ(link->sent_stats().up_bytes, up);
  EXPECT_EQ(link->sent_stats().down_bytes, down);
  EXPECT_EQ(link->received_stats().up_bytes, up);
  EXPECT_EQ(link->received_stats().down_bytes, down);
  EXPECT_EQ(link->sent_stats().kind_messages[static_cast<std::size_t>(MessageKind::kFrameBatchUp)], 50u);
  EXPECT_EQ(link->sent_stats().bytes_of(MessageKind::kLabelBatchDown), down);
}

TEST_P(LinkTest, SchemaErrorIsNotAccounted) {
  auto link = make_link(GetParam(), 0.0);
  EXPECT_THROW(link->send(make(MessageKind::kStatsUp, 1, {1, 2, 3}), 0.0), SchemaError);
  EXPECT_EQ(link->sent_stats().total_bytes(), 0u);
  EXPECT_EQ(link->in_flight(), 0u);
  EXPECT_EQ(link->send(make(MessageKind::kStatsUp, 1, encode_stats({})), 0).seq, 1u);
}

TEST_P(LinkTest, LargePayloadSurvives) {
  auto link = make_link(GetParam(), 0.0);
  const auto blob = make_frame_blob(3'000'000);
  link->send(make(MessageKind::kFrameBatchUp, 4, blob), 0.0);
  const auto got = link->receive(Direction::kUp, 0.0);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].message.payload, blob);
}

INSTANTIATE_TEST_SUITE_P(Kinds, LinkTest, ::testing::Values(LinkKind::kSim, LinkKind::kSocket),
                         [](const auto& info) { return info.param == LinkKind::kSim ? "Sim" : "Socket"; });

TEST(Wire, RecordRoundTripAndSize) {
  const std::vector<std::vector<double>> arrays{{1.5, -2.0}, {}, {3.25}};
  const auto bytes = wire::encode_record(arrays);
  EXPECT_EQ(bytes.size(), wire::record_size({2, 0, 1}));
  EXPECT_EQ(wire::decode_record(bytes), arrays);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_THROW(wire::decode_record(cut), wire::DecodeError);
}
