#include "shoggoth/wire.hpp"

#include <bit>
#include <string>

namespace shoggoth::wire {

void ByteWriter::f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

std::uint64_t ByteReader::get(int width) {
  if (remaining() < static_cast<std::size_t>(width)) {
    throw DecodeError("truncated input: need " + std::to_string(width) + " bytes, have " +
                      std::to_string(remaining()));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
  }
  pos_ += static_cast<std::size_t>(width);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(get(8)); }

std::vector<std::uint8_t> encode_record(const std::vector<std::vector<double>>& arrays) {
  ByteWriter w;
  for (const auto& a : arrays) {
    w.u64(a.size());
    for (double v : a) w.f64(v);
  }
  return std::move(w).take();
}

std::vector<std::vector<double>> decode_record(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::vector<std::vector<double>> out;
  while (!r.done()) {
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 8) throw DecodeError("array length exceeds remaining payload");
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = r.f64();
    out.push_back(std::move(a));
  }
  return out;
}

std::size_t record_size(const std::vector<std::size_t>& array_lengths) {
  std::size_t total = 0;
  for (std::size_t n : array_lengths) total += 8 + 8 * n;
  return total;
}

}  // namespace shoggoth::wire
