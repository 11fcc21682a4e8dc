#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "gpmap/genome.hpp"

namespace gpmap {

/// Membership bitmap over [0, size). Bit r lives in byte r >> 3 at position
/// r & 7 (LSB first); words are assembled little-endian from those bytes so the
/// in-memory and on-disk layouts agree.
class Bitmap {
public:
  Bitmap() = default;
  explicit Bitmap(Rank size) : size_(size), words_((size + 63) / 64, 0) {}

  [[nodiscard]] Rank size() const { return size_; }
  [[nodiscard]] std::size_t byte_size() const { return static_cast<std::size_t>((size_ + 7) / 8); }

  void set(Rank r) { words_[r >> 6] |= std::uint64_t{1} << (r & 63); }
  [[nodiscard]] bool test(Rank r) const {
    return r < size_ && ((words_[r >> 6] >> (r & 63)) & 1U) != 0;
  }

  [[nodiscard]] std::uint64_t count() const {
    std::uint64_t n = 0;
    for (auto w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
    return n;
  }

  /// Calls fn(rank) for every set bit in ascending order.
  template <class Fn>
  void for_each_set(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits != 0) {
        const int b = std::countr_zero(bits);
        fn(static_cast<Rank>(w) * 64 + static_cast<Rank>(b));
        bits &= bits - 1;
      }
    }
  }

  [[nodiscard]] std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out(byte_size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
    }
    return out;
  }

  static Bitmap from_bytes(Rank size, std::span<const std::uint8_t> bytes) {
    Bitmap bm(size);
    if (bytes.size() != bm.byte_size()) {
      throw IntegrityError("bitmap holds " + std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(bm.byte_size()));
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      bm.words_[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
    }
    const Rank tail = size % 64;
    if (tail != 0 && (bm.words_.back() >> tail) != 0) {
      throw IntegrityError("bitmap has bits set beyond the end of the space");
    }
    return bm;
  }

  bool operator==(const Bitmap&) const = default;

private:
  Rank size_ = 0;
  std::vector<std::uint64_t> words_;
};

} // namespace gpmap
