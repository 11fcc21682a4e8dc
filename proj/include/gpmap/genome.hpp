#pragma once

// Genome representation, instruction set description and the base-D
// rank/unrank bijection used to enumerate sequence space.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpmap/errors.hpp"

namespace gpmap {

using Rank = std::uint64_t;
using Symbol = std::uint8_t;

/// Largest supported space size: ranks must fit in 63 bits.
inline constexpr Rank kMaxSpaceSize = Rank{1} << 63;

/// Letters a..z are the only textual encoding, so alphabets stop at 26.
inline constexpr unsigned kMaxAlphabet = 26;

enum class Instruction : std::uint8_t {
  NopA,
  NopB,
  Alloc,
  Copy,
  Divide,
  IfDone,
  JmpA,
  Halt,
};

constexpr std::string_view instruction_name(Instruction inst) {
  switch (inst) {
    case Instruction::NopA: return "nop-a";
    case Instruction::NopB: return "nop-b";
    case Instruction::Alloc: return "alloc";
    case Instruction::Copy: return "copy";
    case Instruction::Divide: return "divide";
    case Instruction::IfDone: return "if-done";
    case Instruction::JmpA: return "jmp-a";
    case Instruction::Halt: return "halt";
  }
  return "?";
}

/// Instruction set identity. Symbols [0, core_size) map onto the core table;
/// the pad_nops symbols above it all decode to nop-a, so any D >= core_size is
/// reachable while keeping decoding total.
struct IsaSpec {
  std::string id = "default-v1";
  unsigned core_size = 8;
  unsigned pad_nops = 0;

  [[nodiscard]] unsigned alphabet() const { return core_size + pad_nops; }

  bool operator==(const IsaSpec&) const = default;

  static IsaSpec from_id(std::string_view id, unsigned pad_nops = 0) {
    if (id != "default-v1") {
      throw UsageError("unknown ISA '" + std::string(id) + "' (supported: default-v1)");
    }
    IsaSpec isa;
    isa.pad_nops = pad_nops;
    if (isa.alphabet() > kMaxAlphabet) {
      throw UsageError("alphabet size " + std::to_string(isa.alphabet()) +
                       " exceeds the 26-letter genome encoding");
    }
    return isa;
  }

  /// Inverse of alphabet(): the ISA whose alphabet is exactly D.
  static IsaSpec for_alphabet(std::string_view id, unsigned alphabet) {
    const IsaSpec base = from_id(id);
    if (alphabet < base.core_size) {
      throw IntegrityError("alphabet " + std::to_string(alphabet) + " is smaller than ISA '" +
                           std::string(id) + "' core size");
    }
    return from_id(id, alphabet - base.core_size);
  }
};

inline Instruction decode(unsigned symbol, const IsaSpec& isa) {
  if (symbol >= isa.alphabet()) {
    throw DomainError("symbol " + std::to_string(symbol) + " outside alphabet of size " +
                      std::to_string(isa.alphabet()));
  }
  if (symbol >= isa.core_size) return Instruction::NopA;
  return static_cast<Instruction>(symbol);
}

/// D^L if it fits under the 63-bit rank ceiling.
constexpr std::optional<Rank> checked_space_size(std::size_t length, unsigned alphabet) {
  Rank total = 1;
  for (std::size_t i = 0; i < length; ++i) {
    if (total > kMaxSpaceSize / alphabet) return std::nullopt;
    total *= alphabet;
  }
  return total;
}

inline Rank space_size(std::size_t length, unsigned alphabet) {
  if (length == 0) throw UsageError("genome length must be positive");
  if (alphabet < 2) throw UsageError("alphabet must have at least 2 symbols");
  auto total = checked_space_size(length, alphabet);
  if (!total) {
    throw UsageError(std::to_string(alphabet) + "^" + std::to_string(length) +
                     " sequences do not fit the 64-bit rank space: ranks are stored as unsigned "
                     "64-bit integers and L*log2(D) must not exceed 63");
  }
  return *total;
}

/// Fixed-length circular sequence over an alphabet of size D.
class Genome {
public:
  Genome() = default;

  Genome(std::vector<Symbol> symbols, unsigned alphabet)
      : symbols_(std::move(symbols)), alphabet_(alphabet) {
    for (std::size_t p = 0; p < symbols_.size(); ++p) {
      if (symbols_[p] >= alphabet_) {
        throw DomainError("symbol " + std::to_string(symbols_[p]) + " at position " +
                          std::to_string(p) + " outside alphabet of size " +
                          std::to_string(alphabet_));
      }
    }
  }

  static Genome from_rank(Rank rank, std::size_t length, unsigned alphabet) {
    const Rank total = space_size(length, alphabet);
    if (rank >= total) {
      throw DomainError("rank " + std::to_string(rank) + " outside [0, " + std::to_string(total) +
                        ")");
    }
    std::vector<Symbol> symbols(length);
    for (std::size_t p = length; p-- > 0;) {
      symbols[p] = static_cast<Symbol>(rank % alphabet);
      rank /= alphabet;
    }
    Genome g;
    g.symbols_ = std::move(symbols);
    g.alphabet_ = alphabet;
    return g;
  }

  /// Letter encoding: 'a' is symbol 0.
  static Genome from_letters(std::string_view letters, unsigned alphabet) {
    if (letters.empty()) throw UsageError("genome string is empty");
    std::vector<Symbol> symbols(letters.size());
    for (std::size_t p = 0; p < letters.size(); ++p) {
      const char c = letters[p];
      if (c < 'a' || c >= static_cast<char>('a' + alphabet)) {
        throw UsageError("letter '" + std::string(1, c) + "' at position " + std::to_string(p) +
                         " is outside the alphabet a.." +
                         std::string(1, static_cast<char>('a' + alphabet - 1)));
      }
      symbols[p] = static_cast<Symbol>(c - 'a');
    }
    return Genome(std::move(symbols), alphabet);
  }

  [[nodiscard]] std::size_t length() const { return symbols_.size(); }
  [[nodiscard]] unsigned alphabet() const { return alphabet_; }
  [[nodiscard]] std::span<const Symbol> symbols() const { return symbols_; }
  Symbol operator[](std::size_t p) const { return symbols_[p]; }

  /// Base-D value, symbol 0 most significant.
  [[nodiscard]] Rank rank() const {
    Rank r = 0;
    for (Symbol s : symbols_) r = r * alphabet_ + s;
    return r;
  }

  [[nodiscard]] std::string letters() const {
    std::string out(symbols_.size(), 'a');
    for (std::size_t p = 0; p < symbols_.size(); ++p) out[p] = static_cast<char>('a' + symbols_[p]);
    return out;
  }

  /// Left rotation: position p of the result holds symbol (p + shift) mod L.
  [[nodiscard]] Genome rotated(std::size_t shift) const {
    const std::size_t len = symbols_.size();
    std::vector<Symbol> out(len);
    for (std::size_t p = 0; p < len; ++p) out[p] = symbols_[(p + shift) % len];
    Genome g;
    g.symbols_ = std::move(out);
    g.alphabet_ = alphabet_;
    return g;
  }

  /// Odometer step to rank()+1; returns false on wrap-around to all zeros.
  bool increment() {
    for (std::size_t p = symbols_.size(); p-- > 0;) {
      if (++symbols_[p] < alphabet_) return true;
      symbols_[p] = 0;
    }
    return false;
  }

  bool operator==(const Genome&) const = default;

private:
  std::vector<Symbol> symbols_;
  unsigned alphabet_ = 0;
};

inline std::size_t hamming_distance(std::span<const Symbol> a, std::span<const Symbol> b) {
  std::size_t d = 0;
  for (std::size_t p = 0; p < a.size(); ++p) d += a[p] != b[p];
  return d;
}

inline std::size_t hamming_distance(const Genome& a, const Genome& b) {
  return hamming_distance(a.symbols(), b.symbols());
}

/// All one-mutant neighbors, position-major with ascending replacement symbol.
inline std::vector<Genome> hamming_neighbors(const Genome& g) {
  std::vector<Genome> out;
  out.reserve(g.length() * (g.alphabet() - 1));
  std::vector<Symbol> work(g.symbols().begin(), g.symbols().end());
  for (std::size_t p = 0; p < g.length(); ++p) {
    const Symbol original = work[p];
    for (unsigned s = 0; s < g.alphabet(); ++s) {
      if (s == original) continue;
      work[p] = static_cast<Symbol>(s);
      out.emplace_back(work, g.alphabet());
    }
    work[p] = original;
  }
  return out;
}

/// Ranks of the one-mutant neighbors, same order as hamming_neighbors().
/// Works on ranks directly: substituting symbol s at position p shifts the
/// rank by (s - old) * D^(L-1-p).
inline std::vector<Rank> neighbor_ranks(Rank rank, std::size_t length, unsigned alphabet) {
  std::vector<Rank> out;
  out.reserve(length * (alphabet - 1));
  std::vector<Rank> place(length);
  Rank weight = 1;
  for (std::size_t p = length; p-- > 0;) {
    place[p] = weight;
    weight *= alphabet;
  }
  for (std::size_t p = 0; p < length; ++p) {
    const Rank digit = (rank / place[p]) % alphabet;
    const Rank base = rank - digit * place[p];
    for (unsigned s = 0; s < alphabet; ++s) {
      if (s == digit) continue;
      out.push_back(base + s * place[p]);
    }
  }
  return out;
}

} // namespace gpmap
