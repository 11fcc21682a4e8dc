#pragma once

// Exhaustive classification of [0, D^L): contiguous rank shards, a worker
// pool, per-shard checkpoints and the on-disk census format.
//
// Census file set for a prefix P:
//   P.meta.json    format_version 1, config echo, counts, SHA-256 of payloads
//   P.viable.bin   viable ranks ascending, u64 little-endian, no header
//   P.bitmap.bin   optional, ceil(D^L / 8) bytes, bit r = byte r>>3 bit r&7

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gpmap/bitmap.hpp"
#include "gpmap/genome.hpp"
#include "gpmap/sha256.hpp"
#include "gpmap/vm.hpp"

namespace gpmap {

inline constexpr int kCensusFormatVersion = 1;

/// Bitmaps are written by default only while the space fits in 2^32 ranks.
inline constexpr Rank kBitmapAutoLimit = Rank{1} << 32;

struct CensusConfig {
  std::size_t length = 1;
  IsaSpec isa;
  Limits limits;
  Budgets budgets;
  std::size_t shard_count = 64;
  std::optional<bool> write_bitmap; // unset: automatic

  static CensusConfig defaults_for(std::size_t length, IsaSpec isa = {}) {
    CensusConfig c;
    c.length = length;
    c.isa = std::move(isa);
    c.limits = Limits::defaults_for(length);
    return c;
  }

  [[nodiscard]] unsigned alphabet() const { return isa.alphabet(); }
  [[nodiscard]] Rank total() const { return space_size(length, alphabet()); }
  [[nodiscard]] bool bitmap_enabled() const {
    return write_bitmap.value_or(total() <= kBitmapAutoLimit);
  }

  /// Throws UsageError when the configuration is outside the supported envelope.
  void validate() const {
    (void)total();
    if (shard_count == 0) throw UsageError("shard count must be positive");
    if (limits.step_limit == 0) throw UsageError("step limit must be at least 1");
    if (limits.offspring_cap == 0) throw UsageError("offspring cap must be at least 1");
    if (budgets.chain_depth == 0 || budgets.chain_width == 0) {
      throw UsageError("chain budgets must be positive");
    }
  }

  /// The fields a checkpoint or census file must agree on.
  [[nodiscard]] nlohmann::ordered_json identity() const {
    return {{"isa_id", isa.id},         {"L", length},
            {"D", alphabet()},          {"T", limits.step_limit},
            {"M", limits.offspring_cap}, {"G", budgets.chain_depth},
            {"B", budgets.chain_width}};
  }
};

enum class ShardStatus { Pending, Done };

struct Shard {
  std::size_t index = 0;
  Rank lo = 0;
  Rank hi = 0;
  ShardStatus status = ShardStatus::Pending;
  std::vector<Rank> viable_ranks;
  std::uint64_t self_replicators = 0;

  [[nodiscard]] Rank size() const { return hi - lo; }
};

/// Splits [0, total) into `count` contiguous, disjoint, gap-free ranges.
inline std::vector<Shard> plan_shards(Rank total, std::size_t count) {
  if (count == 0) throw UsageError("shard count must be positive");
  std::vector<Shard> shards(count);
  const auto bound = [&](std::size_t i) {
    return static_cast<Rank>(static_cast<unsigned __int128>(total) * i / count);
  };
  for (std::size_t i = 0; i < count; ++i) {
    shards[i].index = i;
    shards[i].lo = bound(i);
    shards[i].hi = bound(i + 1);
  }
  return shards;
}

/// Classifies every rank of the shard, unranking once and then incrementing.
inline void classify_shard(const CensusConfig& config, Shard& shard) {
  shard.viable_ranks.clear();
  shard.self_replicators = 0;
  if (shard.lo < shard.hi) {
    Genome g = Genome::from_rank(shard.lo, config.length, config.alphabet());
    for (Rank r = shard.lo; r < shard.hi; ++r) {
      const Phenotype ph = classify(g, config.isa, config.limits, config.budgets);
      if (ph.viable()) {
        shard.viable_ranks.push_back(r);
        if (ph.kind == PhenotypeKind::SelfReplicator) ++shard.self_replicators;
      }
      g.increment();
    }
  }
  shard.status = ShardStatus::Done;
}

struct CensusResult {
  std::size_t length = 0;
  IsaSpec isa;
  Limits limits;
  Budgets budgets;
  std::size_t shard_count = 0;
  Rank total = 0;
  std::uint64_t self_replicator_count = 0;
  std::vector<Rank> viable_ranks;
  std::optional<Bitmap> bitmap;

  [[nodiscard]] unsigned alphabet() const { return isa.alphabet(); }
  [[nodiscard]] std::uint64_t viable_count() const { return viable_ranks.size(); }
};

inline std::string interval_text(Rank lo, Rank hi) {
  return "[" + std::to_string(lo) + ", " + std::to_string(hi) + ")";
}

/// Concatenates completed shards in index order. Returns the merged viable
/// list and the aggregated self-replicator count.
inline std::pair<std::vector<Rank>, std::uint64_t> merge_shards(std::vector<Shard> shards,
                                                                Rank total) {
  std::sort(shards.begin(), shards.end(),
            [](const Shard& a, const Shard& b) { return a.index < b.index; });
  std::vector<Rank> merged;
  std::uint64_t self = 0;
  Rank cursor = 0;
  for (const Shard& s : shards) {
    if (s.status != ShardStatus::Done) {
      throw IntegrityError("shard " + std::to_string(s.index) + " " + interval_text(s.lo, s.hi) +
                           " is not complete");
    }
    if (s.lo > s.hi) {
      throw IntegrityError("shard " + std::to_string(s.index) + " has inverted range " +
                           interval_text(s.lo, s.hi));
    }
    if (s.lo < cursor) {
      throw IntegrityError("shard " + std::to_string(s.index) + " overlaps interval " +
                           interval_text(s.lo, std::min(cursor, s.hi)));
    }
    if (s.lo > cursor) throw IntegrityError("coverage gap at interval " + interval_text(cursor, s.lo));
    Rank prev = s.lo;
    bool first = true;
    for (Rank r : s.viable_ranks) {
      if (r < s.lo || r >= s.hi || (!first && r <= prev)) {
        throw IntegrityError("shard " + std::to_string(s.index) + " lists rank " +
                             std::to_string(r) + " out of order or outside " +
                             interval_text(s.lo, s.hi));
      }
      prev = r;
      first = false;
    }
    merged.insert(merged.end(), s.viable_ranks.begin(), s.viable_ranks.end());
    self += s.self_replicators;
    cursor = s.hi;
  }
  if (cursor != total) throw IntegrityError("coverage gap at interval " + interval_text(cursor, total));
  return {std::move(merged), self};
}

inline CensusResult assemble_result(const CensusConfig& config, std::vector<Shard> shards) {
  CensusResult res;
  res.length = config.length;
  res.isa = config.isa;
  res.limits = config.limits;
  res.budgets = config.budgets;
  res.shard_count = config.shard_count;
  res.total = config.total();
  auto [ranks, self] = merge_shards(std::move(shards), res.total);
  res.viable_ranks = std::move(ranks);
  res.self_replicator_count = self;
  if (config.bitmap_enabled()) {
    Bitmap bm(res.total);
    for (Rank r : res.viable_ranks) bm.set(r);
    res.bitmap = std::move(bm);
  }
  return res;
}

/// Runs `work(shard_index)` for every pending shard on `threads` workers.
/// Workers stop taking new shards once `allow_more()` returns false.
template <class Work, class AllowMore>
void run_pool(const std::vector<std::size_t>& pending, unsigned threads, Work&& work,
              AllowMore&& allow_more) {
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    while (allow_more()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      work(pending[k]);
    }
  };
  threads = std::max(1U, threads);
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
}

/// In-memory census without checkpoints or files.
inline CensusResult compute_census(const CensusConfig& config, unsigned threads = 1) {
  config.validate();
  auto shards = plan_shards(config.total(), config.shard_count);
  std::vector<std::size_t> all(shards.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  run_pool(
      all, threads, [&](std::size_t i) { classify_shard(config, shards[i]); }, [] { return true; });
  return assemble_result(config, std::move(shards));
}

// ---------------------------------------------------------------------------
// File format

struct CensusPaths {
  std::filesystem::path meta, viable, bitmap, checkpoint_dir;

  explicit CensusPaths(const std::filesystem::path& prefix) {
    const std::string p = prefix.string();
    meta = p + ".meta.json";
    viable = p + ".viable.bin";
    bitmap = p + ".bitmap.bin";
    checkpoint_dir = p + ".ckpt";
  }
};

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a temporary file and renames, so readers never see a
/// partially written file.
inline void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_viable(std::span<const Rank> ranks) {
  std::vector<std::uint8_t> out;
  out.reserve(ranks.size() * 8);
  for (Rank r : ranks) detail::put_u64(out, r);
  return out;
}

inline std::vector<Rank> decode_viable(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw IntegrityError("viable payload length is not a multiple of 8");
  std::vector<Rank> ranks(bytes.size() / 8);
  for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = detail::get_u64(bytes, 8 * i);
  return ranks;
}

struct PayloadChecksums {
  std::string viable;
  std::optional<std::string> bitmap;
};

inline nlohmann::ordered_json census_meta(const CensusResult& res, const PayloadChecksums& sums) {
  nlohmann::ordered_json meta;
  meta["format_version"] = kCensusFormatVersion;
  meta["isa_id"] = res.isa.id;
  meta["L"] = res.length;
  meta["D"] = res.alphabet();
  meta["T"] = res.limits.step_limit;
  meta["M"] = res.limits.offspring_cap;
  meta["G"] = res.budgets.chain_depth;
  meta["B"] = res.budgets.chain_width;
  meta["total"] = std::to_string(res.total);
  meta["viable_count"] = res.viable_count();
  meta["self_replicator_count"] = res.self_replicator_count;
  meta["shard_count"] = res.shard_count;
  meta["created_utc"] = detail::utc_timestamp();
  nlohmann::ordered_json checks;
  checks["viable.bin"] = sums.viable;
  if (sums.bitmap) checks["bitmap.bin"] = *sums.bitmap;
  meta["checksums"] = checks;
  return meta;
}

/// Writes the payloads and then the meta file; returns the payload checksums.
inline PayloadChecksums write_census(const CensusResult& res, const std::filesystem::path& prefix) {
  const CensusPaths paths(prefix);
  PayloadChecksums sums;
  const auto viable = encode_viable(res.viable_ranks);
  detail::write_atomic(paths.viable, viable);
  sums.viable = sha256_hex(viable);
  if (res.bitmap) {
    const auto bytes = res.bitmap->to_bytes();
    detail::write_atomic(paths.bitmap, bytes);
    sums.bitmap = sha256_hex(bytes);
  } else {
    std::filesystem::remove(paths.bitmap);
  }
  detail::write_text_atomic(paths.meta, census_meta(res, sums).dump(2) + "\n");
  return sums;
}

/// Loads and verifies a census. Checksums, counts and ordering are checked;
/// any disagreement raises IntegrityError.
inline CensusResult load_census(const std::filesystem::path& prefix) {
  const CensusPaths paths(prefix);
  nlohmann::json meta;
  {
    std::ifstream in(paths.meta);
    if (!in) throw IoError("cannot open census metadata " + paths.meta.string());
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("malformed census metadata " + paths.meta.string() + ": " + e.what());
    }
  }
  CensusResult res;
  try {
    if (meta.at("format_version").get<int>() != kCensusFormatVersion) {
      throw IntegrityError("unsupported census format_version " + meta.at("format_version").dump());
    }
    res.length = meta.at("L").get<std::size_t>();
    res.isa = IsaSpec::for_alphabet(meta.at("isa_id").get<std::string>(), meta.at("D").get<unsigned>());
    res.limits.step_limit = meta.at("T").get<std::uint64_t>();
    res.limits.offspring_cap = meta.at("M").get<std::size_t>();
    res.budgets.chain_depth = meta.at("G").get<std::size_t>();
    res.budgets.chain_width = meta.at("B").get<std::size_t>();
    res.shard_count = meta.at("shard_count").get<std::size_t>();
    res.self_replicator_count = meta.at("self_replicator_count").get<std::uint64_t>();
    res.total = space_size(res.length, res.alphabet());
    if (meta.at("total").get<std::string>() != std::to_string(res.total)) {
      throw IntegrityError("census total " + meta.at("total").dump() + " disagrees with D^L = " +
                           std::to_string(res.total));
    }
    const auto viable_bytes = detail::read_bytes(paths.viable);
    const auto& checks = meta.at("checksums");
    if (sha256_hex(viable_bytes) != checks.at("viable.bin").get<std::string>()) {
      throw IntegrityError("checksum mismatch for " + paths.viable.string());
    }
    res.viable_ranks = decode_viable(viable_bytes);
    if (res.viable_ranks.size() != meta.at("viable_count").get<std::uint64_t>()) {
      throw IntegrityError("viable_count disagrees with " + paths.viable.string());
    }
    for (std::size_t i = 0; i < res.viable_ranks.size(); ++i) {
      if (res.viable_ranks[i] >= res.total || (i > 0 && res.viable_ranks[i] <= res.viable_ranks[i - 1])) {
        throw IntegrityError("viable ranks not strictly ascending within the space");
      }
    }
    if (res.self_replicator_count > res.viable_count()) {
      throw IntegrityError("self_replicator_count exceeds viable_count");
    }
    if (checks.contains("bitmap.bin")) {
      const auto bytes = detail::read_bytes(paths.bitmap);
      if (sha256_hex(bytes) != checks.at("bitmap.bin").get<std::string>()) {
        throw IntegrityError("checksum mismatch for " + paths.bitmap.string());
      }
      Bitmap bm = Bitmap::from_bytes(res.total, bytes);
      if (bm.count() != res.viable_count()) {
        throw IntegrityError("bitmap population count disagrees with viable_count");
      }
      for (Rank r : res.viable_ranks) {
        if (!bm.test(r)) throw IntegrityError("bitmap disagrees with viable rank list");
      }
      res.bitmap = std::move(bm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("incomplete census metadata " + paths.meta.string() + ": " + e.what());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpointed runs

namespace detail {

inline std::vector<std::uint8_t> encode_shard(const Shard& s) {
  std::vector<std::uint8_t> out{'G', 'P', 'M', 'S'};
  put_u64(out, s.index);
  put_u64(out, s.lo);
  put_u64(out, s.hi);
  put_u64(out, s.self_replicators);
  put_u64(out, s.viable_ranks.size());
  for (Rank r : s.viable_ranks) put_u64(out, r);
  return out;
}

/// Returns the shard if the file is intact and matches the planned range.
inline std::optional<Shard> decode_shard(std::span<const std::uint8_t> bytes, const Shard& planned) {
  constexpr std::size_t header = 4 + 5 * 8;
  if (bytes.size() < header || bytes[0] != 'G' || bytes[1] != 'P' || bytes[2] != 'M' || bytes[3] != 'S') {
    return std::nullopt;
  }
  Shard s;
  s.index = get_u64(bytes, 4);
  s.lo = get_u64(bytes, 12);
  s.hi = get_u64(bytes, 20);
  s.self_replicators = get_u64(bytes, 28);
  const std::uint64_t n = get_u64(bytes, 36);
  if (s.index != planned.index || s.lo != planned.lo || s.hi != planned.hi) return std::nullopt;
  if (bytes.size() != header + 8 * n || n > s.hi - s.lo || s.self_replicators > n) return std::nullopt;
  s.viable_ranks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.viable_ranks[i] = get_u64(bytes, header + 8 * i);
    if (s.viable_ranks[i] < s.lo || s.viable_ranks[i] >= s.hi) return std::nullopt;
    if (i > 0 && s.viable_ranks[i] <= s.viable_ranks[i - 1]) return std::nullopt;
  }
  s.status = ShardStatus::Done;
  return s;
}

inline std::filesystem::path shard_file(const std::filesystem::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "shard-%06zu.bin", index);
  return dir / name;
}

} // namespace detail

struct RunOptions {
  unsigned threads = 1;
  /// Overwrite existing census outputs and discard an incompatible checkpoint.
  bool force = false;
  /// Stop after this many newly completed shards (interrupt simulation).
  std::optional<std::size_t> stop_after_shards;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct CensusRun {
  bool completed = false;
  std::size_t shards_resumed = 0;
  std::size_t shards_computed = 0;
  std::optional<CensusResult> result;
  PayloadChecksums checksums;
};

/// Reads the checkpoint configuration, if any.
inline std::optional<nlohmann::json> read_checkpoint_config(const std::filesystem::path& prefix) {
  const auto path = CensusPaths(prefix).checkpoint_dir / "config.json";
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    throw IntegrityError("unreadable checkpoint configuration " + path.string());
  }
}

/// Full census with per-shard checkpoints under P.ckpt/. A compatible
/// checkpoint is resumed; completed shards are not reclassified. On success
/// the census files are written and the checkpoint directory removed.
inline CensusRun run_census(const CensusConfig& config, const std::filesystem::path& prefix,
                            const RunOptions& options = {}) {
  namespace fs = std::filesystem;
  config.validate();
  const CensusPaths paths(prefix);

  if (!options.force && (fs::exists(paths.meta) || fs::exists(paths.viable))) {
    throw IoError("census outputs for " + prefix.string() + " already exist (use --force)");
  }

  // Fail on unwritable destinations before any compute.
  std::error_code ec;
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path(), ec);
  const auto probe = fs::path(prefix.string() + ".probe");
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output location " + prefix.string() + " is not writable");
  }
  fs::remove(probe, ec);

  nlohmann::json ident = config.identity();
  ident["shard_count"] = config.shard_count;
  if (auto existing = read_checkpoint_config(prefix)) {
    if (*existing != ident) {
      if (!options.force) {
        throw IntegrityError("checkpoint in " + paths.checkpoint_dir.string() +
                             " was written for a different configuration " + existing->dump() +
                             "; refusing to resume (use --force to discard it)");
      }
      fs::remove_all(paths.checkpoint_dir);
    }
  }
  fs::create_directories(paths.checkpoint_dir, ec);
  if (ec) throw IoError("cannot create " + paths.checkpoint_dir.string() + ": " + ec.message());
  detail::write_text_atomic(paths.checkpoint_dir / "config.json", ident.dump() + "\n");

  auto shards = plan_shards(config.total(), config.shard_count);
  CensusRun run;
  std::vector<std::size_t> pending;
  for (auto& s : shards) {
    const auto file = detail::shard_file(paths.checkpoint_dir, s.index);
    if (fs::exists(file)) {
      if (auto loaded = detail::decode_shard(detail::read_bytes(file), s)) {
        s = std::move(*loaded);
        ++run.shards_resumed;
        continue;
      }
    }
    pending.push_back(s.index);
  }

  std::atomic<std::size_t> completed{0};
  std::atomic<std::size_t> done_total{run.shards_resumed};
  const auto allow_more = [&] {
    return !options.stop_after_shards || completed.load() < *options.stop_after_shards;
  };
  run_pool(
      pending, options.threads,
      [&](std::size_t i) {
        classify_shard(config, shards[i]);
        detail::write_atomic(detail::shard_file(paths.checkpoint_dir, i), detail::encode_shard(shards[i]));
        ++completed;
        const std::size_t n = ++done_total;
        if (options.progress) options.progress(n, shards.size());
      },
      allow_more);
  run.shards_computed = completed.load();

  const bool all_done = std::all_of(shards.begin(), shards.end(),
                                    [](const Shard& s) { return s.status == ShardStatus::Done; });
  if (!all_done) return run;

  CensusResult res = assemble_result(config, std::move(shards));
  run.checksums = write_census(res, prefix);
  fs::remove_all(paths.checkpoint_dir, ec);
  run.result = std::move(res);
  run.completed = true;
  return run;
}

} // namespace gpmap
