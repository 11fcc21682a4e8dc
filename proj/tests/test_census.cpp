#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "gpmap/census.hpp"
#include "gpmap/oracles.hpp"

using namespace gpmap;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("gpmap-census-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CensusConfig config(std::size_t len, std::size_t shards) {
  CensusConfig c = CensusConfig::defaults_for(len);
  c.shard_count = shards;
  return c;
}

Shard done(std::size_t index, Rank lo, Rank hi, std::vector<Rank> viable) {
  Shard s;
  s.index = index;
  s.lo = lo;
  s.hi = hi;
  s.status = ShardStatus::Done;
  s.viable_ranks = std::move(viable);
  return s;
}

} // namespace

TEST(Shards, PartitionProperty) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const Rank total = rng() % 100000;
    const std::size_t count = 1 + rng() % 300;
    const auto shards = plan_shards(total, count);
    ASSERT_EQ(shards.size(), count);
    Rank cursor = 0, sum = 0;
    for (std::size_t i = 0; i < count; ++i) {
      ASSERT_EQ(shards[i].index, i);
      ASSERT_EQ(shards[i].lo, cursor);
      ASSERT_LE(shards[i].lo, shards[i].hi);
      sum += shards[i].size();
      cursor = shards[i].hi;
    }
    ASSERT_EQ(cursor, total);
    ASSERT_EQ(sum, total);
  }
  EXPECT_THROW(plan_shards(10, 0), UsageError);
}

TEST(Merge, ConcatenatesInShardOrder) {
  auto [ranks, self] = merge_shards({done(1, 10, 20, {12}), done(0, 0, 10, {3, 9})}, 20);
  EXPECT_EQ(ranks, (std::vector<Rank>{3, 9, 12}));
  EXPECT_EQ(self, 0U);
}

TEST(Merge, OverlapAndGapNameTheInterval) {
  try {
    merge_shards({done(0, 0, 10, {}), done(1, 5, 20, {})}, 20);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("overlaps interval [5, 10)"), std::string::npos) << e.what();
  }
  try {
    merge_shards({done(0, 0, 10, {}), done(1, 12, 20, {})}, 20);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("[10, 12)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(merge_shards({done(0, 0, 10, {})}, 20), IntegrityError);
  Shard pending = done(0, 0, 20, {});
  pending.status = ShardStatus::Pending;
  EXPECT_THROW(merge_shards({pending}, 20), IntegrityError);
  EXPECT_THROW(merge_shards({done(0, 0, 20, {5, 3})}, 20), IntegrityError);
}

TEST(Census, LengthOneHasNoReplicators) {
  // A single instruction cannot allocate, copy and divide.
  const auto res = compute_census(config(1, 4));
  EXPECT_EQ(res.total, 8U);
  EXPECT_EQ(res.viable_count(), 0U);
  EXPECT_TRUE(oracle::naive_viable_set(1, {}, Limits::defaults_for(1), {}).empty());
}

TEST(Census, LengthTwoHasNoReplicators) {
  EXPECT_EQ(compute_census(config(2, 3)).viable_count(), 0U);
}

TEST(Census, LengthThreeIsThePermutationsOfAllocCopyDivide) {
  const auto res = compute_census(config(3, 5));
  std::vector<Rank> expected;
  std::string perm = "cde";
  do {
    expected.push_back(Genome::from_letters(perm, 8).rank());
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(res.viable_ranks, expected);
  EXPECT_EQ(res.self_replicator_count, 6U);
}

TEST(Census, LengthSixMatchesNaiveOracle) {
  const auto res = compute_census(config(6, 64));
  const auto naive = oracle::naive_viable_set(6, {}, Limits::defaults_for(6), {});
  EXPECT_EQ(res.viable_ranks, naive);
  // Frozen from the naive oracle.
  EXPECT_EQ(res.viable_count(), 15795U);
  EXPECT_TRUE(std::binary_search(naive.begin(), naive.end(), Genome::from_letters("cdfeaa", 8).rank()));
  EXPECT_LE(res.self_replicator_count, res.viable_count());
}

TEST(Census, OracleEquivalenceSmallLengths) {
  const std::vector<std::size_t> frozen{0, 0, 6, 118, 1510};
  for (std::size_t len = 1; len <= 5; ++len) {
    const auto naive = oracle::naive_viable_set(len, {}, Limits::defaults_for(len), {});
    EXPECT_EQ(naive.size(), frozen[len - 1]) << "L=" << len;
    for (std::size_t shards : {1, 3, 64}) {
      for (unsigned threads : {1U, 3U}) {
        const auto res = compute_census(config(len, shards), threads);
        ASSERT_EQ(res.viable_ranks, naive) << "L=" << len << " shards=" << shards;
        ASSERT_TRUE(res.bitmap);
        ASSERT_EQ(res.bitmap->count(), res.viable_count());
      }
    }
  }
}

TEST(Census, MonotoneUnderBudgetIncrease) {
  std::vector<std::uint64_t> limits{10, 20, 40, 80, 128, 400};
  std::vector<Rank> prev;
  for (auto t : limits) {
    CensusConfig c = config(4, 8);
    c.limits.step_limit = t;
    const auto res = compute_census(c);
    ASSERT_TRUE(std::includes(res.viable_ranks.begin(), res.viable_ranks.end(), prev.begin(), prev.end()))
        << "T=" << t;
    prev = res.viable_ranks;
  }
  const auto base = compute_census(config(4, 8)).viable_ranks;
  for (Budgets b : {Budgets{1, 1}, Budgets{2, 2}, Budgets{32, 256}}) {
    CensusConfig c = config(4, 8);
    c.budgets = b;
    const auto res = compute_census(c).viable_ranks;
    if (b.chain_depth >= 16 && b.chain_width >= 64) {
      ASSERT_TRUE(std::includes(res.begin(), res.end(), base.begin(), base.end()));
    } else {
      ASSERT_TRUE(std::includes(base.begin(), base.end(), res.begin(), res.end()));
    }
  }
}

TEST(Census, EnvelopeEnforcedAtStartup) {
  EXPECT_THROW(compute_census(config(22, 4)), UsageError);
  CensusConfig c = config(3, 0);
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(CensusFiles, FormatIsBitExact) {
  TempDir dir;
  const auto prefix = dir / "l4";
  const auto run = run_census(config(4, 16), prefix);
  ASSERT_TRUE(run.completed);
  const CensusPaths paths(prefix);
  const auto viable = slurp(paths.viable);
  const auto& ranks = run.result->viable_ranks;
  ASSERT_EQ(viable.size(), 8 * ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    Rank r = 0;
    for (int b = 7; b >= 0; --b) r = (r << 8) | viable[8 * i + b];
    ASSERT_EQ(r, ranks[i]);
  }
  const auto bitmap = slurp(paths.bitmap);
  ASSERT_EQ(bitmap.size(), (4096U + 7) / 8);
  std::size_t pop = 0;
  for (Rank r = 0; r < 4096; ++r) {
    const bool bit = (bitmap[r >> 3] >> (r & 7)) & 1;
    pop += bit;
    ASSERT_EQ(bit, std::binary_search(ranks.begin(), ranks.end(), r));
  }
  EXPECT_EQ(pop, ranks.size());

  std::ifstream in(paths.meta);
  const auto meta = nlohmann::json::parse(in);
  EXPECT_EQ(meta["format_version"], 1);
  EXPECT_EQ(meta["isa_id"], "default-v1");
  EXPECT_EQ(meta["L"], 4);
  EXPECT_EQ(meta["D"], 8);
  EXPECT_EQ(meta["T"], 128);
  EXPECT_EQ(meta["M"], 4);
  EXPECT_EQ(meta["G"], 16);
  EXPECT_EQ(meta["B"], 64);
  EXPECT_EQ(meta["total"], "4096");
  EXPECT_EQ(meta["viable_count"], 118);
  EXPECT_EQ(meta["self_replicator_count"], 118);
  EXPECT_EQ(meta["shard_count"], 16);
  EXPECT_TRUE(meta["created_utc"].is_string());
  EXPECT_EQ(meta["checksums"]["viable.bin"], sha256_hex(viable));
  EXPECT_EQ(meta["checksums"]["bitmap.bin"], sha256_hex(bitmap));
  EXPECT_FALSE(fs::exists(paths.checkpoint_dir));

  const auto loaded = load_census(prefix);
  EXPECT_EQ(loaded.viable_ranks, ranks);
  EXPECT_EQ(loaded.bitmap, run.result->bitmap);
}

TEST(CensusFiles, BitmapCanBeDisabled) {
  TempDir dir;
  CensusConfig c = config(3, 2);
  c.write_bitmap = false;
  const auto run = run_census(c, dir / "nobm");
  EXPECT_FALSE(fs::exists(CensusPaths(dir / "nobm").bitmap));
  const auto loaded = load_census(dir / "nobm");
  EXPECT_FALSE(loaded.bitmap);
  EXPECT_EQ(loaded.viable_count(), 6U);
}

TEST(CensusFiles, TamperingIsDetected) {
  TempDir dir;
  const auto prefix = dir / "t";
  run_census(config(4, 4), prefix);
  const CensusPaths paths(prefix);
  auto bytes = slurp(paths.viable);
  bytes[0] ^= 1;
  {
    std::ofstream out(paths.viable, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(load_census(prefix), IntegrityError);
  EXPECT_THROW(load_census(dir / "missing"), IoError);
}

TEST(CensusFiles, ShardAndThreadCountsGiveIdenticalPayloads) {
  TempDir dir;
  std::vector<std::uint8_t> ref_viable, ref_bitmap;
  int i = 0;
  for (std::size_t shards : {1, 64}) {
    for (unsigned threads : {1U, 4U}) {
      const auto prefix = dir / ("s" + std::to_string(i++));
      RunOptions ro;
      ro.threads = threads;
      ASSERT_TRUE(run_census(config(5, shards), prefix, ro).completed);
      const CensusPaths p(prefix);
      if (ref_viable.empty()) {
        ref_viable = slurp(p.viable);
        ref_bitmap = slurp(p.bitmap);
      } else {
        EXPECT_EQ(slurp(p.viable), ref_viable);
        EXPECT_EQ(slurp(p.bitmap), ref_bitmap);
      }
    }
  }
}

TEST(CensusFiles, ResumeAfterInterruptIsByteIdentical) {
  TempDir dir;
  const CensusConfig c = config(5, 16);
  ASSERT_TRUE(run_census(c, dir / "full").completed);

  const auto prefix = dir / "resumed";
  RunOptions stop;
  stop.stop_after_shards = 3;
  const auto first = run_census(c, prefix, stop);
  EXPECT_FALSE(first.completed);
  EXPECT_EQ(first.shards_computed, 3U);
  const CensusPaths p(prefix);
  EXPECT_FALSE(fs::exists(p.viable));
  EXPECT_TRUE(fs::exists(p.checkpoint_dir / "shard-000002.bin"));

  // A torn shard file is discarded and recomputed.
  { std::ofstream torn(p.checkpoint_dir / "shard-000003.bin", std::ios::binary); torn << "GPMS"; }

  const auto second = run_census(c, prefix);
  ASSERT_TRUE(second.completed);
  EXPECT_EQ(second.shards_resumed, 3U);
  EXPECT_EQ(second.shards_computed, 13U);
  EXPECT_EQ(slurp(p.viable), slurp(CensusPaths(dir / "full").viable));
  EXPECT_EQ(slurp(p.bitmap), slurp(CensusPaths(dir / "full").bitmap));
}

TEST(CensusFiles, RefusesMismatchedCheckpoint) {
  TempDir dir;
  const auto prefix = dir / "mm";
  RunOptions stop;
  stop.stop_after_shards = 1;
  run_census(config(4, 8), prefix, stop);
  CensusConfig other = config(4, 8);
  other.limits.step_limit = 99;
  EXPECT_THROW(run_census(other, prefix), IntegrityError);
  RunOptions force;
  force.force = true;
  EXPECT_TRUE(run_census(other, prefix, force).completed);
}

TEST(CensusFiles, RefusesToOverwriteWithoutForce) {
  TempDir dir;
  run_census(config(3, 2), dir / "o");
  EXPECT_THROW(run_census(config(3, 2), dir / "o"), IoError);
  RunOptions force;
  force.force = true;
  EXPECT_TRUE(run_census(config(3, 2), dir / "o", force).completed);
}

TEST(CensusFiles, UnwritableOutputFailsBeforeCompute) {
  TempDir dir;
  { std::ofstream f(dir / "plainfile"); f << "x"; }
  EXPECT_THROW(run_census(config(6, 4), dir / "plainfile" / "census"), IoError);
}
