#include <map>
#include <random>

#include <gtest/gtest.h>

#include "gpmap/vm.hpp"

using namespace gpmap;

namespace {

const IsaSpec kIsa;

Genome G(std::string_view letters) { return Genome::from_letters(letters, kIsa.alphabet()); }

VmState at(std::size_t ip) {
  VmState s;
  s.ip = ip;
  return s;
}

} // namespace

TEST(Step, CopyWithoutBufferIsNoOp) {
  const Genome g = G("dabcde");
  const VmState before = at(0);
  const VmState after = step(before, g, kIsa);
  VmState expected = before;
  expected.ip = 1;
  expected.steps = 1;
  EXPECT_EQ(after, expected);
}

TEST(Step, Halt) {
  const VmState after = step(at(0), G("haaaaa"), kIsa);
  EXPECT_TRUE(after.halted);
  EXPECT_EQ(after.steps, 1U);
  EXPECT_THROW((void)step(after, G("haaaaa"), kIsa), DomainError);
}

TEST(Step, IfDoneSkipsUnlessCopiedAll) {
  const Genome g = G("afeaaa");
  VmState s = at(1);
  s.has_child = true;
  s.child.assign(6, 0);
  s.copied = 3;
  EXPECT_EQ(step(s, g, kIsa).ip, 3U);
  s.copied = 6;
  EXPECT_EQ(step(s, g, kIsa).ip, 2U);
  // Skip wraps circularly.
  const Genome tail = G("aaaaaf");
  EXPECT_EQ(step(at(5), tail, kIsa).ip, 1U);
}

TEST(Step, AllocKeepsExistingProgress) {
  const Genome g = G("caaaaa");
  VmState s = at(0);
  s = step(s, g, kIsa);
  ASSERT_TRUE(s.has_child);
  s.copied = 4;
  s.ip = 0;
  s = step(s, g, kIsa);
  EXPECT_EQ(s.copied, 4U);
}

TEST(Step, DivideNeedsFullCopy) {
  const Genome g = G("eaaaaa");
  VmState s = at(0);
  s.has_child = true;
  s.child.assign(6, 1);
  s.copied = 5;
  EXPECT_TRUE(step(s, g, kIsa).emitted.empty());
  s.copied = 6;
  const VmState after = step(s, g, kIsa);
  ASSERT_EQ(after.emitted.size(), 1U);
  EXPECT_EQ(after.emitted[0].letters(), "bbbbbb");
  EXPECT_FALSE(after.has_child);
  EXPECT_EQ(after.copied, 0U);
}

TEST(Step, JmpFindsNextNopACircularly) {
  // jmp-a at 3; nearest nop-a ahead is position 1 (after wrapping).
  EXPECT_EQ(step(at(3), G("bacgbb"), kIsa).ip, 2U);
  EXPECT_EQ(step(at(0), G("gbbabb"), kIsa).ip, 4U);
  // No nop-a: behaves as nop.
  EXPECT_EQ(step(at(2), G("bbgbbb"), kIsa).ip, 3U);
  // Padding symbols decode to nop-a and are valid targets.
  const IsaSpec padded = IsaSpec::from_id("default-v1", 1);
  const Genome pg = Genome::from_letters("gbbibb", padded.alphabet());
  EXPECT_EQ(step(at(0), pg, padded).ip, 4U);
}

TEST(Step, NoOpTotalityProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t len = 1 + rng() % 9;
    std::vector<Symbol> syms(len);
    for (auto& s : syms) s = static_cast<Symbol>(rng() % 8);
    const Genome g(syms, 8);
    VmState s;
    s.ip = rng() % len;
    s.read_head = rng() % len;
    s.write_head = rng() % len;
    s.has_child = rng() % 2;
    if (s.has_child) {
      s.child.assign(len, 0);
      s.copied = rng() % (len + 1);
    }
    s.steps = rng() % 100;
    const VmState after = step(s, g, kIsa);
    ASSERT_EQ(after.steps, s.steps + 1);
    ASSERT_LT(after.ip, len);
    ASSERT_LT(after.read_head, len);
    ASSERT_LT(after.write_head, len);
    ASSERT_LE(after.copied, len);
    ASSERT_EQ(after.has_child, after.child.size() == len);
  }
}

TEST(Execute, CanonicalCopyLoop) {
  const Genome g = G("cdfeaa");
  const ExecutionOutcome out = execute(g, kIsa, Limits::defaults_for(6));
  ASSERT_EQ(out.offspring.size(), 4U);
  for (const auto& child : out.offspring) EXPECT_EQ(child, g);
  // Hand trace: first division at step 29, then one every 31 steps.
  EXPECT_EQ(out.steps_used, 29U + 3 * 31);
  EXPECT_EQ(out.reason, StopReason::OffspringCap);
  EXPECT_LE(out.steps_used, Limits::default_step_limit(6));

  const ExecutionOutcome first = execute(g, kIsa, {29, 4});
  EXPECT_EQ(first.offspring.size(), 1U);
  EXPECT_EQ(first.reason, StopReason::StepLimit);
  EXPECT_TRUE(execute(g, kIsa, {28, 4}).offspring.empty());
}

TEST(Execute, HaltAndStepLimit) {
  const auto halted = execute(G("hhhhhh"), kIsa, Limits::defaults_for(6));
  EXPECT_TRUE(halted.offspring.empty());
  EXPECT_EQ(halted.reason, StopReason::Halted);
  EXPECT_EQ(halted.steps_used, 1U);

  const auto idle = execute(G("aaaaaa"), kIsa, Limits::defaults_for(6));
  EXPECT_TRUE(idle.offspring.empty());
  EXPECT_EQ(idle.reason, StopReason::StepLimit);
  EXPECT_EQ(idle.steps_used, 4U * 36 + 64);
}

TEST(Execute, StepAccountingAndDeterminismProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t len = 1 + rng() % 8;
    const Genome g = Genome::from_rank(rng() % space_size(len, 8), len, 8);
    const Limits limits{1 + rng() % 300, 1 + rng() % 5};
    const auto a = execute(g, kIsa, limits);
    const auto b = execute(g, kIsa, limits);
    ASSERT_EQ(a.offspring, b.offspring);
    ASSERT_EQ(a.steps_used, b.steps_used);
    ASSERT_EQ(a.reason, b.reason);
    ASSERT_LE(a.steps_used, limits.step_limit);
    if (a.reason == StopReason::StepLimit) {
      ASSERT_EQ(a.steps_used, limits.step_limit);
    }
    if (a.steps_used < limits.step_limit) {
      ASSERT_NE(a.reason, StopReason::StepLimit);
    }
    ASSERT_LE(a.offspring.size(), limits.offspring_cap);
    for (const auto& child : a.offspring) {
      ASSERT_EQ(child.length(), len);
      ASSERT_EQ(child.alphabet(), 8U);
    }
  }
}

TEST(Execute, OffspringArePrefixStableUnderLargerStepLimit) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Genome g = Genome::from_rank(rng() % space_size(5, 8), 5, 8);
    const auto small = execute(g, kIsa, {50, 4});
    const auto large = execute(g, kIsa, {200, 4});
    ASSERT_LE(small.offspring.size(), large.offspring.size());
    ASSERT_TRUE(std::equal(small.offspring.begin(), small.offspring.end(), large.offspring.begin()));
  }
}

TEST(Classify, Examples) {
  const Limits lim = Limits::defaults_for(6);
  const Phenotype self = classify(G("cdfeaa"), kIsa, lim, {});
  EXPECT_EQ(self.kind, PhenotypeKind::SelfReplicator);
  ASSERT_EQ(self.chain.size(), 1U);
  EXPECT_EQ(self.chain[0], G("cdfeaa"));
  EXPECT_TRUE(self.viable());

  const Phenotype none = classify(G("aaaaaa"), kIsa, lim, {});
  EXPECT_EQ(none.kind, PhenotypeKind::NonViable);
  EXPECT_TRUE(none.chain.empty());
  EXPECT_EQ(classify(G("hhhhhh"), kIsa, lim, {}).kind, PhenotypeKind::NonViable);
  EXPECT_THROW((void)classify(G("cdfeaa"), kIsa, lim, {0, 4}), UsageError);
}

namespace {

/// Reproduction model from an explicit offspring table over letter strings.
struct TableModel {
  std::map<std::string, std::vector<std::string>> table;
  std::vector<Genome> operator()(const Genome& g) const {
    std::vector<Genome> out;
    if (auto it = table.find(g.letters()); it != table.end()) {
      for (const auto& s : it->second) out.push_back(Genome::from_letters(s, 8));
    }
    return out;
  }
};

} // namespace

TEST(Classify, TwoCycleIsColonyForming) {
  TableModel m{{{"abc", {"abd"}}, {"abd", {"abc"}}}};
  const Phenotype ph = classify_with(Genome::from_letters("abc", 8), m, {});
  EXPECT_EQ(ph.kind, PhenotypeKind::ColonyForming);
  ASSERT_EQ(ph.chain.size(), 2U);
  EXPECT_EQ(ph.chain[0].letters(), "abc");
  EXPECT_EQ(ph.chain[1].letters(), "abd");
}

TEST(Classify, CycleDownstreamAndDeadEnds) {
  TableModel m{{{"aaa", {"bbb"}}, {"bbb", {"bbb"}}, {"ccc", {"ddd"}}}};
  const Phenotype down = classify_with(Genome::from_letters("aaa", 8), m, {});
  EXPECT_EQ(down.kind, PhenotypeKind::ColonyForming);
  ASSERT_EQ(down.chain.size(), 2U);
  EXPECT_EQ(down.chain[1].letters(), "bbb");
  // bbb's first offspring is itself.
  EXPECT_EQ(classify_with(Genome::from_letters("bbb", 8), m, {}).kind, PhenotypeKind::SelfReplicator);
  const Phenotype dead = classify_with(Genome::from_letters("ccc", 8), m, {});
  EXPECT_EQ(dead.kind, PhenotypeKind::NonViable);
  EXPECT_FALSE(dead.budget_exhausted);
  // Self among later offspring: a cycle of length one, but not an exact first copy.
  TableModel late{{{"eee", {"fff", "eee"}}}};
  EXPECT_EQ(classify_with(Genome::from_letters("eee", 8), late, {}).kind, PhenotypeKind::ColonyForming);
}

TEST(Classify, BudgetsBoundExploration) {
  // A chain of 20 distinct genotypes ending in a self-loop.
  TableModel m;
  std::vector<std::string> names;
  for (int i = 0; i < 20; ++i) names.push_back(Genome::from_rank(100 + i, 4, 8).letters());
  for (int i = 0; i + 1 < 20; ++i) m.table[names[i]] = {names[i + 1]};
  m.table[names[19]] = {names[19]};
  const Genome start = Genome::from_letters(names[0], 8);

  const Phenotype shallow = classify_with(start, m, {16, 64});
  EXPECT_EQ(shallow.kind, PhenotypeKind::NonViable);
  EXPECT_TRUE(shallow.budget_exhausted);
  const Phenotype deep = classify_with(start, m, {20, 64});
  EXPECT_EQ(deep.kind, PhenotypeKind::ColonyForming);
  EXPECT_EQ(deep.chain.size(), 20U);
  EXPECT_EQ(classify_with(start, m, {32, 19}).kind, PhenotypeKind::NonViable);
  EXPECT_EQ(classify_with(start, m, {32, 20}).kind, PhenotypeKind::ColonyForming);
}

TEST(Classify, MonotoneInBudgetsProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    // Random reproduction graph over 24 genotypes of length 3.
    TableModel m;
    for (int v = 0; v < 24; ++v) {
      std::vector<std::string> kids;
      const int fanout = static_cast<int>(rng() % 3);
      for (int k = 0; k < fanout; ++k) kids.push_back(Genome::from_rank(rng() % 24, 3, 8).letters());
      m.table[Genome::from_rank(v, 3, 8).letters()] = kids;
    }
    const Genome start = Genome::from_rank(rng() % 24, 3, 8);
    for (std::size_t g = 1; g <= 6; ++g) {
      for (std::size_t b = 1; b <= 8; ++b) {
        if (!classify_with(start, m, {g, b}).viable()) continue;
        ASSERT_TRUE(classify_with(start, m, {g + 1, b}).viable());
        ASSERT_TRUE(classify_with(start, m, {g, b + 1}).viable());
      }
    }
  }
}

TEST(Classify, SelfReplicatorSoundnessByReexecution) {
  const Limits lim = Limits::defaults_for(4);
  std::size_t n = 0;
  for (Rank r = 0; r < space_size(4, 8); ++r) {
    const Genome g = Genome::from_rank(r, 4, 8);
    const Phenotype ph = classify(g, kIsa, lim, {});
    ASSERT_EQ(ph, classify(g, kIsa, lim, {})) << g.letters();
    if (ph.kind != PhenotypeKind::SelfReplicator) continue;
    ++n;
    const auto again = execute(g, kIsa, lim);
    ASSERT_FALSE(again.offspring.empty());
    ASSERT_EQ(again.offspring.front(), g);
  }
  EXPECT_GT(n, 0U);
}
