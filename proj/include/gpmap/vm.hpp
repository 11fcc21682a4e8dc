#pragma once

// Deterministic self-copying virtual machine and phenotype classification.
//
// ISA default-v1 (symbols 0..7, letters a..h):
//   a nop-a    no effect; target marker for jmp-a
//   b nop-b    no effect
//   c alloc    create an L-slot child buffer if none exists, copied = 0
//   d copy     child[write] = genome[read]; advance both heads; copied = min(copied+1, L)
//   e divide   if copied == L: emit child, drop buffer, copied = 0
//   f if-done  skip the next instruction unless copied == L
//   g jmp-a    jump past the nearest nop-a ahead (circular); nop if none
//   h halt     stop
// Instructions with nothing to act on are no-ops; every step costs exactly one.

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gpmap/genome.hpp"

namespace gpmap {

struct Limits {
  std::uint64_t step_limit = 64;
  std::size_t offspring_cap = 4;

  /// T = 4 L^2 + 64: one symbol is copied per circular pass, so a copy loop
  /// needs about L^2 steps.
  static std::uint64_t default_step_limit(std::size_t length) {
    return 4 * static_cast<std::uint64_t>(length) * length + 64;
  }
  static Limits defaults_for(std::size_t length) {
    return Limits{default_step_limit(length), 4};
  }

  bool operator==(const Limits&) const = default;
};

struct Budgets {
  std::size_t chain_depth = 16; // G: longest reproduction chain followed
  std::size_t chain_width = 64; // B: distinct genotypes explored

  bool operator==(const Budgets&) const = default;
};

struct VmState {
  std::size_t ip = 0;
  std::size_t read_head = 0;
  std::size_t write_head = 0;
  std::size_t copied = 0;
  bool has_child = false;
  std::vector<Symbol> child;
  std::uint64_t steps = 0;
  std::vector<Genome> emitted;
  bool halted = false;

  bool operator==(const VmState&) const = default;
};

enum class StopReason { StepLimit, Halted, OffspringCap };

constexpr std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::StepLimit: return "StepLimit";
    case StopReason::Halted: return "Halted";
    case StopReason::OffspringCap: return "OffspringCap";
  }
  return "?";
}

struct ExecutionOutcome {
  std::vector<Genome> offspring;
  std::uint64_t steps_used = 0;
  StopReason reason = StopReason::StepLimit;
};

namespace detail {

inline void apply(VmState& s, std::span<const Instruction> program, const Genome& genome) {
  const std::size_t len = program.size();
  const Instruction inst = program[s.ip];
  std::size_t next_ip = (s.ip + 1) % len;
  switch (inst) {
    case Instruction::NopA:
    case Instruction::NopB:
      break;
    case Instruction::Alloc:
      if (!s.has_child) {
        s.has_child = true;
        s.child.assign(len, 0);
        s.copied = 0;
      }
      break;
    case Instruction::Copy:
      if (s.has_child) {
        s.child[s.write_head] = genome[s.read_head];
        s.read_head = (s.read_head + 1) % len;
        s.write_head = (s.write_head + 1) % len;
        s.copied = std::min(s.copied + 1, len);
      }
      break;
    case Instruction::Divide:
      if (s.has_child && s.copied == len) {
        s.emitted.emplace_back(std::move(s.child), genome.alphabet());
        s.child.clear();
        s.has_child = false;
        s.copied = 0;
      }
      break;
    case Instruction::IfDone:
      if (s.copied != len) next_ip = (s.ip + 2) % len;
      break;
    case Instruction::JmpA:
      for (std::size_t off = 1; off <= len; ++off) {
        const std::size_t p = (s.ip + off) % len;
        if (program[p] == Instruction::NopA) {
          next_ip = (p + 1) % len;
          break;
        }
      }
      break;
    case Instruction::Halt:
      s.halted = true;
      break;
  }
  s.ip = next_ip;
  ++s.steps;
}

inline std::vector<Instruction> decode_program(const Genome& genome, const IsaSpec& isa) {
  std::vector<Instruction> program(genome.length());
  for (std::size_t p = 0; p < genome.length(); ++p) program[p] = decode(genome[p], isa);
  return program;
}

} // namespace detail

/// Executes the instruction at state.ip. Precondition: not halted.
inline VmState step(VmState state, const Genome& genome, const IsaSpec& isa) {
  if (state.halted) throw DomainError("step on a halted VM");
  const auto program = detail::decode_program(genome, isa);
  detail::apply(state, program, genome);
  return state;
}

/// Runs from the reset state until halt, the step limit, or offspring_cap
/// offspring. `observer(const VmState& after, std::size_t ip_before,
/// Instruction)` sees every step.
template <class Observer>
ExecutionOutcome execute_observed(const Genome& genome, const IsaSpec& isa, const Limits& limits,
                                  Observer&& observer) {
  if (limits.step_limit < 1) throw UsageError("step limit must be at least 1");
  const auto program = detail::decode_program(genome, isa);
  VmState s;
  ExecutionOutcome out;
  out.reason = StopReason::StepLimit;
  while (s.steps < limits.step_limit) {
    const std::size_t ip_before = s.ip;
    detail::apply(s, program, genome);
    observer(static_cast<const VmState&>(s), ip_before, program[ip_before]);
    if (s.halted) {
      out.reason = StopReason::Halted;
      break;
    }
    if (s.emitted.size() >= limits.offspring_cap) {
      out.reason = StopReason::OffspringCap;
      break;
    }
  }
  out.steps_used = s.steps;
  out.offspring = std::move(s.emitted);
  return out;
}

inline ExecutionOutcome execute(const Genome& genome, const IsaSpec& isa, const Limits& limits) {
  return execute_observed(genome, isa, limits, [](const VmState&, std::size_t, Instruction) {});
}

enum class PhenotypeKind { NonViable, SelfReplicator, ColonyForming };

constexpr std::string_view phenotype_name(PhenotypeKind k) {
  switch (k) {
    case PhenotypeKind::NonViable: return "NonViable";
    case PhenotypeKind::SelfReplicator: return "SelfReplicator";
    case PhenotypeKind::ColonyForming: return "ColonyForming";
  }
  return "?";
}

struct Phenotype {
  PhenotypeKind kind = PhenotypeKind::NonViable;
  /// Reproduction path ending at the genotype whose offspring closes a cycle.
  std::vector<Genome> chain;
  /// Exploration was cut short by G or B before a cycle was found.
  bool budget_exhausted = false;

  [[nodiscard]] bool viable() const { return kind != PhenotypeKind::NonViable; }

  bool operator==(const Phenotype&) const = default;
};

/// Classification over an arbitrary reproduction model.
///
/// `reproduce(const Genome&) -> std::vector<Genome>` lists the offspring of a
/// genotype. The reproduction graph is explored breadth-first from `genome`:
/// genotypes at depth < G are expanded, at most B distinct genotypes are
/// admitted, in discovery order. A directed cycle among the admitted genotypes
/// reachable from `genome` means parents that survive division keep seeding an
/// ever-growing colony. Because the admitted set is a prefix of one fixed
/// discovery order, raising G or B can only add genotypes, never remove them.
template <class Reproduce>
Phenotype classify_with(const Genome& genome, Reproduce&& reproduce, const Budgets& budgets) {
  if (budgets.chain_depth == 0 || budgets.chain_width == 0) {
    throw UsageError("classification budgets must be positive");
  }
  Phenotype result;
  std::vector<Genome> nodes{genome};
  std::vector<std::size_t> depth{0};
  std::vector<std::vector<std::size_t>> edges;
  std::unordered_map<Rank, std::size_t> index{{genome.rank(), 0}};

  for (std::size_t head = 0; head < nodes.size(); ++head) {
    edges.emplace_back();
    const std::vector<Genome> kids = reproduce(nodes[head]);
    if (head == 0) {
      if (kids.empty()) return result;
      if (kids.front() == genome) {
        result.kind = PhenotypeKind::SelfReplicator;
        result.chain = {genome};
        return result;
      }
    }
    for (const Genome& kid : kids) {
      auto [it, inserted] = index.try_emplace(kid.rank(), nodes.size());
      if (inserted) {
        if (nodes.size() >= budgets.chain_width || depth[head] + 1 >= budgets.chain_depth) {
          index.erase(it);
          result.budget_exhausted = true;
          continue;
        }
        nodes.push_back(kid);
        depth.push_back(depth[head] + 1);
      }
      auto& out = edges[head];
      if (std::find(out.begin(), out.end(), it->second) == out.end()) out.push_back(it->second);
    }
  }

  // Depth-first search for a back edge on the admitted subgraph.
  enum : std::uint8_t { White, OnPath, Done };
  std::vector<std::uint8_t> colour(nodes.size(), White);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  colour[0] = OnPath;
  while (!stack.empty()) {
    auto& [node, next_edge] = stack.back();
    if (next_edge == edges[node].size()) {
      colour[node] = Done;
      stack.pop_back();
      continue;
    }
    const std::size_t target = edges[node][next_edge++];
    if (colour[target] == OnPath) {
      result.kind = PhenotypeKind::ColonyForming;
      for (const auto& frame : stack) result.chain.push_back(nodes[frame.first]);
      result.budget_exhausted = false;
      return result;
    }
    if (colour[target] == White) {
      colour[target] = OnPath;
      stack.emplace_back(target, 0);
    }
  }
  return result;
}

inline Phenotype classify(const Genome& genome, const IsaSpec& isa, const Limits& limits,
                          const Budgets& budgets) {
  return classify_with(
      genome, [&](const Genome& g) { return execute(g, isa, limits).offspring; }, budgets);
}

} // namespace gpmap
