#pragma once

// Brute-force reference implementations. Each one takes the slow, direct
// route (per-rank unranking, pairwise comparisons, explicit BFS) and shares no
// code path with the engine it checks beyond the VM itself. Used by the test
// suites and by `gpmap verify`.

#include <algorithm>
#include <deque>
#include <map>
#include <vector>

#include "gpmap/genome.hpp"
#include "gpmap/vm.hpp"

namespace gpmap::oracle {

/// Single loop over every rank, unranking each from scratch.
inline std::vector<Rank> naive_viable_set(std::size_t length, const IsaSpec& isa,
                                          const Limits& limits, const Budgets& budgets) {
  std::vector<Rank> out;
  const Rank total = space_size(length, isa.alphabet());
  for (Rank r = 0; r < total; ++r) {
    if (classify(Genome::from_rank(r, length, isa.alphabet()), isa, limits, budgets).viable()) {
      out.push_back(r);
    }
  }
  return out;
}

inline std::vector<Genome> unrank_all(const std::vector<Rank>& ranks, std::size_t length,
                                      unsigned alphabet) {
  std::vector<Genome> out;
  out.reserve(ranks.size());
  for (Rank r : ranks) out.push_back(Genome::from_rank(r, length, alphabet));
  return out;
}

/// Connected components by BFS over a pairwise-distance adjacency matrix.
/// Each component is an ascending rank list; components ordered by smallest
/// member.
inline std::vector<std::vector<Rank>> bfs_components(const std::vector<Rank>& viable,
                                                     std::size_t length, unsigned alphabet) {
  const auto gs = unrank_all(viable, length, alphabet);
  const std::size_t n = gs.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && hamming_distance(gs[i], gs[j]) == 1) adj[i].push_back(j);
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::vector<Rank>> comps;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<Rank> comp;
    std::deque<std::size_t> queue{s};
    seen[s] = true;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      comp.push_back(viable[v]);
      for (std::size_t w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          queue.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline bool is_rotation_of(const Genome& a, const Genome& b) {
  const std::size_t len = a.length();
  for (std::size_t k = 0; k < len; ++k) {
    bool same = true;
    for (std::size_t p = 0; p < len && same; ++p) same = a[(p + k) % len] == b[p];
    if (same) return true;
  }
  return false;
}

/// Counts rotation classes by pairwise comparison: a genome opens a new class
/// when no earlier genome is one of its rotations.
inline std::size_t pairwise_rotation_class_count(const std::vector<Rank>& viable, std::size_t length,
                                                 unsigned alphabet) {
  const auto gs = unrank_all(viable, length, alphabet);
  std::size_t classes = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    bool fresh = true;
    for (std::size_t j = 0; j < i && fresh; ++j) fresh = !is_rotation_of(gs[j], gs[i]);
    classes += fresh;
  }
  return classes;
}

/// N(k) for one genome by comparing against every viable genome.
inline std::vector<std::uint64_t> pairwise_distance_counts(const std::vector<Rank>& viable,
                                                           Rank origin, std::size_t length,
                                                           unsigned alphabet) {
  const Genome o = Genome::from_rank(origin, length, alphabet);
  std::vector<std::uint64_t> counts(length + 1, 0);
  for (Rank r : viable) ++counts[hamming_distance(o, Genome::from_rank(r, length, alphabet))];
  return counts;
}

inline std::size_t pairwise_edge_count(const std::vector<Rank>& viable, std::size_t length,
                                       unsigned alphabet) {
  const auto gs = unrank_all(viable, length, alphabet);
  std::size_t edges = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (std::size_t j = i + 1; j < gs.size(); ++j) edges += hamming_distance(gs[i], gs[j]) == 1;
  }
  return edges;
}

/// Sum over k of C(L,k) (D-1)^k by explicit enumeration of distance shells:
/// counts, for every genome in the space, its distance to the all-zero genome.
inline std::vector<std::uint64_t> enumerated_shells(std::size_t length, unsigned alphabet) {
  std::vector<std::uint64_t> shells(length + 1, 0);
  const Rank total = space_size(length, alphabet);
  for (Rank r = 0; r < total; ++r) {
    std::size_t d = 0;
    for (Rank x = r; x > 0; x /= alphabet) d += (x % alphabet) != 0;
    ++shells[d];
  }
  return shells;
}

} // namespace gpmap::oracle
