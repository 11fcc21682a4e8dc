#pragma once

// Landscape observables computed from a census: functional information,
// rotation classes, neutral clusters, robustness, information-density curves
// and their reference baselines. Information is measured in mers (log base D).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpmap/bitmap.hpp"
#include "gpmap/census.hpp"
#include "gpmap/genome.hpp"

namespace gpmap {

// ---------------------------------------------------------------------------
// Counting helpers

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) acc = acc * (n - k + i) / i;
  if (acc > std::numeric_limits<std::uint64_t>::max()) throw DomainError("binomial overflow");
  return static_cast<std::uint64_t>(acc);
}

/// Number of sequences at exact Hamming distance k: C(L,k) (D-1)^k, k = 0..L.
inline std::vector<std::uint64_t> shell_sizes(std::size_t length, unsigned alphabet) {
  std::vector<std::uint64_t> out(length + 1);
  unsigned __int128 power = 1;
  for (std::size_t k = 0; k <= length; ++k) {
    const unsigned __int128 v = power * binomial(length, k);
    if (v > std::numeric_limits<std::uint64_t>::max()) throw DomainError("shell size overflow");
    out[k] = static_cast<std::uint64_t>(v);
    power *= (alphabet - 1);
  }
  return out;
}

inline std::vector<std::uint64_t> cumulative(std::span<const std::uint64_t> xs) {
  std::vector<std::uint64_t> out(xs.size());
  std::partial_sum(xs.begin(), xs.end(), out.begin());
  return out;
}

inline double log_base(double x, unsigned base) { return std::log(x) / std::log(double(base)); }

// ---------------------------------------------------------------------------
// Functional information

struct InfoContent {
  std::size_t length = 0;
  unsigned alphabet = 0;
  std::uint64_t n_theta = 0;
  /// Empty when no sequence is functional: the information is unbounded.
  std::optional<double> mers;

  [[nodiscard]] bool defined() const { return mers.has_value(); }
};

/// I = L - log_D N_theta.
inline InfoContent functional_information(std::uint64_t n_theta, std::size_t length,
                                          unsigned alphabet) {
  if (length == 0 || alphabet < 2) throw DomainError("functional information needs L >= 1, D >= 2");
  if (auto total = checked_space_size(length, alphabet); total && n_theta > *total) {
    throw DomainError("N_theta = " + std::to_string(n_theta) + " exceeds D^L = " +
                      std::to_string(*total));
  }
  InfoContent info{length, alphabet, n_theta, std::nullopt};
  if (n_theta == 0) return info;
  const long double value = static_cast<long double>(length) -
                            std::log(static_cast<long double>(n_theta)) /
                                std::log(static_cast<long double>(alphabet));
  info.mers = static_cast<double>(value);
  return info;
}

// ---------------------------------------------------------------------------
// Landscape: the viable set with fast membership

class Landscape {
public:
  Landscape(std::size_t length, unsigned alphabet, std::vector<Rank> viable,
            std::optional<Bitmap> bitmap = std::nullopt)
      : length_(length), alphabet_(alphabet), total_(space_size(length, alphabet)),
        viable_(std::move(viable)), bitmap_(std::move(bitmap)) {
    if (!std::is_sorted(viable_.begin(), viable_.end()) ||
        std::adjacent_find(viable_.begin(), viable_.end()) != viable_.end()) {
      throw IntegrityError("viable ranks must be strictly ascending");
    }
    if (!viable_.empty() && viable_.back() >= total_) {
      throw IntegrityError("viable rank outside the sequence space");
    }
    if (bitmap_ && bitmap_->size() != total_) throw IntegrityError("bitmap size differs from D^L");
    symbols_.reserve(viable_.size() * length_);
    for (Rank r : viable_) {
      const Genome g = Genome::from_rank(r, length_, alphabet_);
      symbols_.insert(symbols_.end(), g.symbols().begin(), g.symbols().end());
    }
  }

  explicit Landscape(const CensusResult& census)
      : Landscape(census.length, census.alphabet(), census.viable_ranks, census.bitmap) {}

  [[nodiscard]] std::size_t length() const { return length_; }
  [[nodiscard]] unsigned alphabet() const { return alphabet_; }
  [[nodiscard]] Rank total() const { return total_; }
  [[nodiscard]] std::span<const Rank> viable() const { return viable_; }
  [[nodiscard]] std::size_t viable_count() const { return viable_.size(); }
  [[nodiscard]] const Bitmap* bitmap() const { return bitmap_ ? &*bitmap_ : nullptr; }

  [[nodiscard]] std::optional<std::size_t> index_of(Rank r) const {
    auto it = std::lower_bound(viable_.begin(), viable_.end(), r);
    if (it == viable_.end() || *it != r) return std::nullopt;
    return static_cast<std::size_t>(it - viable_.begin());
  }

  [[nodiscard]] bool contains(Rank r) const {
    if (bitmap_) return bitmap_->test(r);
    return index_of(r).has_value();
  }

  [[nodiscard]] std::span<const Symbol> symbols_of(std::size_t index) const {
    return {symbols_.data() + index * length_, length_};
  }

  [[nodiscard]] Genome genome_of(std::size_t index) const {
    auto s = symbols_of(index);
    return Genome({s.begin(), s.end()}, alphabet_);
  }

  /// Index of a viable rank; DomainError names the rank otherwise.
  [[nodiscard]] std::size_t require_viable(Rank r) const {
    auto idx = index_of(r);
    if (!idx) throw DomainError("rank " + std::to_string(r) + " is not a viable genome");
    return *idx;
  }

private:
  std::size_t length_;
  unsigned alphabet_;
  Rank total_;
  std::vector<Rank> viable_;
  std::optional<Bitmap> bitmap_;
  std::vector<Symbol> symbols_;
};

// ---------------------------------------------------------------------------
// Robustness and the one-mutant graph

/// Number of viable one-mutant neighbors of a viable genome.
inline std::size_t robustness(const Landscape& land, Rank rank) {
  (void)land.require_viable(rank);
  std::size_t n = 0;
  for (Rank nb : neighbor_ranks(rank, land.length(), land.alphabet())) n += land.contains(nb);
  return n;
}

/// Robustness of every viable genome, aligned with land.viable().
inline std::vector<std::size_t> robustness_all(const Landscape& land) {
  std::vector<std::size_t> out(land.viable_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = robustness(land, land.viable()[i]);
  return out;
}

/// Viable-viable Hamming-1 edges as (index, index) pairs with first < second,
/// sorted.
inline std::vector<std::pair<std::size_t, std::size_t>> viable_edges(const Landscape& land) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < land.viable_count(); ++i) {
    const Rank r = land.viable()[i];
    for (Rank nb : neighbor_ranks(r, land.length(), land.alphabet())) {
      if (nb > r && land.contains(nb)) edges.emplace_back(i, *land.index_of(nb));
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// ---------------------------------------------------------------------------
// Rotation classes

struct RotationClasses {
  /// Class id per viable index; ids are ordered by representative.
  std::vector<std::size_t> class_of;
  /// Lexicographically smallest viable member of each class.
  std::vector<Rank> representatives;
  std::vector<std::vector<Rank>> members;

  [[nodiscard]] std::size_t count() const { return representatives.size(); }
};

/// Groups viable genomes that are cyclic rotations of one another. Rotations
/// that are not viable never join or represent a class.
inline RotationClasses rotation_classes(const Landscape& land) {
  RotationClasses rc;
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  rc.class_of.assign(land.viable_count(), unset);
  // Ascending rank equals lexicographic order, so the first member met is the
  // representative.
  for (std::size_t i = 0; i < land.viable_count(); ++i) {
    if (rc.class_of[i] != unset) continue;
    const std::size_t id = rc.representatives.size();
    rc.representatives.push_back(land.viable()[i]);
    rc.members.emplace_back();
    const Genome g = land.genome_of(i);
    std::vector<Rank> found;
    for (std::size_t k = 0; k < land.length(); ++k) {
      const Rank rr = g.rotated(k).rank();
      if (auto j = land.index_of(rr); j && rc.class_of[*j] == unset) {
        rc.class_of[*j] = id;
        found.push_back(rr);
      }
    }
    std::sort(found.begin(), found.end());
    rc.members.back() = std::move(found);
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Neutral clusters

enum class ClusterMode { Raw, CollapsedRotations };

inline std::string_view cluster_mode_name(ClusterMode m) {
  return m == ClusterMode::Raw ? "raw" : "collapsed";
}

inline ClusterMode parse_cluster_mode(std::string_view s) {
  if (s == "raw" || s == "raw-sequences") return ClusterMode::Raw;
  if (s == "collapsed" || s == "collapsed-rotations") return ClusterMode::CollapsedRotations;
  throw UsageError("unknown cluster mode '" + std::string(s) + "' (raw | collapsed)");
}

struct ClusterComponent {
  Rank id = 0;          // smallest member rank
  std::size_t size = 0; // vertices: genomes (raw) or rotation classes (collapsed)
  Rank representative = 0; // most robust member, ties to the smallest rank
  std::size_t edge_count = 0;
  std::vector<Rank> members; // raw member ranks, ascending
};

struct ClusterSet {
  ClusterMode mode = ClusterMode::Raw;
  /// Sorted by size descending, then id ascending.
  std::vector<ClusterComponent> components;

  [[nodiscard]] const ClusterComponent& component(Rank id) const {
    for (const auto& c : components) {
      if (c.id == id) return c;
    }
    throw DomainError("no cluster with id " + std::to_string(id));
  }
};

/// Connected components of the one-mutant graph on viable genomes. In
/// collapsed mode each rotation class is first merged into a single vertex and
/// classes are adjacent when any of their members are.
inline ClusterSet find_clusters(const Landscape& land, ClusterMode mode) {
  const std::size_t n = land.viable_count();
  const auto edges = viable_edges(land);
  const auto robust = robustness_all(land);
  UnionFind uf(n);
  std::optional<RotationClasses> rc;
  if (mode == ClusterMode::CollapsedRotations) {
    rc = rotation_classes(land);
    std::vector<std::size_t> first(rc->count(), n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& f = first[rc->class_of[i]];
      if (f == n) f = i;
      else uf.unite(f, i);
    }
  }
  for (auto [a, b] : edges) uf.unite(a, b);

  // Components indexed by root, in order of their smallest member.
  std::vector<std::size_t> slot(n, n);
  ClusterSet set;
  set.mode = mode;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (slot[root] == n) {
      slot[root] = set.components.size();
      set.components.push_back({land.viable()[i], 0, land.viable()[i], 0, {}});
    }
    auto& comp = set.components[slot[root]];
    comp.members.push_back(land.viable()[i]);
    const std::size_t best = *land.index_of(comp.representative);
    if (robust[i] > robust[best]) comp.representative = land.viable()[i];
  }
  if (mode == ClusterMode::Raw) {
    for (auto& c : set.components) c.size = c.members.size();
    for (auto [a, b] : edges) ++set.components[slot[uf.find(a)]].edge_count;
  } else {
    std::vector<std::vector<std::size_t>> classes(set.components.size());
    for (std::size_t i = 0; i < n; ++i) classes[slot[uf.find(i)]].push_back(rc->class_of[i]);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      auto& v = classes[c];
      std::sort(v.begin(), v.end());
      set.components[c].size = static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
    }
    std::vector<std::pair<std::size_t, std::size_t>> class_edges;
    for (auto [a, b] : edges) {
      auto ca = rc->class_of[a], cb = rc->class_of[b];
      if (ca == cb) continue;
      class_edges.emplace_back(std::min(ca, cb), std::max(ca, cb));
    }
    std::sort(class_edges.begin(), class_edges.end());
    class_edges.erase(std::unique(class_edges.begin(), class_edges.end()), class_edges.end());
    // Every member of a class shares its component, so any member locates it.
    std::vector<std::size_t> class_component(rc->count());
    for (std::size_t i = 0; i < n; ++i) class_component[rc->class_of[i]] = slot[uf.find(i)];
    for (auto [ca, cb] : class_edges) ++set.components[class_component[ca]].edge_count;
  }
  std::stable_sort(set.components.begin(), set.components.end(),
                   [](const ClusterComponent& a, const ClusterComponent& b) {
                     if (a.size != b.size) return a.size > b.size;
                     return a.id < b.id;
                   });
  return set;
}

// ---------------------------------------------------------------------------
// Information-density curves

enum class DistanceMethod { Auto, ViablePairs, BitmapScan };

/// N(k): viable genomes at exact Hamming distance k from the viable genome
/// `rank`, k = 0..L.
inline std::vector<std::uint64_t> viable_counts_by_distance(const Landscape& land, Rank rank,
                                                           DistanceMethod method = DistanceMethod::Auto) {
  const std::size_t self = land.require_viable(rank);
  if (method == DistanceMethod::Auto) {
    method = (land.bitmap() && land.total() <= kBitmapAutoLimit) ? DistanceMethod::BitmapScan
                                                                 : DistanceMethod::ViablePairs;
  }
  std::vector<std::uint64_t> counts(land.length() + 1, 0);
  const auto origin = land.symbols_of(self);
  if (method == DistanceMethod::ViablePairs) {
    for (std::size_t j = 0; j < land.viable_count(); ++j) {
      ++counts[hamming_distance(origin, land.symbols_of(j))];
    }
    return counts;
  }
  if (!land.bitmap()) throw UsageError("bitmap scan requested but the census has no bitmap");
  std::vector<Symbol> digits(land.length());
  land.bitmap()->for_each_set([&](Rank r) {
    for (std::size_t p = land.length(); p-- > 0;) {
      digits[p] = static_cast<Symbol>(r % land.alphabet());
      r /= land.alphabet();
    }
    ++counts[hamming_distance(origin, digits)];
  });
  return counts;
}

struct DensityCurve {
  Rank rank = 0;
  std::vector<std::uint64_t> counts;     // N(k)
  std::vector<std::uint64_t> cum_viable; // sum_{k<=n} N(k)
  std::vector<std::uint64_t> cum_total;  // sum_{k<=n} C(L,k)(D-1)^k
  std::vector<double> rho;
  std::vector<double> phi; // log_D rho, mers
};

/// Builds the curve from distance counts. phi is evaluated as
/// (ln cum_viable - ln cum_total) / ln D so that phi(n) >= phi_min(n) holds
/// exactly in floating point.
inline DensityCurve curve_from_counts(Rank rank, std::vector<std::uint64_t> counts,
                                      std::size_t length, unsigned alphabet) {
  DensityCurve c;
  c.rank = rank;
  c.counts = std::move(counts);
  c.cum_viable = cumulative(c.counts);
  c.cum_total = cumulative(shell_sizes(length, alphabet));
  const double ln_d = std::log(double(alphabet));
  for (std::size_t n = 0; n <= length; ++n) {
    const double num = static_cast<double>(c.cum_viable[n]);
    const double den = static_cast<double>(c.cum_total[n]);
    c.rho.push_back(num / den);
    c.phi.push_back((std::log(num) - std::log(den)) / ln_d);
  }
  return c;
}

inline DensityCurve density_curve(const Landscape& land, Rank rank,
                                  DistanceMethod method = DistanceMethod::Auto) {
  return curve_from_counts(rank, viable_counts_by_distance(land, rank, method), land.length(),
                           land.alphabet());
}

/// Distance counts for every viable genome at once (each pair visited once).
inline std::vector<std::vector<std::uint64_t>> all_distance_counts(const Landscape& land) {
  const std::size_t n = land.viable_count();
  std::vector<std::vector<std::uint64_t>> counts(n, std::vector<std::uint64_t>(land.length() + 1, 0));
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[i][0];
    const auto a = land.symbols_of(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t d = hamming_distance(a, land.symbols_of(j));
      ++counts[i][d];
      ++counts[j][d];
    }
  }
  return counts;
}

inline std::vector<DensityCurve> all_density_curves(const Landscape& land) {
  auto counts = all_distance_counts(land);
  std::vector<DensityCurve> out;
  out.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.push_back(curve_from_counts(land.viable()[i], std::move(counts[i]), land.length(), land.alphabet()));
  }
  return out;
}

/// Mean of phi over all viable genomes, per n (averaged in the log domain).
inline std::vector<double> mean_curve(std::span<const DensityCurve> curves) {
  if (curves.empty()) throw DomainError("mean curve needs at least one viable genome");
  std::vector<double> mean(curves.front().phi.size(), 0.0);
  for (const auto& c : curves) {
    for (std::size_t n = 0; n < mean.size(); ++n) mean[n] += c.phi[n];
  }
  for (auto& m : mean) m /= static_cast<double>(curves.size());
  return mean;
}

inline std::vector<double> mean_curve(const Landscape& land) {
  const auto curves = all_density_curves(land);
  return mean_curve(curves);
}

// ---------------------------------------------------------------------------
// Baselines and epistasis

/// Fully compressed encoding: only the genome itself is viable within any
/// radius, phi_min(n) = -log_D sum_{k<=n} C(L,k)(D-1)^k.
inline std::vector<double> compressed_baseline(std::size_t length, unsigned alphabet) {
  if (length == 0 || alphabet < 2) throw DomainError("baseline needs L >= 1, D >= 2");
  const auto cum = cumulative(shell_sizes(length, alphabet));
  const double ln_d = std::log(double(alphabet));
  std::vector<double> out;
  out.reserve(cum.size());
  for (auto den : cum) out.push_back((std::log(1.0) - std::log(static_cast<double>(den))) / ln_d);
  return out;
}

/// Independent sites: log-density falls linearly from 0 to -I_L.
inline std::vector<double> no_epistasis_baseline(std::size_t length, double info_mers) {
  if (length == 0) throw DomainError("baseline needs L >= 1");
  if (info_mers < 0 || info_mers > static_cast<double>(length)) {
    throw DomainError("information content must lie in [0, L]");
  }
  std::vector<double> out(length + 1);
  for (std::size_t n = 0; n <= length; ++n) {
    out[n] = -(static_cast<double>(n) / static_cast<double>(length)) * info_mers;
  }
  return out;
}

inline constexpr double kEpistasisDeadBand = 1e-9;

/// +1 where the curve lies above the independent-site line (antagonistic),
/// -1 below it (synergistic), 0 within the dead band.
inline std::vector<int> epistasis_sign(std::span<const double> phi, std::span<const double> phi_ne,
                                       double dead_band = kEpistasisDeadBand) {
  if (phi.size() != phi_ne.size()) throw DomainError("curve and baseline lengths differ");
  std::vector<int> out(phi.size());
  for (std::size_t n = 0; n < phi.size(); ++n) {
    const double diff = phi[n] - phi_ne[n];
    out[n] = diff > dead_band ? 1 : (diff < -dead_band ? -1 : 0);
  }
  return out;
}

inline std::string_view epistasis_label(int sign) {
  return sign > 0 ? "antagonistic" : (sign < 0 ? "synergistic" : "none");
}

// ---------------------------------------------------------------------------
// Cluster graph export

struct GraphNode {
  Rank rank;
  std::string letters;
  std::size_t robustness;
};

struct GraphDocument {
  Rank component_id = 0;
  std::vector<GraphNode> nodes;
  std::vector<std::pair<Rank, Rank>> edges;
};

inline GraphDocument export_cluster_graph(const Landscape& land, const ClusterSet& clusters, Rank id) {
  const ClusterComponent& comp = clusters.component(id);
  GraphDocument doc;
  doc.component_id = comp.id;
  for (Rank r : comp.members) {
    doc.nodes.push_back({r, Genome::from_rank(r, land.length(), land.alphabet()).letters(),
                         robustness(land, r)});
    for (Rank nb : neighbor_ranks(r, land.length(), land.alphabet())) {
      if (nb > r && land.contains(nb)) doc.edges.emplace_back(r, nb);
    }
  }
  std::sort(doc.edges.begin(), doc.edges.end());
  return doc;
}

} // namespace gpmap
