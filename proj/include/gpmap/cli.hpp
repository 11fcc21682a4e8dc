#pragma once

// Subcommand implementations behind tools/gpmap. Argument parsing lives in
// the tool; everything here takes resolved options and an output stream so it
// can be driven directly from tests.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpmap/analysis.hpp"
#include "gpmap/census.hpp"
#include "gpmap/emit.hpp"
#include "gpmap/oracles.hpp"
#include "gpmap/vm.hpp"

namespace gpmap::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Exit codes: 0 success, 2 usage, 3 domain, 4 integrity, 5 I/O,
/// 6 census interrupted before completion, 1 verification failure.
enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kUsage = 2,
  kDomain = 3,
  kIntegrity = 4,
  kIo = 5,
  kInterrupted = 6,
};

/// VM and census knobs shared by several subcommands. Unset values take the
/// length-dependent defaults.
struct MachineOptions {
  std::string isa = "default-v1";
  unsigned pad_nops = 0;
  std::optional<std::uint64_t> step_limit;
  std::size_t offspring_cap = 4;
  std::size_t chain_depth = 16;
  std::size_t chain_width = 64;

  [[nodiscard]] IsaSpec isa_spec() const { return IsaSpec::from_id(isa, pad_nops); }
  [[nodiscard]] Limits limits(std::size_t length) const {
    return {step_limit.value_or(Limits::default_step_limit(length)), offspring_cap};
  }
  [[nodiscard]] Budgets budgets() const { return {chain_depth, chain_width}; }
};

// ---------------------------------------------------------------------------
// Manifests

struct ManifestOutput {
  std::filesystem::path path;
  std::string sha256;
};

inline std::filesystem::path manifest_path(const std::filesystem::path& prefix) {
  return prefix.string() + ".manifest.json";
}

inline void write_manifest(const std::filesystem::path& path, std::string_view subcommand,
                           const nlohmann::ordered_json& config,
                           const std::vector<std::filesystem::path>& inputs,
                           const std::vector<ManifestOutput>& outputs, std::string_view isa_id,
                           double wall_seconds) {
  nlohmann::ordered_json m;
  m["subcommand"] = subcommand;
  m["tool_version"] = kToolVersion;
  m["isa_id"] = isa_id;
  m["config"] = config;
  auto in = nlohmann::ordered_json::array();
  for (const auto& p : inputs) in.push_back(p.string());
  m["inputs"] = in;
  auto out = nlohmann::ordered_json::array();
  for (const auto& o : outputs) out.push_back({{"path", o.path.string()}, {"sha256", o.sha256}});
  m["outputs"] = out;
  m["wall_seconds"] = wall_seconds;
  detail::write_text_atomic(path, m.dump(2) + "\n");
}

/// Destination for an analysis emitter: a file (with manifest) or a stream.
class Output {
public:
  Output(const std::optional<std::filesystem::path>& path, bool force, std::ostream& fallback)
      : path_(path), stream_(&fallback) {
    if (path_) {
      if (!force && std::filesystem::exists(*path_)) {
        throw IoError("output " + path_->string() + " already exists (use --force)");
      }
      file_.open(*path_, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot write " + path_->string());
      stream_ = &file_;
    }
  }

  std::ostream& stream() { return *stream_; }

  /// Closes the file and writes its manifest; no-op for stream output.
  void finish(std::string_view subcommand, const nlohmann::ordered_json& config,
              const std::vector<std::filesystem::path>& inputs, std::string_view isa_id,
              double seconds) {
    if (!path_) return;
    file_.close();
    if (!file_) throw IoError("short write to " + path_->string());
    write_manifest(manifest_path(*path_), subcommand, config, inputs,
                   {{*path_, sha256_file(*path_)}}, isa_id, seconds);
  }

private:
  std::optional<std::filesystem::path> path_;
  std::ofstream file_;
  std::ostream* stream_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// census

struct CensusOptions {
  std::size_t length = 5;
  MachineOptions machine;
  std::optional<std::size_t> shards;
  unsigned threads = 1;
  std::filesystem::path out = "census";
  bool force = false;
  std::optional<bool> bitmap;
  std::optional<std::size_t> stop_after_shards;
};

/// Configuration that reproduces a census, as stored in its manifest.
inline nlohmann::ordered_json census_config_json(const CensusConfig& c) {
  auto j = c.identity();
  j["pad_nops"] = c.isa.pad_nops;
  j["shard_count"] = c.shard_count;
  j["bitmap"] = c.bitmap_enabled();
  return j;
}

inline CensusConfig census_config_from_json(const nlohmann::json& j) {
  try {
    CensusConfig c;
    c.length = j.at("L").get<std::size_t>();
    c.isa = IsaSpec::from_id(j.at("isa_id").get<std::string>(), j.value("pad_nops", 0U));
    if (c.alphabet() != j.at("D").get<unsigned>()) throw IntegrityError("manifest D disagrees with ISA");
    c.limits = {j.at("T").get<std::uint64_t>(), j.at("M").get<std::size_t>()};
    c.budgets = {j.at("G").get<std::size_t>(), j.at("B").get<std::size_t>()};
    c.shard_count = j.at("shard_count").get<std::size_t>();
    if (j.contains("bitmap")) c.write_bitmap = j.at("bitmap").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("incomplete census configuration: ") + e.what());
  }
}

inline CensusConfig resolve_census_config(const CensusOptions& o) {
  CensusConfig c;
  c.length = o.length;
  c.isa = o.machine.isa_spec();
  c.limits = o.machine.limits(o.length);
  c.budgets = o.machine.budgets();
  c.write_bitmap = o.bitmap;
  if (o.shards) {
    c.shard_count = *o.shards;
  } else if (auto ck = read_checkpoint_config(o.out); ck && ck->contains("shard_count")) {
    // An unspecified shard count adopts the layout of a checkpoint being resumed.
    c.shard_count = ck->at("shard_count").get<std::size_t>();
  } else {
    c.shard_count = 64 * std::max(1U, o.threads);
  }
  c.validate();
  return c;
}

inline int run_census_command(const CensusConfig& config, const CensusOptions& o, std::ostream& out,
                              std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOptions ro;
  ro.threads = o.threads;
  ro.force = o.force;
  ro.stop_after_shards = o.stop_after_shards;
  CensusRun run = run_census(config, o.out, ro);
  if (!run.completed) {
    err << "census interrupted: " << run.shards_resumed + run.shards_computed << " of "
        << config.shard_count << " shards complete; rerun the same command to resume\n";
    return kInterrupted;
  }
  const CensusResult& res = *run.result;
  const CensusPaths paths(o.out);
  std::vector<ManifestOutput> outputs{{paths.meta, sha256_file(paths.meta)},
                                      {paths.viable, run.checksums.viable}};
  if (run.checksums.bitmap) outputs.push_back({paths.bitmap, *run.checksums.bitmap});
  write_manifest(manifest_path(o.out), "census", census_config_json(config), {}, outputs,
                 config.isa.id, seconds_since(t0));

  const auto info = functional_information(res.viable_count(), res.length, res.alphabet());
  out << "L=" << res.length << " D=" << res.alphabet() << " total=" << res.total
      << " viable=" << res.viable_count() << " self_replicators=" << res.self_replicator_count
      << " I=" << (info.mers ? format_real(*info.mers) : std::string("undefined")) << " mers"
      << " resumed_shards=" << run.shards_resumed << '\n';
  return kOk;
}

inline int cmd_census(const CensusOptions& o, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  return run_census_command(resolve_census_config(o), o, out, err);
}

/// Re-runs a census from the configuration recorded in a manifest.
inline int cmd_census_replay(const std::filesystem::path& manifest, CensusOptions o,
                             std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (m.value("subcommand", "") != "census") throw UsageError("manifest is not from a census run");
  return run_census_command(census_config_from_json(m.at("config")), o, out, err);
}

// ---------------------------------------------------------------------------
// info

struct InfoSummary {
  std::size_t length;
  unsigned alphabet;
  Rank total;
  std::uint64_t viable;
  std::uint64_t self_replicators;
  std::size_t rotation_classes;
  std::optional<double> info_mers;
  std::size_t clusters_raw;
  std::size_t clusters_collapsed;
};

inline InfoSummary summarize(const CensusResult& census) {
  const Landscape land(census);
  return {census.length,
          census.alphabet(),
          census.total,
          census.viable_count(),
          census.self_replicator_count,
          rotation_classes(land).count(),
          functional_information(census.viable_count(), census.length, census.alphabet()).mers,
          find_clusters(land, ClusterMode::Raw).components.size(),
          find_clusters(land, ClusterMode::CollapsedRotations).components.size()};
}

inline int cmd_info(const std::filesystem::path& census_prefix, std::string_view format,
                    std::ostream& out = std::cout) {
  const auto s = summarize(load_census(census_prefix));
  if (format == "json") {
    nlohmann::ordered_json j;
    j["L"] = s.length;
    j["D"] = s.alphabet;
    j["total"] = std::to_string(s.total);
    j["viable_count"] = s.viable;
    j["self_replicator_count"] = s.self_replicators;
    j["rotation_classes"] = s.rotation_classes;
    j["information_mers"] = s.info_mers ? nlohmann::ordered_json(*s.info_mers) : nlohmann::ordered_json();
    j["clusters"] = {{"raw", s.clusters_raw}, {"collapsed", s.clusters_collapsed}};
    out << j.dump(2) << '\n';
    return kOk;
  }
  if (format != "text") throw UsageError("info supports --format text|json");
  out << "L " << s.length << '\n'
      << "D " << s.alphabet << '\n'
      << "total " << s.total << '\n'
      << "viable " << s.viable << '\n'
      << "self_replicators " << s.self_replicators << '\n'
      << "rotation_classes " << s.rotation_classes << '\n'
      << "information_mers " << (s.info_mers ? format_real(*s.info_mers) : std::string("undefined"))
      << '\n'
      << "clusters_raw " << s.clusters_raw << '\n'
      << "clusters_collapsed " << s.clusters_collapsed << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// clusters

struct ClustersOptions {
  std::filesystem::path census;
  std::string mode = "raw";
  std::string format = "json";
  std::optional<Rank> component;
  bool largest = false;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

inline int cmd_clusters(const ClustersOptions& o, std::ostream& out = std::cout) {
  const auto t0 = std::chrono::steady_clock::now();
  const CensusResult census = load_census(o.census);
  const Landscape land(census);
  const ClusterSet set = find_clusters(land, parse_cluster_mode(o.mode));
  const bool graph = o.component || o.largest || o.format == "dot";
  if (o.format != "json" && o.format != "dot") throw UsageError("clusters supports --format json|dot");
  Output dest(o.out, o.force, out);
  if (!graph) {
    dest.stream() << clusters_json(set).dump(2) << '\n';
  } else {
    if (set.components.empty()) throw DomainError("census has no viable genomes, so no clusters");
    const Rank id = o.component.value_or(set.components.front().id);
    const GraphDocument doc = export_cluster_graph(land, set, id);
    if (o.format == "dot") write_graph_dot(dest.stream(), doc);
    else dest.stream() << graph_json(doc).dump(2) << '\n';
  }
  nlohmann::ordered_json cfg{{"mode", o.mode}, {"format", o.format}};
  if (graph) cfg["component"] = o.component.value_or(set.components.front().id);
  dest.finish("clusters", cfg, {o.census}, census.isa.id, seconds_since(t0));
  return kOk;
}

// ---------------------------------------------------------------------------
// robustness

struct RobustnessOptions {
  std::filesystem::path census;
  std::vector<Rank> ranks;
  std::vector<std::string> genomes;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

inline std::vector<Rank> resolve_ranks(const Landscape& land, const std::vector<Rank>& ranks,
                                       const std::vector<std::string>& genomes) {
  std::vector<Rank> out = ranks;
  for (const auto& s : genomes) {
    const Genome g = Genome::from_letters(s, land.alphabet());
    if (g.length() != land.length()) {
      throw UsageError("genome '" + s + "' has length " + std::to_string(g.length()) +
                       ", census length is " + std::to_string(land.length()));
    }
    out.push_back(g.rank());
  }
  return out;
}

inline int cmd_robustness(const RobustnessOptions& o, std::ostream& out = std::cout) {
  const auto t0 = std::chrono::steady_clock::now();
  const CensusResult census = load_census(o.census);
  const Landscape land(census);
  const auto wanted = resolve_ranks(land, o.ranks, o.genomes);
  std::vector<std::size_t> indices;
  for (Rank r : wanted) indices.push_back(land.require_viable(r));
  if (wanted.empty()) {
    indices.resize(land.viable_count());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }
  const auto robust = robustness_all(land);
  Output dest(o.out, o.force, out);
  write_robustness_csv(dest.stream(), land, indices, robust);
  dest.finish("robustness", {{"ranks", wanted}}, {o.census}, census.isa.id, seconds_since(t0));
  return kOk;
}

// ---------------------------------------------------------------------------
// curves

struct CurvesOptions {
  std::filesystem::path census;
  std::vector<Rank> ranks;
  std::vector<std::string> genomes;
  bool most_robust = false;
  bool most_fragile = false;
  bool all = false;
  bool mean = false;
  bool epistasis = false;
  double dead_band = kEpistasisDeadBand;
  std::string method = "auto";
  std::optional<std::filesystem::path> out;
  bool force = false;
};

inline DistanceMethod parse_method(std::string_view s) {
  if (s == "auto") return DistanceMethod::Auto;
  if (s == "pairs") return DistanceMethod::ViablePairs;
  if (s == "bitmap") return DistanceMethod::BitmapScan;
  throw UsageError("unknown distance method '" + std::string(s) + "' (auto | pairs | bitmap)");
}

/// Extremes of robustness; ties resolve to the smallest rank.
inline std::pair<Rank, Rank> robustness_extremes(const Landscape& land) {
  if (land.viable_count() == 0) throw DomainError("census has no viable genomes");
  const auto robust = robustness_all(land);
  std::size_t hi = 0, lo = 0;
  for (std::size_t i = 1; i < robust.size(); ++i) {
    if (robust[i] > robust[hi]) hi = i;
    if (robust[i] < robust[lo]) lo = i;
  }
  return {land.viable()[hi], land.viable()[lo]};
}

inline int cmd_curves(const CurvesOptions& o, std::ostream& out = std::cout) {
  const auto t0 = std::chrono::steady_clock::now();
  const CensusResult census = load_census(o.census);
  const Landscape land(census);
  const DistanceMethod method = parse_method(o.method);

  std::vector<DensityCurve> curves;
  std::vector<Rank> selected = resolve_ranks(land, o.ranks, o.genomes);
  if (o.most_robust || o.most_fragile) {
    const auto [robust, fragile] = robustness_extremes(land);
    if (o.most_robust) selected.push_back(robust);
    if (o.most_fragile) selected.push_back(fragile);
  }
  if (o.all || (o.mean && selected.empty())) {
    curves = all_density_curves(land);
    if (!o.all) {
      Output dest(o.out, o.force, out);
      write_mean_csv(dest.stream(), mean_curve(curves));
      dest.finish("curves", {{"mean", true}}, {o.census}, census.isa.id, seconds_since(t0));
      return kOk;
    }
  } else {
    if (selected.empty()) {
      throw UsageError("select genomes with --rank, --genome, --most-robust, --most-fragile, "
                       "--all or --mean");
    }
    for (Rank r : selected) curves.push_back(density_curve(land, r, method));
  }

  Output dest(o.out, o.force, out);
  if (o.epistasis) {
    const auto info = functional_information(land.viable_count(), land.length(), land.alphabet());
    const auto phi_ne = no_epistasis_baseline(land.length(), info.mers.value_or(0.0));
    write_epistasis_csv(dest.stream(), curves, phi_ne, o.dead_band);
  } else {
    write_curves_csv(dest.stream(), curves);
  }
  if (o.mean) {
    dest.stream() << '\n';
    write_mean_csv(dest.stream(), mean_curve(o.all ? curves : all_density_curves(land)));
  }
  nlohmann::ordered_json cfg{{"ranks", selected}, {"all", o.all},        {"mean", o.mean},
                             {"epistasis", o.epistasis}, {"method", o.method}};
  dest.finish("curves", cfg, {o.census}, census.isa.id, seconds_since(t0));
  return kOk;
}

// ---------------------------------------------------------------------------
// baselines

struct BaselinesOptions {
  std::optional<std::filesystem::path> census;
  std::optional<std::size_t> length;
  std::optional<unsigned> alphabet;
  std::optional<double> info;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

inline int cmd_baselines(const BaselinesOptions& o, std::ostream& out = std::cout) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t length = 0;
  unsigned alphabet = 0;
  double info = 0.0;
  std::string isa_id;
  std::vector<std::filesystem::path> inputs;
  if (o.census) {
    const CensusResult c = load_census(*o.census);
    length = c.length;
    alphabet = c.alphabet();
    isa_id = c.isa.id;
    inputs.push_back(*o.census);
    const auto fi = functional_information(c.viable_count(), length, alphabet);
    if (!fi.mers) throw DomainError("census has no viable genomes; I_L is undefined");
    info = o.info.value_or(*fi.mers);
  } else {
    if (!o.length || !o.alphabet || !o.info) {
      throw UsageError("baselines needs --census, or all of --length, --alphabet and --info");
    }
    length = *o.length;
    alphabet = *o.alphabet;
    info = *o.info;
  }
  const auto phi_min = compressed_baseline(length, alphabet);
  const auto phi_ne = no_epistasis_baseline(length, info);
  Output dest(o.out, o.force, out);
  write_baselines_csv(dest.stream(), phi_min, phi_ne);
  dest.finish("baselines", {{"L", length}, {"D", alphabet}, {"info_mers", info}}, inputs, isa_id,
              seconds_since(t0));
  return kOk;
}

// ---------------------------------------------------------------------------
// trace

/// Per-step columns: step index (1-based), ip before the step, instruction
/// letter, then copied, read and write heads and emitted count after it.
/// The last line is "<reason> step <n>; <phenotype>".
inline int cmd_trace(std::string_view letters, const MachineOptions& m, std::ostream& out = std::cout) {
  const IsaSpec isa = m.isa_spec();
  const Genome g = Genome::from_letters(letters, isa.alphabet());
  const Limits limits = m.limits(g.length());
  out << "# step ip op copied read write emitted\n";
  const ExecutionOutcome outcome =
      execute_observed(g, isa, limits, [&](const VmState& s, std::size_t ip, Instruction) {
        out << s.steps << ' ' << ip << ' ' << static_cast<char>('a' + g[ip]) << ' ' << s.copied
            << ' ' << s.read_head << ' ' << s.write_head << ' ' << s.emitted.size() << '\n';
      });
  for (std::size_t i = 0; i < outcome.offspring.size(); ++i) {
    out << "offspring " << i << ' ' << outcome.offspring[i].letters() << '\n';
  }
  const Phenotype ph = classify(g, isa, limits, m.budgets());
  if (ph.viable()) {
    out << "chain";
    for (const auto& c : ph.chain) out << ' ' << c.letters();
    out << '\n';
  }
  if (ph.budget_exhausted) out << "budget exhausted before a cycle was found\n";
  out << stop_reason_name(outcome.reason) << " step " << outcome.steps_used << "; "
      << phenotype_name(ph.kind) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::size_t max_length = 5;
  MachineOptions machine;
  unsigned threads = 1;
};

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

/// Cross-checks the engine against the brute-force oracles for every length
/// 1..max_length.
inline std::vector<CheckResult> run_verification(const VerifyOptions& o) {
  std::vector<CheckResult> checks;
  const auto add = [&](std::string name, bool pass, std::string detail = {}) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  };
  const IsaSpec isa = o.machine.isa_spec();
  for (std::size_t len = 1; len <= o.max_length; ++len) {
    const std::string tag = "L=" + std::to_string(len) + " ";
    CensusConfig cfg;
    cfg.length = len;
    cfg.isa = isa;
    cfg.limits = o.machine.limits(len);
    cfg.budgets = o.machine.budgets();
    cfg.shard_count = 7;
    const CensusResult census = compute_census(cfg, o.threads);
    const auto naive = oracle::naive_viable_set(len, isa, cfg.limits, cfg.budgets);
    add(tag + "census equals naive loop", census.viable_ranks == naive,
        std::to_string(census.viable_count()) + " viable");

    const Landscape land(census);
    const unsigned d = isa.alphabet();
    const auto bfs = oracle::bfs_components(naive, len, d);
    const auto uf = find_clusters(land, ClusterMode::Raw);
    std::vector<std::vector<Rank>> mine;
    for (const auto& c : uf.components) mine.push_back(c.members);
    std::sort(mine.begin(), mine.end());
    auto ref = bfs;
    std::sort(ref.begin(), ref.end());
    add(tag + "clusters equal BFS partition", mine == ref,
        std::to_string(uf.components.size()) + " components");

    const std::size_t rot = rotation_classes(land).count();
    const std::size_t rot_ref = oracle::pairwise_rotation_class_count(naive, len, d);
    add(tag + "rotation classes equal pairwise count", rot == rot_ref, std::to_string(rot) + " classes");

    bool distances_ok = true;
    for (Rank r : naive) {
      const auto ref_counts = oracle::pairwise_distance_counts(naive, r, len, d);
      distances_ok = distances_ok &&
                     viable_counts_by_distance(land, r, DistanceMethod::ViablePairs) == ref_counts &&
                     (!land.bitmap() ||
                      viable_counts_by_distance(land, r, DistanceMethod::BitmapScan) == ref_counts);
    }
    add(tag + "distance counts equal pairwise Hamming", distances_ok);

    std::size_t robust_sum = 0;
    for (auto v : robustness_all(land)) robust_sum += v;
    const std::size_t edges = oracle::pairwise_edge_count(naive, len, d);
    add(tag + "robustness sum equals twice edge count", robust_sum == 2 * edges,
        std::to_string(robust_sum) + " = 2 x " + std::to_string(edges));
  }
  return checks;
}

inline int cmd_verify(const VerifyOptions& o, std::ostream& out = std::cout) {
  bool ok = true;
  for (const auto& c : run_verification(o)) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << " (" << c.detail << ")";
    out << '\n';
    ok = ok && c.pass;
  }
  return ok ? kOk : kVerifyFailed;
}

} // namespace gpmap::cli
