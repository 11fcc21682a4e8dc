// gpmap: exhaustive genotype-phenotype map census and landscape analysis.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "gpmap/cli.hpp"

namespace {

using namespace gpmap;

// CLI11 options bound to plain values; `count()` tells us whether the user
// supplied them, which is how unset optionals are recovered.
struct MachineFlags {
  cli::MachineOptions opts;
  std::uint64_t step_limit = 0;
  CLI::Option* step_limit_opt = nullptr;

  void attach(CLI::App& app) {
    app.add_option("--isa", opts.isa, "Instruction set id")->capture_default_str();
    app.add_option("--pad-nops", opts.pad_nops, "Extra nop symbols appended to the alphabet")
        ->capture_default_str();
    step_limit_opt = app.add_option("--step-limit", step_limit, "VM step limit T (default 4L^2+64)");
    app.add_option("--offspring-cap", opts.offspring_cap, "Offspring cap M")->capture_default_str();
    app.add_option("--chain-depth", opts.chain_depth, "Reproduction chain depth budget G")
        ->capture_default_str();
    app.add_option("--chain-width", opts.chain_width, "Distinct genotypes explored budget B")
        ->capture_default_str();
  }

  cli::MachineOptions resolve() const {
    cli::MachineOptions m = opts;
    if (step_limit_opt->count() > 0) m.step_limit = step_limit;
    return m;
  }
};

template <class T>
std::optional<T> optional_of(const CLI::Option* opt, const T& value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

int run(int argc, char** argv) {
  CLI::App app{"Exhaustive genotype-phenotype map census and landscape analysis"};
  app.set_config("--config", "", "TOML/INI file with option defaults (command-line flags win)");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  unsigned threads = 1;
  const auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads")
        ->envname("GPMAP_THREADS")
        ->capture_default_str();
  };

  // census
  auto* census = app.add_subcommand("census", "Classify every genome of length L");
  cli::CensusOptions census_opts;
  MachineFlags census_machine;
  std::size_t shards = 0;
  std::size_t stop_after = 0;
  std::string replay;
  bool no_bitmap = false, bitmap = false;
  census->add_option("-L,--length", census_opts.length, "Genome length")->capture_default_str();
  census_machine.attach(*census);
  auto* shards_opt = census->add_option("--shards", shards, "Shard count (default 64 x threads)");
  add_threads(census);
  census->add_option("--out", census_opts.out, "Output path prefix")->capture_default_str();
  census->add_flag("--force", census_opts.force, "Overwrite existing outputs");
  census->add_flag("--bitmap", bitmap, "Always write the full-space bitmap");
  census->add_flag("--no-bitmap", no_bitmap, "Never write the full-space bitmap");
  auto* stop_opt = census->add_option("--stop-after-shards", stop_after,
                                      "Stop after N newly completed shards (resume later)");
  census->add_option("--replay", replay, "Re-run the configuration recorded in a census manifest");

  // info
  auto* info = app.add_subcommand("info", "Summarize a census");
  std::string info_census, info_format = "text";
  info->add_option("census,--census", info_census, "Census path prefix")->required();
  info->add_option("--format", info_format, "text | json")->capture_default_str();

  // clusters
  auto* clusters = app.add_subcommand("clusters", "Neutral clusters and cluster graphs");
  cli::ClustersOptions cl;
  std::string cl_census, cl_out;
  Rank cl_component = 0;
  clusters->add_option("--census", cl_census, "Census path prefix")->required();
  clusters->add_option("--mode", cl.mode, "raw | collapsed")->capture_default_str();
  clusters->add_option("--format", cl.format, "json | dot")->capture_default_str();
  auto* cl_comp_opt = clusters->add_option("--component", cl_component, "Export this component's graph");
  clusters->add_flag("--largest", cl.largest, "Export the largest component's graph");
  auto* cl_out_opt = clusters->add_option("--out", cl_out, "Output file (default stdout)");
  clusters->add_flag("--force", cl.force, "Overwrite existing output");

  // robustness
  auto* robust = app.add_subcommand("robustness", "Viable one-mutant neighbor counts");
  cli::RobustnessOptions rb;
  std::string rb_census, rb_out;
  robust->add_option("--census", rb_census, "Census path prefix")->required();
  robust->add_option("--rank", rb.ranks, "Viable rank (repeatable; default all)");
  robust->add_option("--genome", rb.genomes, "Viable genome letters (repeatable)");
  auto* rb_out_opt = robust->add_option("--out", rb_out, "Output file (default stdout)");
  robust->add_flag("--force", rb.force, "Overwrite existing output");

  // curves
  auto* curves = app.add_subcommand("curves", "Information-density curves rho(n), phi(n)");
  cli::CurvesOptions cv;
  std::string cv_census, cv_out;
  curves->add_option("--census", cv_census, "Census path prefix")->required();
  curves->add_option("--rank", cv.ranks, "Viable rank (repeatable)");
  curves->add_option("--genome", cv.genomes, "Viable genome letters (repeatable)");
  curves->add_flag("--most-robust", cv.most_robust, "Most robust genome (ties: smallest rank)");
  curves->add_flag("--most-fragile", cv.most_fragile, "Most fragile genome (ties: smallest rank)");
  curves->add_flag("--all", cv.all, "Every viable genome");
  curves->add_flag("--mean", cv.mean, "Mean phi(n) over all viable genomes");
  curves->add_flag("--epistasis", cv.epistasis, "Compare against the no-epistasis line");
  curves->add_option("--dead-band", cv.dead_band, "Epistasis sign dead band (mers)")->capture_default_str();
  curves->add_option("--method", cv.method, "auto | pairs | bitmap")->capture_default_str();
  auto* cv_out_opt = curves->add_option("--out", cv_out, "Output file (default stdout)");
  curves->add_flag("--force", cv.force, "Overwrite existing output");

  // baselines
  auto* baselines = app.add_subcommand("baselines", "Compressed and no-epistasis reference curves");
  cli::BaselinesOptions bl;
  std::string bl_census, bl_out;
  std::size_t bl_length = 0;
  unsigned bl_alphabet = 0;
  double bl_info = 0;
  auto* bl_census_opt = baselines->add_option("--census", bl_census, "Census path prefix");
  auto* bl_len_opt = baselines->add_option("-L,--length", bl_length, "Genome length");
  auto* bl_alpha_opt = baselines->add_option("--alphabet", bl_alphabet, "Alphabet size D");
  auto* bl_info_opt = baselines->add_option("--info", bl_info, "I_L in mers");
  auto* bl_out_opt = baselines->add_option("--out", bl_out, "Output file (default stdout)");
  baselines->add_flag("--force", bl.force, "Overwrite existing output");

  // trace
  auto* trace = app.add_subcommand("trace", "Step-by-step execution listing and phenotype");
  std::string trace_genome;
  MachineFlags trace_machine;
  trace->add_option("genome", trace_genome, "Genome letters (a = symbol 0)")->required();
  trace_machine.attach(*trace);

  // verify
  auto* verify = app.add_subcommand("verify", "Cross-check the engine against brute-force oracles");
  cli::VerifyOptions vf;
  MachineFlags verify_machine;
  verify->add_option("-L,--length", vf.max_length, "Check every length 1..L")->capture_default_str();
  verify_machine.attach(*verify);
  add_threads(verify);

  CLI11_PARSE(app, argc, argv);

  if (census->parsed()) {
    census_opts.machine = census_machine.resolve();
    census_opts.shards = optional_of(shards_opt, shards);
    census_opts.threads = threads;
    census_opts.stop_after_shards = optional_of(stop_opt, stop_after);
    if (bitmap && no_bitmap) throw UsageError("--bitmap and --no-bitmap are mutually exclusive");
    if (bitmap) census_opts.bitmap = true;
    if (no_bitmap) census_opts.bitmap = false;
    if (!replay.empty()) return cli::cmd_census_replay(replay, census_opts);
    return cli::cmd_census(census_opts);
  }
  if (info->parsed()) return cli::cmd_info(info_census, info_format);
  if (clusters->parsed()) {
    cl.census = cl_census;
    cl.component = optional_of(cl_comp_opt, cl_component);
    if (cl_out_opt->count() > 0) cl.out = cl_out;
    return cli::cmd_clusters(cl);
  }
  if (robust->parsed()) {
    rb.census = rb_census;
    if (rb_out_opt->count() > 0) rb.out = rb_out;
    return cli::cmd_robustness(rb);
  }
  if (curves->parsed()) {
    cv.census = cv_census;
    if (cv_out_opt->count() > 0) cv.out = cv_out;
    return cli::cmd_curves(cv);
  }
  if (baselines->parsed()) {
    if (bl_census_opt->count() > 0) bl.census = bl_census;
    bl.length = optional_of(bl_len_opt, bl_length);
    bl.alphabet = optional_of(bl_alpha_opt, bl_alphabet);
    bl.info = optional_of(bl_info_opt, bl_info);
    if (bl_out_opt->count() > 0) bl.out = bl_out;
    return cli::cmd_baselines(bl);
  }
  if (trace->parsed()) return cli::cmd_trace(trace_genome, trace_machine.resolve());
  if (verify->parsed()) {
    vf.machine = verify_machine.resolve();
    vf.threads = threads;
    return cli::cmd_verify(vf);
  }
  return cli::kUsage;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gpmap::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return gpmap::cli::kUsage;
  } catch (const gpmap::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return gpmap::cli::kDomain;
  } catch (const gpmap::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return gpmap::cli::kIntegrity;
  } catch (const gpmap::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return gpmap::cli::kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
