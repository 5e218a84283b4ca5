#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "spitgate/capture_io.h"
#include "spitgate/classify_media.h"
#include "spitgate/error.h"
#include "spitgate/pipeline.h"
#include "spitgate/spam_db.h"
#include "spitgate/traffic_synth.h"
#include "spitgate/version.h"

namespace spitgate::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kDbEnv = "SPITGATE_DB";

struct CliConfig {
  std::string db_path;
  std::string prototype_path;
  std::string capture_path;
  std::string corpus_path;
  std::string spec_path;
  std::string out_path;
  std::string combination = "any";
  bool fail_closed = false;
  unsigned jobs = 1;
  std::uint16_t sip_port = kDefaultSipPort;
  std::size_t repetitions = 5;
  bool verbose = false;

  std::string field;
  std::string kind;
  std::string pattern;
};

// Captures listed by the corpus manifest, or every *.pcap in name order.
std::vector<fs::path> corpus_captures(const fs::path& dir) {
  std::vector<fs::path> paths;
  if (fs::exists(dir / synth::kManifestName)) {
    for (const auto& entry : synth::load_manifest(dir / synth::kManifestName)) {
      paths.push_back(dir / entry.path);
    }
    return paths;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pcap") {
      paths.push_back(entry.path());
    }
  }
  std::ranges::sort(paths);
  return paths;
}

PrototypeTable prototypes_or_default(const std::string& path) {
  return path.empty() ? default_prototypes() : load_prototypes(path);
}

AnalysisConfig analysis_config(const CliConfig& config) {
  AnalysisConfig analysis;
  analysis.combination = parse_combination(config.combination).value_or(Combination::kAny);
  analysis.media.fail_closed = config.fail_closed;
  analysis.jobs = std::max(1u, config.jobs);
  analysis.sip_port = config.sip_port;
  return analysis;
}

int run_analyze(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const auto report = analyze_capture(config.capture_path, config.db_path, config.prototype_path,
                                      analysis_config(config));
  write_report(report, out);
  if (config.verbose) {
    fmt::print(err, "skipped frames: {}, orphan datagrams: {}\n", report.skipped_frames,
               report.orphan_datagrams);
  }
  return exit_code(report) == 0 ? kExitOk : kExitSpam;
}

int run_synth(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const auto profiles = synth::load_spec(config.spec_path);
  const auto paths = synth::synth_corpus(profiles, config.out_path);
  for (const auto& p : paths) out << p.string() << '\n';
  if (config.verbose) {
    fmt::print(err, "wrote {} captures and {}\n", paths.size(),
               (fs::path(config.out_path) / synth::kManifestName).string());
  }
  return kExitOk;
}

db::SpamPattern pattern_from(const CliConfig& config) {
  const auto field = db::parse_field(config.field);
  const auto kind = db::parse_match_kind(config.kind);
  if (!field || !kind) throw InvalidArgument("unknown field or kind");
  return db::make_pattern(*field, *kind, config.pattern);
}

int run_db_list(const CliConfig& config, std::ostream& out, std::ostream& err) {
  const auto store = db::load(config.db_path);
  for (const auto& p : store.patterns) {
    fmt::print(out, "{}|{}|{}\n", db::to_string(p.field), db::to_string(p.kind), p.pattern);
  }
  if (store.duplicates_dropped > 0) {
    fmt::print(err, "warning: {} duplicate lines ignored\n", store.duplicates_dropped);
  }
  return kExitOk;
}

int run_db_add(const CliConfig& config, std::ostream& out, std::ostream&) {
  db::PatternStore store;
  if (fs::exists(config.db_path)) {
    store = db::load(config.db_path);
  } else {
    store.path = config.db_path;
  }
  const auto pattern = pattern_from(config);
  db::add(store, pattern);
  fmt::print(out, "added {}|{}|{}\n", db::to_string(pattern.field), db::to_string(pattern.kind),
             pattern.pattern);
  return kExitOk;
}

int run_db_remove(const CliConfig& config, std::ostream& out, std::ostream&) {
  const auto store = db::load(config.db_path);
  const auto pattern = pattern_from(config);
  db::remove(store, pattern);
  fmt::print(out, "removed {}|{}|{}\n", db::to_string(pattern.field), db::to_string(pattern.kind),
             pattern.pattern);
  return kExitOk;
}

int run_bench(const CliConfig& config, std::ostream& out, std::ostream&) {
  const auto store = db::load(config.db_path);
  const auto table = prototypes_or_default(config.prototype_path);
  const auto paths = corpus_captures(config.corpus_path);
  const auto result = benchmark(paths, store, table, analysis_config(config), config.repetitions);
  write_benchmark(result, out);
  return kExitOk;
}

int run_features(const CliConfig& config, std::ostream& out, std::ostream&) {
  const double scale =
      config.prototype_path.empty() ? 1.0 : load_prototypes(config.prototype_path).scale;
  const auto contents = read_capture(config.capture_path);
  const auto grouped = group_calls(contents.datagrams, config.sip_port);
  write_features(capture_features(grouped, analysis_config(config), scale), out);
  return kExitOk;
}

int run_calibrate(const CliConfig& config, std::ostream& out, std::ostream&) {
  const fs::path dir = config.corpus_path;
  const auto manifest = synth::load_manifest(dir / synth::kManifestName);
  const auto analysis = analysis_config(config);
  std::vector<double> genuine_means;
  for (const auto& entry : manifest) {
    if (synth::label_of(entry.kind) != CallClass::kGenuine) continue;
    const auto grouped = group_calls(read_capture(dir / entry.path).datagrams, analysis.sip_port);
    for (const auto& row : capture_features(grouped, analysis, 1.0)) {
      genuine_means.push_back(row.vector.absolute_mean);
    }
  }
  PrototypeTable table = prototypes_or_default(config.prototype_path);
  table.scale = calibrate_scale(genuine_means, table);
  save_prototypes(table, config.out_path);
  fmt::print(out, "scale|{}\n", table.scale);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig config;
  CLI::App app{"Offline two-layer VoIP spam (SPIT) detection", "spitgate"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", config.verbose, "Diagnostics on standard error");

  auto add_db = [&](CLI::App* cmd) {
    return cmd->add_option("--db", config.db_path, "Spam pattern file")->envname(kDbEnv)->required();
  };
  auto add_sip_port = [&](CLI::App* cmd) {
    cmd->add_option("--sip-port", config.sip_port, "UDP port carrying SIP")->capture_default_str();
  };

  auto* analyze = app.add_subcommand("analyze", "Classify every call in a capture");
  analyze->add_option("--capture", config.capture_path, "pcap file")->required()->check(CLI::ExistingFile);
  add_db(analyze)->check(CLI::ExistingFile);
  analyze->add_option("--prototypes", config.prototype_path, "Prototype table")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--combination", config.combination, "Signaling field combination")
      ->check(CLI::IsMember({"any", "all"}))
      ->capture_default_str();
  analyze->add_flag("--fail-closed", config.fail_closed, "Reject calls with too little media");
  analyze->add_option("--jobs", config.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_sip_port(analyze);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a labelled synthetic corpus");
  synth_cmd->add_option("--out", config.out_path, "Output directory")->required();
  synth_cmd->add_option("--spec", config.spec_path, "Profile list, kind|seed|duration|key=value...")
      ->required()
      ->check(CLI::ExistingFile);

  auto* db_cmd = app.add_subcommand("db", "Manage the spam pattern file");
  db_cmd->require_subcommand(1);
  auto* db_list = db_cmd->add_subcommand("list", "Print every pattern");
  add_db(db_list);
  auto* db_add = db_cmd->add_subcommand("add", "Add a pattern");
  auto* db_remove = db_cmd->add_subcommand("remove", "Remove a pattern");
  for (auto* cmd : {db_add, db_remove}) {
    add_db(cmd);
    cmd->add_option("--field", config.field, "Target field")
        ->required()
        ->check(CLI::IsMember({"from_user", "from_host", "from_display", "contact", "call_id",
                               "subject", "content_type", "source_ip"}));
    cmd->add_option("--kind", config.kind, "exact or substring")
        ->required()
        ->check(CLI::IsMember({"exact", "substring"}));
    cmd->add_option("--pattern", config.pattern, "Pattern text")->required();
  }

  auto* bench = app.add_subcommand("bench", "Time both layers over a corpus");
  bench->add_option("--corpus", config.corpus_path, "Corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  bench->add_option("--reps", config.repetitions, "Repetitions (>= 3)")->capture_default_str();
  add_db(bench)->check(CLI::ExistingFile);
  bench->add_option("--prototypes", config.prototype_path, "Prototype table")->check(CLI::ExistingFile);
  add_sip_port(bench);

  auto* feats = app.add_subcommand("features", "Dump per-call audio features");
  feats->add_option("--capture", config.capture_path, "pcap file")->required()->check(CLI::ExistingFile);
  feats->add_option("--prototypes", config.prototype_path, "Prototype table (for its scale)")
      ->check(CLI::ExistingFile);
  add_sip_port(feats);

  auto* calibrate = app.add_subcommand("calibrate", "Fit the prototype scale to labelled genuine calls");
  calibrate->add_option("--corpus", config.corpus_path, "Corpus directory with manifest")
      ->required()
      ->check(CLI::ExistingDirectory);
  calibrate->add_option("--prototypes", config.prototype_path, "Base prototype table")
      ->check(CLI::ExistingFile);
  calibrate->add_option("--out", config.out_path, "Calibrated table to write")->required();
  add_sip_port(calibrate);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (analyze->parsed()) return run_analyze(config, out, err);
    if (synth_cmd->parsed()) return run_synth(config, out, err);
    if (db_list->parsed()) return run_db_list(config, out, err);
    if (db_add->parsed()) return run_db_add(config, out, err);
    if (db_remove->parsed()) return run_db_remove(config, out, err);
    if (bench->parsed()) return run_bench(config, out, err);
    if (feats->parsed()) return run_features(config, out, err);
    if (calibrate->parsed()) return run_calibrate(config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace spitgate::cli
