// Command-line driver: convert, run, bench, replace, eval, agree, report.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tablelogic/config.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tablelogic;

namespace {

struct Overrides {
  std::string config;
  std::string run_dir;
  std::vector<std::string> strategies;
  std::vector<std::string> models;
  int workers = 0;
  bool no_cache = false;
  std::size_t per_dataset = 0;
  std::int64_t seed = -1;
  bool wall_clock = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "INI config file")->required();
  app->add_option("-r,--run-dir", o.run_dir, "Run directory")->required();
  app->add_option("--strategies", o.strategies, "Override [strategies] run")->delimiter(',');
  app->add_option("--models", o.models, "Override run.models")->delimiter(',');
  app->add_option("-j,--workers", o.workers, "Concurrent records");
  app->add_flag("--no-cache", o.no_cache, "Bypass the response cache");
  app->add_option("-n,--per-dataset-count", o.per_dataset, "Records sampled per dataset");
  app->add_option("--seed", o.seed, "Sampling seed");
  app->add_flag("--wall-clock", o.wall_clock, "Record real step timestamps");
}

pipeline::StageContext context(const Overrides& o) {
  pipeline::StageContext ctx;
  ctx.config = load_config(o.config);
  auto& cfg = ctx.config;
  if (!o.strategies.empty()) {
    cfg.strategies.clear();
    for (const auto& s : o.strategies) {
      try {
        cfg.strategies.push_back(parse_strategy(s));
      } catch (const TemplateError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (!o.models.empty()) {
    for (const auto& m : o.models) {
      if (!cfg.backends.count(m)) throw ConfigError("model '" + m + "' is not defined in [backends]");
    }
    cfg.models = o.models;
  }
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.no_cache) cfg.use_cache = false;
  if (o.per_dataset > 0) cfg.sampling.per_dataset_count = o.per_dataset;
  if (o.seed >= 0) cfg.sampling.seed = static_cast<std::uint64_t>(o.seed);
  ctx.run_dir = o.run_dir;
  ctx.log = &std::cout;
  ctx.wall_clock = o.wall_clock;
  return ctx;
}

void print_stats(const char* stage, const pipeline::StageStats& s) {
  std::cout << fmt::format("{}: done items={} skipped={} failed={} backend_calls={}\n", stage,
                           s.items, s.skipped, s.failed, s.backend_calls);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table question answering prompt-chain harness"};
  app.require_subcommand(1);

  // convert
  std::string schema = "normalized", input, root, output, dataset_id;
  auto* convert = app.add_subcommand("convert", "Normalize a native dataset file to jsonl");
  convert->add_option("-s,--schema", schema, "normalized|wikitq|hybridqa|tatqa");
  convert->add_option("-i,--input", input, "Native file")->required()->check(CLI::ExistingFile);
  convert->add_option("--root", root, "Dataset root for side files");
  convert->add_option("-o,--output", output, "Normalized jsonl")->required();
  convert->add_option("--dataset-id", dataset_id, "Dataset id to stamp on records");

  Overrides o;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Execute strategies over sampled records");
  add_common(run, o);
  run->add_flag("--dry-run", dry_run, "Print planned call counts and exit");

  auto* bench = app.add_subcommand("bench", "Structural sub-task probes");
  add_common(bench, o);
  std::size_t per_kind = 0, synthetic = 0;
  std::string targets;
  bench->add_option("--per-kind", per_kind, "Instances per sub-task kind");
  bench->add_option("--synthetic", synthetic, "Add generated tables");
  bench->add_option("--targets", targets, "existing|planted");

  auto* replace = app.add_subcommand("replace", "Splice smaller-model intermediates into bigger models");
  add_common(replace, o);

  std::string method;
  auto* eval = app.add_subcommand("eval", "Score traces");
  add_common(eval, o);
  eval->add_option("-m,--method", method, "judge|exact_match");

  std::string file_a, file_b;
  auto* agree = app.add_subcommand("agree", "Agreement between two outcome files");
  agree->add_option("a", file_a, "First outcome file")->required()->check(CLI::ExistingFile);
  agree->add_option("b", file_b, "Second outcome file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> formats;
  auto* report = app.add_subcommand("report", "Write tables, figures data and manifest");
  add_common(report, o);
  report->add_option("-f,--formats", formats, "md,csv,json")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*convert) {
      auto r = pipeline::convert(input, parse_schema(schema), root, output, dataset_id);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& e : r.errors) std::cerr << "record " << e.index << ": " << e.message << '\n';
      std::cout << fmt::format("convert: records={} errors={} output={}\n", r.records,
                               r.errors.size(), output);
      return 0;
    }
    if (*agree) {
      auto r = pipeline::agree(file_a, file_b);
      std::cout << fmt::format("agree: paired={} comparable={} agreement={:.4f}\n", r.paired,
                               r.comparable, r.agreement);
      return 0;
    }
    auto ctx = context(o);
    if (*run) {
      if (dry_run) {
        std::cout << pipeline::describe_plan(pipeline::plan_run(ctx));
        return 0;
      }
      print_stats("run", pipeline::run(ctx));
    } else if (*bench) {
      if (per_kind) ctx.config.bench_per_kind = per_kind;
      if (synthetic) ctx.config.bench_synthetic = synthetic;
      if (!targets.empty()) {
        if (targets != "existing" && targets != "planted") throw ConfigError("--targets must be existing or planted");
        ctx.config.bench_targets = targets;
      }
      print_stats("bench", pipeline::bench(ctx));
    } else if (*replace) {
      print_stats("replace", pipeline::replace(ctx));
    } else if (*eval) {
      std::optional<ScoreMethod> m;
      if (!method.empty()) m = parse_method(method);
      print_stats("eval", pipeline::eval(ctx, m));
    } else if (*report) {
      std::vector<ReportFormat> fs_;
      for (const auto& f : formats) fs_.push_back(parse_report_format(f));
      if (fs_.empty()) fs_ = {ReportFormat::markdown, ReportFormat::csv, ReportFormat::structured};
      print_stats("report", pipeline::report(ctx, fs_));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CredentialError& e) {
    std::cerr << "credential error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
