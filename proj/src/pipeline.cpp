#include "tablelogic/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tablelogic/chain.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/generator.hpp"
#include "tablelogic/kernels.hpp"
#include "tablelogic/subtask.hpp"

namespace tablelogic::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const StageContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n' << std::flush;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_resolved_config(const StageContext& ctx, const fs::path& stage_dir) {
  write_text_file(stage_dir / "config.resolved.ini", resolved_config_text(ctx.config));
}

fs::path cache_dir(const StageContext& ctx) {
  return ctx.config.cache_dir.empty() ? ctx.run_dir / "cache" : ctx.config.cache_dir;
}

// Backends for one stage: factory -> counter -> optional cache.
class BackendPool {
 public:
  explicit BackendPool(const StageContext& ctx) : ctx_(ctx) {
    if (ctx.config.use_cache) cache_ = std::make_shared<ResponseCache>(cache_dir(ctx));
  }

  Backend& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it != entries_.end()) return *it->second.top;
    auto cfg_it = ctx_.config.backends.find(name);
    if (cfg_it == ctx_.config.backends.end()) {
      throw ConfigError("backend '" + name + "' is not configured");
    }
    BackendConfig bc = cfg_it->second;
    bc.decoding = ctx_.config.decoding;
    auto raw = ctx_.factory ? ctx_.factory(bc) : make_backend(bc);
    Entry e;
    e.counter = std::make_shared<CountingBackend>(std::move(raw));
    e.top = cache_ ? std::shared_ptr<Backend>(std::make_shared<CachingBackend>(e.counter, cache_))
                   : std::shared_ptr<Backend>(e.counter);
    return *entries_.emplace(name, std::move(e)).first->second.top;
  }

  std::size_t calls() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.counter->calls();
    return n;
  }
  std::size_t calls(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? 0 : it->second.counter->calls();
  }

 private:
  struct Entry {
    std::shared_ptr<CountingBackend> counter;
    std::shared_ptr<Backend> top;
  };
  const StageContext& ctx_;
  std::shared_ptr<ResponseCache> cache_;
  std::map<std::string, Entry> entries_;
};

const TemplateSet& templates_for(const StageContext& ctx, std::unique_ptr<TemplateSet>& holder) {
  if (ctx.config.template_dir.empty()) return TemplateSet::builtin();
  holder = std::make_unique<TemplateSet>(TemplateSet::load_dir(ctx.config.template_dir));
  return *holder;
}

ChainOptions chain_options(const StageContext& ctx, const TemplateSet& templates,
                           const std::string& model) {
  ChainOptions o;
  o.templates = &templates;
  o.model = model;
  o.model_id = ctx.config.backends.at(model).model;
  o.decoding = ctx.config.decoding;
  o.include_passages = ctx.config.include_passages;
  if (ctx.wall_clock) {
    o.clock = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
  }
  return o;
}

std::vector<QARecord> sampled_records(const StageContext& ctx, const DatasetEntry& ds) {
  LoadResult lr = load_normalized(ds.path);
  for (const auto& e : lr.errors) {
    say(ctx, fmt::format("warning: {} record {}: {}", ds.id, e.index, e.message));
  }
  for (auto& r : lr.records) r.dataset_id = ds.id;
  return sample(lr.records, ctx.config.sampling);
}

// Last trace per record id, in order of first appearance.
std::vector<ChainTrace> latest_by_record(std::vector<ChainTrace> traces) {
  std::map<std::string, std::size_t> pos;
  std::vector<ChainTrace> out;
  for (auto& t : traces) {
    auto [it, fresh] = pos.emplace(t.record_id, out.size());
    if (fresh) out.push_back(std::move(t));
    else out[it->second] = std::move(t);
  }
  return out;
}

std::vector<ChainTrace> read_latest(const fs::path& p) {
  if (!fs::exists(p)) return {};
  return latest_by_record(read_traces(p));
}

// Runs `task` for every record without a completed trace in `path`.
StageStats run_pending(const StageContext& ctx, const std::vector<QARecord>& records,
                       const fs::path& path, const kernels::RecordTask& task) {
  std::set<std::string> done;
  for (const auto& t : read_latest(path)) {
    if (t.ok()) done.insert(t.record_id);
  }
  std::vector<QARecord> todo;
  for (const auto& r : records) {
    if (!done.count(r.record_id)) todo.push_back(r);
  }
  StageStats st;
  st.skipped = records.size() - todo.size();
  if (todo.empty()) return st;

  fs::create_directories(path.parent_path());
  TraceWriter writer(path);
  auto sink = [&](const ChainTrace& t) { writer.append(t); };
  std::vector<ChainTrace> traces =
      ctx.config.workers > 1 ? kernels::run_records_parallel(todo, task, ctx.config.workers, sink)
                             : kernels::run_records_serial(todo, task, sink);
  st.items = traces.size();
  for (const auto& t : traces) st.failed += t.ok() ? 0 : 1;
  return st;
}

ChainTrace failed_trace(const QARecord& r, const std::string& model, StrategyKind kind,
                        std::string error) {
  ChainTrace t;
  t.record_id = r.record_id;
  t.dataset_id = r.dataset_id;
  t.model = model;
  t.strategy = kind;
  t.question = r.question;
  t.gold_answers = r.gold_answers;
  t.status = TraceStatus::failed;
  t.error = std::move(error);
  return t;
}

bool needs_augment(StrategyKind k) {
  return k == StrategyKind::vanilla_with_column_row || k == StrategyKind::vanilla_with_aggregation;
}

std::string augment_source(const RunConfig& cfg, const std::string& model) {
  if (!cfg.augment_source.empty()) return cfg.augment_source;
  return model;
}

// table_logic first so that augmented variants can read its intermediates.
std::vector<StrategyKind> run_order(const std::vector<StrategyKind>& strategies) {
  std::vector<StrategyKind> out;
  bool augmented = std::any_of(strategies.begin(), strategies.end(), needs_augment);
  if (augmented) out.push_back(StrategyKind::table_logic);
  for (auto s : strategies) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

fs::path trace_path(const StageContext& ctx, const std::string& model, const std::string& ds,
                    StrategyKind kind) {
  return ctx.run_dir / "run" / "traces" / model / ds / (std::string(strategy_name(kind)) + ".jsonl");
}

fs::path records_path(const StageContext& ctx, const std::string& ds) {
  return ctx.run_dir / "run" / "records" / (ds + ".jsonl");
}

// Parallel map over indices with exceptions carried out of the region.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::exception_ptr error;
  std::mutex mu;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(workers, 1))
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<fs::path> jsonl_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ConvertResult convert(const fs::path& input, DatasetSchema schema, const fs::path& root,
                      const fs::path& output, const std::string& dataset_id) {
  LoadResult lr = load_normalized(input, schema, root);
  if (!dataset_id.empty()) {
    for (auto& r : lr.records) r.dataset_id = dataset_id;
  }
  write_normalized(output, lr.records);
  return {lr.records.size(), std::move(lr.errors), std::move(lr.warnings)};
}

RunPlan plan_run(const StageContext& ctx) {
  RunPlan plan;
  const auto order = run_order(ctx.config.strategies);
  for (const auto& ds : ctx.config.datasets) {
    auto records = sampled_records(ctx, ds);
    std::size_t table_bytes = 0;
    for (const auto& r : records) table_bytes += table_text(r, ctx.config.include_passages).size();
    for (const auto& model : ctx.config.models) {
      for (auto kind : order) {
        PlannedGroup g{ds.id, model, std::string(strategy_name(kind)), records.size(), 0, 0};
        const std::size_t per = strategy_spec(kind).call_count();
        g.calls = per * records.size();
        g.prompt_bytes = per * table_bytes;
        plan.chain_calls += g.calls;
        plan.prompt_bytes += g.prompt_bytes;
        if (!ctx.config.judge.empty() && ctx.config.eval_method == "judge") {
          plan.judge_calls += records.size();
        }
        plan.groups.push_back(std::move(g));
      }
    }
  }
  return plan;
}

std::string describe_plan(const RunPlan& plan) {
  std::string out;
  for (const auto& g : plan.groups) {
    out += fmt::format("plan: dataset={} model={} strategy={} records={} calls={} prompt_bytes>={}\n",
                       g.dataset, g.model, g.strategy, g.records, g.calls, g.prompt_bytes);
  }
  out += fmt::format("plan: total chain_calls={} judge_calls={} (up to {} with retries) "
                     "prompt_bytes>={}\n",
                     plan.chain_calls, plan.judge_calls, 2 * plan.judge_calls, plan.prompt_bytes);
  return out;
}

StageStats run(const StageContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::vector<std::string> used = cfg.models;
  for (const auto& m : cfg.models) used.push_back(augment_source(cfg, m));
  check_credentials(cfg, used);

  std::unique_ptr<TemplateSet> holder;
  const TemplateSet& templates = templates_for(ctx, holder);
  const auto order = run_order(cfg.strategies);
  for (auto kind : order) check_strategy(templates, strategy_spec(kind));

  const fs::path stage_dir = ctx.run_dir / "run";
  write_resolved_config(ctx, stage_dir);
  BackendPool pool(ctx);
  StageStats total;

  // A shared augmentation source must finish its table_logic runs before the
  // other models read them.
  std::vector<std::string> models = cfg.models;
  if (std::any_of(order.begin(), order.end(), needs_augment) && !cfg.augment_source.empty()) {
    auto it = std::find(models.begin(), models.end(), cfg.augment_source);
    if (it == models.end()) {
      throw ConfigError("run.augment_source '" + cfg.augment_source + "' must be in run.models");
    }
    std::rotate(models.begin(), it, it + 1);
  }

  for (const auto& ds : cfg.datasets) {
    const auto records = sampled_records(ctx, ds);
    write_normalized(records_path(ctx, ds.id), records);
    for (const auto& model : models) {
      Backend& backend = pool.get(model);
      const ChainOptions opts = chain_options(ctx, templates, model);
      for (auto kind : order) {
        const StrategySpec spec = strategy_spec(kind);
        std::map<std::string, InjectionPayload> augments;
        if (needs_augment(kind)) {
          const std::string src = augment_source(cfg, model);
          for (const auto& t : read_latest(trace_path(ctx, src, ds.id, StrategyKind::table_logic))) {
            if (t.ok()) augments.emplace(t.record_id, harvest_intermediates(t));
          }
        }
        const std::size_t before = pool.calls();
        auto task = [&](const QARecord& r) -> ChainTrace {
          if (!needs_augment(kind)) return run_chain(r, spec, backend, opts);
          auto it = augments.find(r.record_id);
          if (it == augments.end()) {
            return failed_trace(r, model, kind, "no table_logic intermediates to augment with");
          }
          return run_chain(r, spec, backend, opts, &it->second);
        };
        StageStats st = run_pending(ctx, records, trace_path(ctx, model, ds.id, kind), task);
        st.backend_calls = pool.calls() - before;
        say(ctx, fmt::format("run: dataset={} model={} strategy={} records={} new={} skipped={} "
                             "failed={} backend_calls={}",
                             ds.id, model, strategy_name(kind), records.size(), st.items,
                             st.skipped, st.failed, st.backend_calls));
        total.items += st.items;
        total.skipped += st.skipped;
        total.failed += st.failed;
      }
    }
  }
  total.backend_calls = pool.calls();
  return total;
}

// ---------------------------------------------------------------------------

StageStats bench(const StageContext& ctx) {
  const RunConfig& cfg = ctx.config;
  check_credentials(cfg, cfg.models);
  std::unique_ptr<TemplateSet> holder;
  const TemplateSet& templates = templates_for(ctx, holder);

  const fs::path stage_dir = ctx.run_dir / "bench";
  write_resolved_config(ctx, stage_dir);

  StructuralOptions sopts;
  sopts.targets = cfg.bench_targets == "planted" ? FindingTargets::planted
                                                 : FindingTargets::existing_cells;

  // One suite per table source.
  std::vector<std::pair<std::string, std::vector<SubTaskInstance>>> suites;
  std::uint64_t salt = 0;
  for (const auto& ds : cfg.datasets) {
    std::vector<Table> tables;
    for (const auto& r : sampled_records(ctx, ds)) tables.push_back(r.table);
    suites.emplace_back(ds.id, generate_structural(tables, cfg.bench_per_kind,
                                                   cfg.bench_seed + (++salt), sopts));
  }
  if (cfg.bench_synthetic > 0) {
    std::vector<Table> tables;
    GeneratorOptions gopts;
    gopts.min_rows = 1;
    gopts.max_rows = 20;
    gopts.min_cols = 2;
    gopts.max_cols = 6;
    for (std::size_t i = 0; i < cfg.bench_synthetic; ++i) {
      tables.push_back(generate_table(cfg.bench_seed * 1000003 + i, gopts).table);
    }
    suites.emplace_back("synthetic", generate_structural(tables, cfg.bench_per_kind,
                                                         cfg.bench_seed + (++salt), sopts));
  }
  for (const auto& [ds, suite] : suites) {
    write_suite(stage_dir / "suites" / (ds + ".jsonl"), suite);
  }

  BackendPool pool(ctx);
  StageStats total;
  for (const auto& model : cfg.models) {
    Backend& backend = pool.get(model);
    const ChainOptions opts = chain_options(ctx, templates, model);
    for (const auto& [ds, suite] : suites) {
      const std::size_t before = pool.calls();
      std::vector<EvalOutcome> outcomes(suite.size());
      parallel_for(suite.size(), cfg.workers, [&](std::size_t i) {
        outcomes[i] = to_outcome(run_probe(suite[i], backend, opts), ds);
      });
      write_outcomes(stage_dir / "outcomes" / model / (ds + ".jsonl"), outcomes);
      std::size_t correct = 0, unevaluated = 0;
      for (const auto& o : outcomes) {
        correct += o.verdict == Verdict::correct;
        unevaluated += o.verdict == Verdict::unevaluated;
      }
      say(ctx, fmt::format("bench: dataset={} model={} probes={} correct={} unevaluated={} "
                           "backend_calls={}",
                           ds, model, outcomes.size(), correct, unevaluated,
                           pool.calls() - before));
      total.items += outcomes.size();
      total.failed += unevaluated;
    }
  }
  total.backend_calls = pool.calls();
  return total;
}

// ---------------------------------------------------------------------------

StageStats replace(const StageContext& ctx) {
  const RunConfig& cfg = ctx.config;
  check_credentials(cfg, cfg.bigger);
  std::unique_ptr<TemplateSet> holder;
  const TemplateSet& templates = templates_for(ctx, holder);

  const fs::path stage_dir = ctx.run_dir / "replace";
  write_resolved_config(ctx, stage_dir);
  BackendPool pool(ctx);
  StageStats total;

  for (const auto& small : cfg.smaller) {
    for (const auto& big : cfg.bigger) {
      if (small == big) continue;
      Backend& backend = pool.get(big);
      ChainOptions opts = chain_options(ctx, templates, big);
      const std::string variant = small + "->" + big;
      for (const auto& ds : cfg.datasets) {
        const fs::path rp = records_path(ctx, ds.id);
        if (!fs::exists(rp)) {
          throw ConfigError("replace needs the run stage output '" + rp.string() + "'");
        }
        const auto records = load_normalized(rp).records;
        const auto small_traces =
            read_latest(trace_path(ctx, small, ds.id, StrategyKind::table_logic));
        for (SubTaskKind kind :
             {SubTaskKind::critical_replacement, SubTaskKind::aggregation_replacement}) {
          const ReplacementSuite suite = build_replacement_suite(records, small_traces, kind);
          std::map<std::string, const InjectionPayload*> payloads;
          std::vector<QARecord> rs;
          for (const auto& p : suite.pairs) {
            payloads[p.record.record_id] = &p.payload;
            rs.push_back(p.record);
          }
          const std::size_t before = pool.calls();
          auto task = [&](const QARecord& r) {
            ChainTrace t = run_with_injection(r, *payloads.at(r.record_id), backend, opts);
            t.variant = variant;
            return t;
          };
          const fs::path out = stage_dir / "traces" / (small + "__" + big) / ds.id /
                               (std::string(subtask_name(kind)) + ".jsonl");
          StageStats st = run_pending(ctx, rs, out, task);
          say(ctx, fmt::format("replace: pair={} dataset={} kind={} pairs={} no_source={} new={} "
                               "skipped={} failed={} backend_calls={}",
                               variant, ds.id, subtask_name(kind), rs.size(), suite.skipped,
                               st.items, st.skipped, st.failed, pool.calls() - before));
          total.items += st.items;
          total.skipped += st.skipped;
          total.failed += st.failed;
        }
      }
    }
  }
  total.backend_calls = pool.calls();
  return total;
}

// ---------------------------------------------------------------------------

StageStats eval(const StageContext& ctx, std::optional<ScoreMethod> method_override) {
  const RunConfig& cfg = ctx.config;
  const ScoreMethod method = method_override ? *method_override : parse_method(cfg.eval_method);
  if (method == ScoreMethod::oracle) throw ConfigError("eval scores traces by judge or exact_match");
  if (method == ScoreMethod::judge) {
    if (cfg.judge.empty()) throw ConfigError("judge scoring needs run.judge");
    check_credentials(cfg, {cfg.judge});
  }
  std::unique_ptr<TemplateSet> holder;
  const TemplateSet& templates = templates_for(ctx, holder);

  const fs::path stage_dir = ctx.run_dir / "eval";
  write_resolved_config(ctx, stage_dir);
  BackendPool pool(ctx);
  Backend* judge_backend = method == ScoreMethod::judge ? &pool.get(cfg.judge) : nullptr;
  JudgeOptions jopts;
  jopts.templates = &templates;
  if (!cfg.judge.empty()) jopts.model_id = cfg.backends.at(cfg.judge).model;
  jopts.decoding = cfg.decoding;

  StageStats total;
  for (const char* source : {"run", "replace"}) {
    const fs::path trace_root = ctx.run_dir / source / "traces";
    for (const auto& file : jsonl_files(trace_root)) {
      const auto traces = read_latest(file);
      // Replacement files are named after the sub-task kind.
      const bool replacement = std::string(source) == "replace";
      const std::string kind = file.stem().string();
      const std::size_t before = pool.calls();
      std::vector<EvalOutcome> outcomes(traces.size());
      parallel_for(traces.size(), cfg.workers, [&](std::size_t i) {
        outcomes[i] = evaluate_trace(traces[i], method, judge_backend, jopts);
        if (replacement) outcomes[i].strategy = kind;
      });
      const fs::path rel = fs::relative(file, trace_root);
      write_outcomes(stage_dir / "outcomes" / source / rel, outcomes);
      std::size_t correct = 0, unevaluated = 0;
      for (const auto& o : outcomes) {
        correct += o.verdict == Verdict::correct;
        unevaluated += o.verdict == Verdict::unevaluated;
      }
      say(ctx, fmt::format("eval: {}/{} n={} correct={} unevaluated={} backend_calls={}", source,
                           rel.generic_string(), outcomes.size(), correct, unevaluated,
                           pool.calls() - before));
      total.items += outcomes.size();
      total.failed += unevaluated;
    }
  }
  total.backend_calls = pool.calls();
  return total;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<EvalOutcome> read_all_outcomes(const fs::path& dir) {
  std::vector<EvalOutcome> out;
  for (const auto& f : jsonl_files(dir)) {
    auto part = read_outcomes(f);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

std::optional<double> accuracy_of(const std::vector<AccuracyReport>& reports,
                                  const std::string& model, const std::string& strategy,
                                  const std::string& variant = {}) {
  for (const auto& r : reports) {
    if (r.model == model && r.strategy == strategy && r.variant == variant) return r.accuracy();
  }
  return std::nullopt;
}

std::vector<AccuracyReport> filter_strategies(const std::vector<AccuracyReport>& reports,
                                              const std::vector<std::string>& strategies) {
  std::vector<AccuracyReport> out;
  for (const auto& r : reports) {
    if (r.variant.empty() &&
        std::find(strategies.begin(), strategies.end(), r.strategy) != strategies.end()) {
      out.push_back(r);
    }
  }
  return out;
}

json optional_number(std::optional<double> v) {
  return v ? json(round_to(*v, 3)) : json(nullptr);
}

}  // namespace

StageStats report(const StageContext& ctx, const std::vector<ReportFormat>& formats) {
  const RunConfig& cfg = ctx.config;
  const fs::path out_dir = ctx.run_dir / "report";
  write_resolved_config(ctx, out_dir);
  StageStats st;
  std::vector<std::string> written;

  auto write = [&](const std::string& name, const std::string& content) {
    write_text_file(out_dir / name, content);
    written.push_back(name);
  };
  auto emit_all = [&](const std::string& stem, const std::vector<AccuracyReport>& reports,
                      const std::string& markdown) {
    for (auto f : formats) {
      const std::string name = stem + std::string(report_format_extension(f));
      write(name, f == ReportFormat::markdown ? markdown : render_reports(reports, f));
    }
  };

  std::vector<std::string> datasets;
  for (const auto& d : cfg.datasets) datasets.push_back(d.id);

  // Main strategy runs.
  const auto run_outcomes = read_all_outcomes(ctx.run_dir / "eval" / "outcomes" / "run");
  const auto per_dataset = aggregate(run_outcomes);
  emit_all("accuracy", per_dataset, render_reports(per_dataset, ReportFormat::markdown));

  std::vector<std::string> main_strategies;
  std::vector<std::string> aug_strategies = {"vanilla"};
  for (auto s : cfg.strategies) {
    if (s == StrategyKind::vanilla || s == StrategyKind::self_augmentation ||
        s == StrategyKind::table_logic) {
      main_strategies.emplace_back(strategy_name(s));
    } else {
      aug_strategies.emplace_back(strategy_name(s));
    }
  }
  if (std::find(main_strategies.begin(), main_strategies.end(), "vanilla") == main_strategies.end()) {
    main_strategies.insert(main_strategies.begin(), "vanilla");
  }
  {
    auto reports = filter_strategies(per_dataset, main_strategies);
    StrategyTableSpec spec{datasets, cfg.models, main_strategies};
    emit_all("table1", reports, strategy_table_markdown(reports, spec));
  }
  {
    auto reports = filter_strategies(per_dataset, aug_strategies);
    emit_all("table2", reports, augmentation_table_markdown(reports, datasets, cfg.models));
  }

  // Sub-task gaps between model groups, pooled over datasets.
  const auto bench_outcomes = read_all_outcomes(ctx.run_dir / "bench" / "outcomes");
  const auto replace_outcomes = read_all_outcomes(ctx.run_dir / "eval" / "outcomes" / "replace");
  GroupKeys pooled;
  pooled.dataset = false;
  const auto bench_reports = aggregate(bench_outcomes, pooled);
  const auto run_pooled = aggregate(run_outcomes, pooled);
  const auto replace_reports = aggregate(replace_outcomes, pooled);

  std::vector<GapRow> gaps;
  json figure3 = json::object();
  for (const auto& model : cfg.models) {
    json row = json::object();
    for (auto kind : oracle_kinds()) {
      row[std::string(subtask_name(kind))] =
          optional_number(accuracy_of(bench_reports, model, std::string(subtask_name(kind))));
    }
    figure3[model] = row;
  }
  for (auto kind : oracle_kinds()) {
    const std::string name(subtask_name(kind));
    std::vector<double> b, s;
    for (const auto& m : cfg.bigger) {
      if (auto a = accuracy_of(bench_reports, m, name)) b.push_back(*a);
    }
    for (const auto& m : cfg.smaller) {
      if (auto a = accuracy_of(bench_reports, m, name)) s.push_back(*a);
    }
    if (!b.empty() && !s.empty()) gaps.push_back({name, group_average_and_gap(b, s)});
  }

  json figure4 = json::array();
  for (SubTaskKind kind : {SubTaskKind::critical_replacement, SubTaskKind::aggregation_replacement}) {
    const std::string name(subtask_name(kind));
    std::vector<double> b, s;
    for (const auto& big : cfg.bigger) {
      if (auto a = accuracy_of(run_pooled, big, "table_logic")) b.push_back(*a);
    }
    for (const auto& small : cfg.smaller) {
      std::vector<double> per_big;
      for (const auto& big : cfg.bigger) {
        auto a = accuracy_of(replace_reports, big, name, small + "->" + big);
        if (a) per_big.push_back(*a);
        if (small != big) {
          figure4.push_back({{"task", name},
                             {"smaller", small},
                             {"bigger", big},
                             {"accuracy", optional_number(a)},
                             {"bigger_own", optional_number(accuracy_of(run_pooled, big,
                                                                        "table_logic"))}});
        }
      }
      if (!per_big.empty()) {
        double sum = 0;
        for (double v : per_big) sum += v;
        s.push_back(sum / static_cast<double>(per_big.size()));
      }
    }
    if (!b.empty() && !s.empty()) gaps.push_back({name, group_average_and_gap(b, s)});
  }

  for (auto f : formats) {
    const std::string name = "table3" + std::string(report_format_extension(f));
    if (f == ReportFormat::markdown) {
      write(name, gap_table_markdown(gaps));
    } else if (f == ReportFormat::csv) {
      std::string csv = "task,bigger_avg,smaller_avg,gap\n";
      for (const auto& g : gaps) {
        csv += fmt::format("{},{},{},{}\n", g.task, format_accuracy(g.gap.bigger_avg),
                           format_accuracy(g.gap.smaller_avg), format_accuracy(g.gap.gap));
      }
      write(name, csv);
    } else {
      json j = json::array();
      for (const auto& g : gaps) {
        j.push_back({{"task", g.task},
                     {"bigger_avg", g.gap.bigger_avg},
                     {"smaller_avg", g.gap.smaller_avg},
                     {"gap", g.gap.gap}});
      }
      write(name, j.dump(2) + "\n");
    }
  }
  write("figure3.json", json{{"subtask_accuracy", figure3}}.dump(2) + "\n");
  write("figure4.json", json{{"replacement", figure4}}.dump(2) + "\n");

  // Provenance.
  json manifest;
  manifest["config_sha256"] = sha256(resolved_config_text(cfg)).hex();
  const fs::path cdir = cache_dir(ctx);
  manifest["cache_entries"] = fs::exists(cdir) ? ResponseCache(cdir).size() : 0;
  json inputs = json::object();
  for (const char* sub : {"run", "bench", "replace", "eval"}) {
    for (const auto& f : jsonl_files(ctx.run_dir / sub)) {
      inputs[fs::relative(f, ctx.run_dir).generic_string()] = sha256(read_file(f)).hex();
    }
  }
  manifest["inputs"] = inputs;
  json outputs = json::object();
  std::sort(written.begin(), written.end());
  for (const auto& name : written) outputs[name] = sha256(read_file(out_dir / name)).hex();
  manifest["outputs"] = outputs;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  for (const auto& r : per_dataset) {
    auto acc = r.accuracy();
    say(ctx, fmt::format("report: dataset={} model={} strategy={}{} accuracy={} n={} "
                         "unevaluated={}",
                         r.dataset_id, r.model, r.strategy,
                         r.variant.empty() ? "" : " variant=" + r.variant,
                         acc ? format_accuracy(*acc) : "-", r.n_total, r.n_unevaluated));
  }
  for (const auto& g : gaps) {
    say(ctx, fmt::format("report: task={} bigger={} smaller={} gap={}", g.task,
                         format_accuracy(g.gap.bigger_avg), format_accuracy(g.gap.smaller_avg),
                         format_accuracy(g.gap.gap)));
  }
  st.items = written.size() + 1;
  return st;
}

// ---------------------------------------------------------------------------

AgreementResult agree(const fs::path& a, const fs::path& b) {
  auto key = [](const EvalOutcome& o) {
    return o.dataset_id + '\x1f' + o.model + '\x1f' + o.strategy + '\x1f' + o.variant + '\x1f' +
           o.record_id;
  };
  std::map<std::string, Verdict> right;
  for (const auto& o : read_outcomes(b)) right[key(o)] = o.verdict;
  std::vector<Verdict> va, vb;
  for (const auto& o : read_outcomes(a)) {
    auto it = right.find(key(o));
    if (it == right.end()) continue;
    va.push_back(o.verdict);
    vb.push_back(it->second);
  }
  if (va.empty()) throw EvalError("no outcomes pair up between the two files");
  AgreementResult r;
  r.paired = va.size();
  for (std::size_t i = 0; i < va.size(); ++i) {
    r.comparable += va[i] != Verdict::unevaluated && vb[i] != Verdict::unevaluated;
  }
  r.agreement = agreement(va, vb);
  return r;
}

}  // namespace tablelogic::pipeline
