#include "d3g_cli/cli.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "d3g/checkpoint.hpp"
#include "d3g/errors.hpp"
#include "d3g/io.hpp"
#include "d3g/log.hpp"
#include "d3g/relations.hpp"
#include "d3g/theory.hpp"
#include "d3g/version.hpp"
#include "d3g_cli/experiments.hpp"
#include "report.hpp"

namespace d3g::cli {

namespace {

namespace fs = std::filesystem;
using report::json;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct ConfigFlags {
  std::string file;
  std::optional<double> lambda, beta, lr, weight_decay;
  std::optional<std::size_t> epochs, batch_size, hidden_width;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> combine;
  bool balanced = false;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "JSON file with TrainConfig keys");
    app->add_option("--lambda", lambda, "consistency loss weight");
    app->add_option("--beta", beta, "fixed-relation share in [0, 1]");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch", batch_size, "mini-batch size");
    app->add_option("--hidden", hidden_width, "extractor width");
    app->add_option("--seed", seed, "first seed");
    app->add_option("--combine", combine, "head combination: logits | probabilities");
    app->add_flag("--balanced", balanced, "sample training domains uniformly");
  }

  TrainConfig build(TrainConfig base = {}) const {
    if (!file.empty()) base = train_config_from_json(read_config_text(file), base);
    if (lambda) base.lambda = *lambda;
    if (beta) base.beta = *beta;
    if (lr) base.learning_rate = *lr;
    if (weight_decay) base.weight_decay = *weight_decay;
    if (epochs) base.epochs = *epochs;
    if (batch_size) base.batch_size = *batch_size;
    if (hidden_width) base.hidden_width = *hidden_width;
    if (seed) base.seed = *seed;
    if (combine) base.combine = combine_space_from_string(*combine);
    if (balanced) base.domain_balanced_sampling = true;
    base.validate();
    return base;
  }

  static std::string read_config_text(const std::string& path) {
    try {
      return read_file(path);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
};

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t count) {
  if (count == 0) throw ConfigError("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < count; ++k) seeds.push_back(first + k);
  return seeds;
}

// ---------------------------------------------------------------------------
// Datasets on disk
// ---------------------------------------------------------------------------

const char* const kManifest = "dataset.json";

DomainDataset load_dataset_dir(const std::string& dir, const std::string& task_flag) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir + "' not found");
  LoadOptions opts;
  std::string task = task_flag;
  const std::string manifest = join(dir, kManifest);
  if (task.empty() && fs::exists(manifest)) {
    try {
      task = json::parse(read_file(manifest)).at("task").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("malformed " + manifest + ": " + e.what());
    }
  }
  if (!task.empty()) opts.task = task_from_string(task);
  DatasetPaths paths = dataset_paths_in(dir);
  if (!fs::exists(paths.split)) {
    paths.split.clear();
    opts.split_rule = SplitRule::kCycleById;
  }
  if (!fs::exists(paths.adjacency)) paths.adjacency.clear();
  return load_dataset(paths, opts);
}

DomainDataset generate(const std::string& kind, std::uint64_t seed) {
  if (kind == "dg15") return gen_dg15(seed);
  if (kind == "spatial") return gen_spatial_regression(seed);
  throw ConfigError("unknown dataset kind '" + kind + "' (expected dg15 or spatial)");
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
  std::string kind = "dg15";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenOptions& o, std::ostream& out) {
  const DomainDataset ds = generate(o.kind, o.seed);
  write_dataset(ds, dataset_paths_in(o.out));
  json manifest = report::header("gen");
  manifest["kind"] = o.kind;
  manifest["seed"] = o.seed;
  manifest["task"] = std::string(to_string(ds.task));
  manifest["fixed_relation"] = ds.adjacency ? "adjacency" : "angle";
  manifest["domains"] = ds.meta.size();
  manifest["examples"] = ds.examples.size();
  report::write_json(join(o.out, kManifest), manifest);
  out << "wrote " << ds.examples.size() << " examples over " << ds.meta.size()
      << " domains to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::string task;
  std::string method = "d3g";
  std::string out;
  std::size_t seeds = 3;
  std::string resume;
  ConfigFlags flags;
};

std::string metric_cell(const std::optional<MetricsReport>& r) {
  return r ? report::fixed(r->mean) : "-";
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const Method method = method_from_string(o.method);
  std::optional<Checkpoint> resume;
  TrainConfig config;
  if (!o.resume.empty()) {
    resume = load_checkpoint(o.resume);
    if (o.seeds != 1) throw ConfigError("--resume continues a single run; pass --seeds 1");
    if ((resume->model.kind == ModelKind::kErm) != (method == Method::kErm)) {
      throw ConfigError("--method does not match the checkpoint's model kind");
    }
    config = o.flags.build(resume->config);
  } else {
    config = o.flags.build();
  }
  const DomainDataset ds = load_dataset_dir(o.data, o.task);
  const auto seeds = resume ? std::vector<std::uint64_t>{config.seed}
                            : seed_list(config.seed, o.seeds);

  json run = report::header("train");
  run["run"] = {{"method", o.method}, {"data", o.data},
                {"seeds", seeds}, {"resume", o.resume}, {"config", report::to_json(config)}};
  json seed_reports = json::array();
  std::vector<double> valid_means, test_means;
  std::vector<std::vector<std::string>> rows = {
      {"seed", "selected_epoch", "valid", "test", "worst_test"}};

  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = config;
    cfg.seed = seed;
    SeedRun r;
    r.seed = seed;
    std::size_t epochs_before = 0;
    if (resume) {
      r.model = resume->model;
      epochs_before = resume->epochs_completed;
      const AdamState* state = resume->optimizer ? &*resume->optimizer : nullptr;
      r.train = method == Method::kErm ? train_erm(r.model, ds, cfg, state)
                                       : train(r.model, ds, cfg, state);
      r.valid = evaluate_split(r.model, ds, Split::kValid, cfg);
      r.test = evaluate_split(r.model, ds, Split::kTest, cfg);
    } else {
      r = run_seed(ds, method, cfg);
    }
    const std::string ckpt_name = "checkpoint_seed" + std::to_string(seed) + ".json";
    save_checkpoint(join(o.out, ckpt_name),
                    {r.model, cfg, epochs_before + cfg.epochs, r.train.optimizer});

    json entry = {{"seed", seed},
                  {"checkpoint", ckpt_name},
                  {"selected_epoch", r.train.selected_epoch},
                  {"history", report::to_json(r.train.history)}};
    if (r.valid) {
      entry["valid"] = report::to_json(*r.valid);
      valid_means.push_back(r.valid->mean);
    }
    if (r.test) {
      entry["test"] = report::to_json(*r.test);
      test_means.push_back(r.test->mean);
    }
    seed_reports.push_back(std::move(entry));
    rows.push_back({std::to_string(seed), std::to_string(r.train.selected_epoch),
                    metric_cell(r.valid), metric_cell(r.test),
                    r.test ? report::fixed(r.test->worst) : "-"});
  }

  run["seeds"] = seed_reports;
  json summary;
  const auto metric = std::string(to_string(metric_for(ds.task)));
  summary["metric"] = metric;
  if (!valid_means.empty()) summary["valid"] = report::to_json(mean_std(valid_means));
  if (!test_means.empty()) summary["test"] = report::to_json(mean_std(test_means));
  run["summary"] = summary;
  report::write_json(join(o.out, "report.json"), run);

  std::string text = "method " + o.method + ", metric " + metric + "\n" + report::table(rows);
  if (!valid_means.empty()) {
    const auto v = mean_std(valid_means);
    text += "valid mean " + report::fixed(v.mean) + " +- " + report::fixed(v.std) + "\n";
  }
  if (!test_means.empty()) {
    const auto t = mean_std(test_means);
    text += "test mean " + report::fixed(t.mean) + " +- " + report::fixed(t.std) + "\n";
  }
  write_file_atomic(join(o.out, "summary.txt"), text);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report::write_json(join(o.out, "timing.json"), {{"command", "train"}, {"seconds", seconds}});
  out << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string task;
  std::string split = "test";
  bool uniform = false;
  std::optional<double> beta;
  std::optional<std::string> combine;
  std::size_t rwft_epochs = 0;
  std::string out;
};

void check_compatible(const MultiHeadModel& m, const DomainDataset& ds) {
  if (m.task != ds.task || m.input_dim != ds.input_dim() || m.meta_dim != ds.meta_dim() ||
      m.output_dim != ds.output_dim()) {
    throw DataError("checkpoint does not match the dataset (task or feature/meta/output widths)");
  }
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  TrainConfig cfg = ckpt.config;
  if (o.beta) cfg.beta = *o.beta;
  if (o.combine) cfg.combine = combine_space_from_string(*o.combine);
  if (o.uniform) cfg.relation_mode = RelationMode::kUniform;
  cfg.validate();
  const Split split = split_from_string(o.split);
  const DomainDataset ds = load_dataset_dir(o.data, o.task);
  check_compatible(ckpt.model, ds);
  if (ds.domains(split).empty()) {
    throw DataError("split '" + o.split + "' has no domains in this dataset");
  }

  std::string mode;
  MetricsReport r;
  if (ckpt.model.kind == ModelKind::kErm) {
    if (o.uniform) throw ConfigError("--uniform needs a multi-head checkpoint");
    if (o.rwft_epochs > 0) {
      TrainConfig ft = cfg;
      ft.epochs = o.rwft_epochs;
      r = evaluate_rwft(ckpt.model, ds, split, ft);
      mode = "rw-ft";
    } else {
      r = evaluate(make_erm_predictor(ckpt.model, ds), ds, split);
      mode = "erm";
    }
  } else {
    if (o.rwft_epochs > 0) throw ConfigError("--rwft-epochs needs an ERM checkpoint");
    r = evaluate(make_default_predictor(ckpt.model, ds, cfg), ds, split);
    mode = o.uniform ? "uniform" : "relation";
  }

  json j = report::header("eval");
  j["run"] = {{"checkpoint", o.checkpoint}, {"data", o.data}, {"split", o.split},
              {"inference", mode}, {"rwft_epochs", o.rwft_epochs},
              {"config", report::to_json(cfg)}};
  j["report"] = report::to_json(r);
  if (!o.out.empty()) report::write_json(o.out, j);

  std::vector<std::vector<std::string>> rows = {{"domain", "count", std::string(to_string(r.metric))}};
  for (const auto& d : r.per_domain) {
    rows.push_back({std::to_string(d.domain), std::to_string(d.count), report::fixed(d.value)});
  }
  out << "inference " << mode << ", split " << o.split << "\n"
      << report::table(rows) << "mean " << report::fixed(r.mean) << ", worst "
      << report::fixed(r.worst) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateOptions {
  std::string data;
  std::string gen;
  std::string task;
  std::string out;
  std::size_t seeds = 3;
  ConfigFlags flags;
};

int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  if (o.data.empty() == o.gen.empty()) throw ConfigError("pass exactly one of --data or --gen");
  const TrainConfig config = o.flags.build();
  if (!o.gen.empty()) generate(o.gen, config.seed);  // rejects unknown kinds up front
  const auto seeds = seed_list(config.seed, o.seeds);

  DatasetFactory factory;
  if (!o.gen.empty()) {
    factory = [kind = o.gen](std::uint64_t seed) { return generate(kind, seed); };
  } else {
    auto ds = std::make_shared<DomainDataset>(load_dataset_dir(o.data, o.task));
    factory = [ds](std::uint64_t) { return *ds; };
  }
  const auto results = run_ablation(factory, config, seeds);

  json j = report::header("ablate");
  j["run"] = {{"data", o.data}, {"gen", o.gen}, {"seeds", seeds},
              {"config", report::to_json(config)}};
  json rows_json = json::array();
  std::vector<std::vector<std::string>> rows = {
      {"group", "variant", "beta", "lambda", "relations", "mean", "std"}};
  for (const auto& r : results) {
    json hist = json::array();
    for (const auto& h : r.histories) hist.push_back(report::to_json(h));
    rows_json.push_back({{"group", r.variant.group},
                         {"variant", r.variant.name},
                         {"beta", r.variant.beta},
                         {"lambda", r.variant.lambda},
                         {"relation_mode", std::string(to_string(r.variant.mode))},
                         {"per_seed", r.per_seed},
                         {"mean", r.stats.mean},
                         {"std", r.stats.std},
                         {"histories", hist}});
    rows.push_back({r.variant.group, r.variant.name, report::fixed(r.variant.beta, 2),
                    report::fixed(r.variant.lambda, 2), std::string(to_string(r.variant.mode)),
                    report::fixed(r.stats.mean), report::fixed(r.stats.std)});
  }
  j["rows"] = rows_json;
  report::write_json(join(o.out, "ablation.json"), j);
  const std::string text = report::table(rows);
  write_file_atomic(join(o.out, "ablation.txt"), text);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report::write_json(join(o.out, "timing.json"), {{"command", "ablate"}, {"seconds", seconds}});
  out << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// theory
// ---------------------------------------------------------------------------

struct TheoryOptions {
  std::string out;
  std::string config;
  theory::ScalingConfig scaling;
  bool select_c0 = false;
  std::size_t oracle_samples = 1000000;
  std::uint64_t oracle_seed = 0;
};

void apply_theory_file(const std::string& path, TheoryOptions& o) {
  json j;
  try {
    j = json::parse(ConfigFlags::read_config_text(path));
    auto& s = o.scaling;
    for (const auto& [key, value] : j.items()) {
      if (key == "dim") s.dim = value.get<std::size_t>();
      else if (key == "lipschitz") s.lipschitz = value.get<double>();
      else if (key == "samples") s.samples = value.get<std::size_t>();
      else if (key == "noise") s.noise = value.get<double>();
      else if (key == "grid") s.grid = value.get<std::vector<std::size_t>>();
      else if (key == "seeds") s.seeds = value.get<std::size_t>();
      else if (key == "first_seed") s.first_seed = value.get<std::uint64_t>();
      else if (key == "test_domains") s.test_domains = value.get<std::size_t>();
      else if (key == "c0") s.c0 = value.get<double>();
      else if (key == "n_eval") s.n_eval = value.get<std::size_t>();
      else if (key == "oracle_samples") o.oracle_samples = value.get<std::size_t>();
      else if (key == "oracle_seed") o.oracle_seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown theory config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad theory config: " + std::string(e.what()));
  }
}

int cmd_theory(TheoryOptions o, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  if (!o.config.empty()) apply_theory_file(o.config, o);
  auto& s = o.scaling;
  if (s.n_eval < 10000) throw ConfigError("n_eval must be at least 10000");
  if (o.oracle_samples < 100000) throw ConfigError("oracle samples must be at least 100000");
  if (s.test_domains == 0) throw ConfigError("test_domains must be at least 1");
  if (s.grid.empty()) throw ConfigError("grid must not be empty");
  json selection;
  if (o.select_c0) {
    const double candidates[] = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
    const std::uint64_t heldout_first = s.first_seed + 1000000;
    s.c0 = theory::select_bandwidth_constant(s, candidates, heldout_first, s.seeds);
    selection = {{"candidates", candidates}, {"heldout_first_seed", heldout_first},
                 {"heldout_seeds", s.seeds}, {"selected", s.c0}};
  }
  const auto rows = theory::scaling_experiment(s);
  const auto oracle = theory::averaging_oracle(o.oracle_samples, o.oracle_seed);

  const std::string csv = theory::scaling_csv(rows);
  write_file_atomic(join(o.out, "scaling.csv"), csv);
  json j = report::header("theory");
  j["run"] = {{"dim", s.dim}, {"lipschitz", s.lipschitz}, {"samples", s.samples},
              {"noise", s.noise}, {"grid", s.grid}, {"seeds", s.seeds},
              {"first_seed", s.first_seed}, {"test_domains", s.test_domains},
              {"c0", s.c0}, {"n_eval", s.n_eval}, {"oracle_samples", o.oracle_samples},
              {"oracle_seed", o.oracle_seed}};
  if (!selection.is_null()) j["c0_selection"] = selection;
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"N_tr", r.train_domains}, {"r", r.dim}, {"n", r.samples},
                     {"B", r.bandwidth}, {"mean_excess_risk", r.mean_excess_risk},
                     {"stderr", r.std_error}, {"seeds", r.seeds}});
  }
  j["scaling"] = table;
  j["averaging_oracle"] = {{"estimate", oracle.mean},
                           {"stderr", oracle.std_error},
                           {"target", theory::kAveragingOracleTarget},
                           {"samples", o.oracle_samples}};
  report::write_json(join(o.out, "theory.json"), j);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report::write_json(join(o.out, "timing.json"), {{"command", "theory"}, {"seconds", seconds}});
  out << csv << "averaging oracle " << report::fixed(oracle.mean, 5) << " +- "
      << report::fixed(oracle.std_error, 5) << " (target "
      << report::fixed(theory::kAveragingOracleTarget, 5) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// export-relations
// ---------------------------------------------------------------------------

struct ExportOptions {
  std::string data;
  std::string task;
  std::string checkpoint;
  double beta = 1.0;
  std::string which = "fused";
  std::string out;
};

int cmd_export(const ExportOptions& o, std::ostream& out) {
  if (o.which != "fused" && o.which != "fixed" && o.which != "learned") {
    throw ConfigError("--which must be fused, fixed or learned");
  }
  std::optional<Checkpoint> ckpt;
  if (!o.checkpoint.empty()) {
    ckpt = load_checkpoint(o.checkpoint);
    if (ckpt->model.kind != ModelKind::kMultiHead) {
      throw ConfigError("relation export needs a multi-head checkpoint");
    }
  } else if (o.which == "learned") {
    throw ConfigError("learned relations need --checkpoint");
  }
  const DomainDataset ds = load_dataset_dir(o.data, o.task);
  std::vector<DomainId> ids;
  for (const auto& [id, m] : ds.meta) ids.push_back(id);
  const RelationNet* net = ckpt ? &ckpt->model.params.relation : nullptr;
  if (ckpt && ckpt->model.meta_dim != ds.meta_dim()) {
    throw DataError("checkpoint meta width does not match the dataset");
  }
  const RelationMatrix rel = build_matrix(ids, ds.meta, ds.fixed_relation(), net, o.beta);
  const Matrix& m = o.which == "fixed" ? rel.fixed : o.which == "learned" ? rel.learned : rel.fused;
  write_relation_csv(o.out, ids, m);
  out << "wrote " << ids.size() << "x" << ids.size() << " " << o.which << " relation matrix to "
      << o.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain generalization with domain-specific heads and domain relations", "d3g"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--kind", gen.kind, "dg15 | spatial")
      ->check(CLI::IsMember({"dg15", "spatial"}));
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train D3G or ERM over seeds");
  train_cmd->add_option("--data", tr.data, "dataset directory")->required();
  train_cmd->add_option("--task", tr.task, "classification | regression (default: manifest)");
  train_cmd->add_option("--method", tr.method, "d3g | erm");
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--seeds", tr.seeds, "number of consecutive seeds");
  train_cmd->add_option("--resume", tr.resume, "continue from a checkpoint");
  tr.flags.attach(train_cmd);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--task", ev.task, "classification | regression (default: manifest)");
  eval_cmd->add_option("--split", ev.split, "train | valid | test");
  eval_cmd->add_flag("--uniform", ev.uniform, "average heads uniformly");
  eval_cmd->add_option("--beta", ev.beta, "override the fixed-relation share");
  eval_cmd->add_option("--combine", ev.combine, "logits | probabilities");
  eval_cmd->add_option("--rwft-epochs", ev.rwft_epochs,
                       "ERM checkpoints: relation-weighted fine-tuning epochs per domain");
  eval_cmd->add_option("--out", ev.out, "JSON report path");

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "relation and consistency ablations");
  ablate_cmd->add_option("--data", ab.data, "dataset directory");
  ablate_cmd->add_option("--gen", ab.gen, "regenerate per seed: dg15 | spatial");
  ablate_cmd->add_option("--task", ab.task, "classification | regression (default: manifest)");
  ablate_cmd->add_option("--out", ab.out, "output directory")->required();
  ablate_cmd->add_option("--seeds", ab.seeds, "number of consecutive seeds");
  ab.flags.attach(ablate_cmd);

  TheoryOptions th;
  auto* theory_cmd = app.add_subcommand("theory", "excess-risk scaling and averaging oracle");
  theory_cmd->add_option("--out", th.out, "output directory")->required();
  theory_cmd->add_option("--config", th.config, "JSON file with sweep keys");
  theory_cmd->add_option("--dim", th.scaling.dim, "latent dimension r");
  theory_cmd->add_option("--lipschitz", th.scaling.lipschitz, "Lipschitz constant G");
  theory_cmd->add_option("--samples", th.scaling.samples, "examples per training domain");
  theory_cmd->add_option("--noise", th.scaling.noise, "noise standard deviation");
  theory_cmd->add_option("--grid", th.scaling.grid, "training-domain counts")->delimiter(',');
  theory_cmd->add_option("--seeds", th.scaling.seeds, "worlds per grid point");
  theory_cmd->add_option("--first-seed", th.scaling.first_seed, "first world seed");
  theory_cmd->add_option("--test-domains", th.scaling.test_domains, "test domains per world");
  theory_cmd->add_option("--c0", th.scaling.c0, "bandwidth constant");
  theory_cmd->add_flag("--select-c0", th.select_c0, "pick c0 on held-out seeds");
  theory_cmd->add_option("--n-eval", th.scaling.n_eval, "Monte Carlo draws per test domain");
  theory_cmd->add_option("--oracle-samples", th.oracle_samples, "averaging oracle draws");
  theory_cmd->add_option("--oracle-seed", th.oracle_seed, "averaging oracle seed");

  ExportOptions ex;
  auto* export_cmd = app.add_subcommand("export-relations", "write a relation matrix");
  export_cmd->add_option("--data", ex.data, "dataset directory (meta-data source)")->required();
  export_cmd->add_option("--task", ex.task, "classification | regression (default: manifest)");
  export_cmd->add_option("--checkpoint", ex.checkpoint, "multi-head checkpoint");
  export_cmd->add_option("--beta", ex.beta, "fixed-relation share");
  export_cmd->add_option("--which", ex.which, "fused | fixed | learned");
  export_cmd->add_option("--out", ex.out, "output CSV")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto sink = set_warning_sink([&err](std::string_view msg) { err << "warning: " << msg << "\n"; });
  struct Restore {
    WarningSink previous;
    ~Restore() { set_warning_sink(std::move(previous)); }
  } restore{std::move(sink)};

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ab, out);
    if (theory_cmd->parsed()) return cmd_theory(th, out);
    if (export_cmd->parsed()) return cmd_export(ex, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace d3g::cli
