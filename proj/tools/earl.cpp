// earl: prepare datasets, train, evaluate, run ablations and budget sweeps,
// and count parameters.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "earl/dataset.hpp"
#include "earl/harness.hpp"
#include "earl/manifest.hpp"
#include "earl/synthetic.hpp"
#include "earl/trainer.hpp"

namespace fs = std::filesystem;
using namespace earl;

namespace {

std::string pub(const std::string& s) { return s + " [published setting]"; }
std::string impl(const std::string& s) { return s + " [implementation choice]"; }

// A relative input path that does not exist is looked up under $EARL_DATA_DIR.
fs::path resolve_input(const fs::path& p) {
  if (p.empty() || fs::exists(p) || p.is_absolute()) return p;
  if (const char* root = std::getenv("EARL_DATA_DIR"); root && *root) {
    const auto alt = fs::path(root) / p;
    if (fs::exists(alt)) return alt;
  }
  return p;
}

fs::path require_input(const fs::path& p, const char* what) {
  const auto r = resolve_input(p);
  if (!fs::exists(r)) {
    throw DataError(std::string(what) + " not found: " + p.string() +
                    (std::getenv("EARL_DATA_DIR") ? " (also looked under $EARL_DATA_DIR)" : ""));
  }
  return r;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

Split parse_split(const std::string& s) { return s == "valid" ? Split::kValid : Split::kTest; }

// key=value (INI/TOML style) defaults for the selected subcommand; anything
// given on the command line wins.
void apply_config_file(const fs::path& path, CLI::App& app, CLI::App& sub) {
  std::ifstream in(require_input(path, "config file"));
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub.get_name())) continue;
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt || key == "config" || key == "help") throw ConfigError(path.string() + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// Training options shared by train / ablate / sweep

struct TrainOptions {
  std::optional<std::size_t> dim;
  std::size_t k = 10;
  double reserved_fraction = 0.10;
  std::size_t reserved_count = 0;
  std::optional<std::uint64_t> index_seed;
  std::size_t layers = 2;
  double lr = 0.001;
  std::size_t batch = 1024;
  std::size_t negatives = 256;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::size_t steps = 100000;
  std::uint64_t seed = 0;
  std::size_t max_neighbors = 0;
  std::size_t log_every = 1;
  bool no_reserved = false, no_conrel = false, no_knresent = false, no_mulhop = false;
  bool knresent = false;
};

void add_model_options(CLI::App* c, TrainOptions& o, bool with_toggles) {
  c->add_option("--dim", o.dim,
                pub("complex embedding dimension; default per dataset: 150 FB15k-237, 200 WN18RR, 100 CoDEx-L and "
                    "YAGO3-10, 150 otherwise"))
      ->check(CLI::PositiveNumber);
  c->add_option("--k", o.k, pub("nearest reserved entities per entity"))->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--reserved-fraction", o.reserved_fraction, pub("fraction of entities kept as reserved"))
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--reserved-count", o.reserved_count, impl("explicit reserved count; overrides the fraction"));
  c->add_option("--layers", o.layers, pub("GNN layers"))->capture_default_str();
  if (with_toggles) {
    c->add_flag("--no-reserved", o.no_reserved, pub("ablation: drop reserved entities (implies --no-knresent)"));
    c->add_flag("--no-conrel", o.no_conrel, pub("ablation: drop ConRel encoding"));
    c->add_flag("--no-knresent", o.no_knresent, pub("ablation: drop kNResEnt encoding"));
    c->add_flag("--no-mulhop", o.no_mulhop, pub("ablation: drop multi-hop GNN layers"));
    c->add_flag("--knresent", o.knresent, impl("insist on kNResEnt; conflicts with --no-reserved"));
  }
}

void add_train_options(CLI::App* c, TrainOptions& o, bool with_toggles) {
  add_model_options(c, o, with_toggles);
  c->add_option("--index-seed", o.index_seed, impl("reserved-set seed; default is the bundle's"));
  c->add_option("--lr", o.lr, pub("Adam learning rate"))->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--batch-size", o.batch, pub("positive triples per step"))->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--negatives", o.negatives, pub("negative samples per positive"))
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c->add_option("--gamma", o.gamma, pub("margin; default 15 for YAGO3-10 and 10 otherwise"))->check(CLI::PositiveNumber);
  c->add_option("--alpha", o.alpha, impl("self-adversarial temperature; default 1.0 (unpublished)"))
      ->check(CLI::NonNegativeNumber);
  c->add_option("--steps", o.steps, impl("total optimization steps"))->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", o.seed, impl("training seed"))->capture_default_str();
  c->add_option("--max-neighbors", o.max_neighbors, impl("per-entity neighbour cap during training; 0 = all"))
      ->capture_default_str();
  c->add_option("--log-every", o.log_every, impl("steps between learning-curve rows"))->capture_default_str();
}

AblationFlags resolve_flags(const TrainOptions& o) {
  if (o.no_reserved && o.knresent) {
    throw ConfigError("--no-reserved conflicts with --knresent: kNResEnt encodes entities through reserved entities");
  }
  if (o.knresent && o.no_knresent) throw ConfigError("--knresent conflicts with --no-knresent");
  AblationFlags f;
  f.use_reserved = !o.no_reserved;
  f.use_conrel = !o.no_conrel;
  f.use_knresent = !o.no_knresent && !o.no_reserved;
  f.use_mulhop = !o.no_mulhop;
  f.validate();
  return f;
}

TrainConfig make_config(const TrainOptions& o, const Dataset& ds) {
  TrainConfig c;
  c.dim = o.dim.value_or(default_dim(ds.name));
  c.k = o.k;
  c.reserved_fraction = o.reserved_fraction;
  c.reserved_count = o.reserved_count;
  c.index_seed = o.index_seed;
  c.layers = o.layers;
  c.learning_rate = o.lr;
  c.batch_size = o.batch;
  c.n_negatives = o.negatives;
  c.gamma = o.gamma.value_or(default_gamma(ds.name));
  c.alpha = o.alpha.value_or(1.0);
  c.alpha_is_default = !o.alpha.has_value();
  c.max_steps = o.steps;
  c.seed = o.seed;
  c.flags = resolve_flags(o);
  c.max_neighbors = o.max_neighbors;
  c.log_every = o.log_every;
  c.validate();
  return c;
}

Dataset load_bundle(const fs::path& p) { return bundle::load(require_input(p, "bundle")); }

RunManifest start_manifest(const std::string& command, int argc, char** argv) {
  RunManifest m;
  m.command = command;
  m.argv.assign(argv, argv + argc);
  return m;
}

void progress(const LogRow& r, std::size_t total) {
  const auto every = std::max<std::size_t>(1, total / 20);
  if (r.step % every == 0 || r.step == total) {
    std::cerr << "step " << r.step << "/" << total << "  loss " << std::setprecision(6) << r.loss << "  "
              << std::setprecision(1) << std::fixed << r.seconds << "s" << std::defaultfloat << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

struct PrepareOptions {
  fs::path train, valid, test, out;
  std::string dataset, name;
  std::size_t k = 10;
  double reserved_fraction = 0.10;
  std::size_t reserved_count = 0;
  std::uint64_t seed = 0;
  std::size_t planted = 0;
};

fs::path split_file(const fs::path& dir, const char* split) {
  for (const char* ext : {".txt", ".tsv"}) {
    auto p = dir / (std::string(split) + ext);
    if (fs::exists(p)) return p;
  }
  throw DataError("no " + std::string(split) + ".txt or " + split + ".tsv in " + dir.string());
}

int cmd_prepare(const PrepareOptions& o, int argc, char** argv) {
  auto manifest = start_manifest("prepare", argc, argv);
  Dataset ds;
  std::string name = o.name;
  bundle::Sources sources;
  bool have_sources = false;
  if (o.planted > 0) {
    if (!o.train.empty() || !o.dataset.empty()) throw ConfigError("--planted generates data; drop --train/--dataset");
    // Rings of 20 positions, so any multiple of 20 works with 8 relations.
    if (o.planted % 20 != 0) throw ConfigError("--planted needs a multiple of 20 entities");
    PlantedGraphSpec spec;
    spec.entities = o.planted;
    spec.communities = o.planted / 20;
    spec.seed = o.seed;
    if (name.empty()) name = "planted";
    const auto kg = planted_graph(spec);
    const auto rc = o.reserved_count ? o.reserved_count : reserved_count_for(kg.num_entities(), o.reserved_fraction);
    ds = prepare_dataset(kg, name, o.k, rc, o.seed);
  } else {
    if (!o.dataset.empty()) {
      if (!o.train.empty()) throw ConfigError("give either --dataset or --train/--valid/--test");
      const auto dir = require_input(o.dataset, "dataset directory");
      sources = {split_file(dir, "train"), split_file(dir, "valid"), split_file(dir, "test")};
      if (name.empty()) name = canonical_dataset_name(fs::path(o.dataset).filename().string());
    } else {
      if (o.train.empty() || o.valid.empty() || o.test.empty()) {
        throw ConfigError("prepare needs --train, --valid and --test (or --dataset DIR, or --planted N)");
      }
      sources = {require_input(o.train, "train file"), require_input(o.valid, "valid file"),
                 require_input(o.test, "test file")};
      if (name.empty()) name = canonical_dataset_name(sources.train.parent_path().filename().string());
    }
    have_sources = true;
    for (const auto* p : {&sources.train, &sources.valid, &sources.test}) manifest.add_dataset(*p);
    auto kg = KnowledgeGraph::load(sources.train, sources.valid, sources.test);
    const auto rc = o.reserved_count ? o.reserved_count : reserved_count_for(kg.num_entities(), o.reserved_fraction);
    ds = prepare_dataset(std::move(kg), name, o.k, rc, o.seed);
  }
  manifest.seed = o.seed;
  manifest.config = {{"k", o.k}, {"reserved_fraction", o.reserved_fraction}, {"reserved_count", ds.reserved.size()},
                     {"seed", o.seed}, {"name", ds.name}};
  bundle::save(o.out, ds, have_sources ? &sources : nullptr);
  manifest.add_output(o.out, "bundle");
  manifest.finish(o.out / "run-manifest.json");

  auto stats = bundle::stats_json(ds);
  stats["reserved_count"] = ds.reserved.size();
  stats["k"] = ds.requested_k;
  if (auto known = known_dataset(ds.name)) {
    stats["published"] = {{"entities", known->entities}, {"relations", known->relations}, {"train", known->train},
                          {"valid", known->valid}, {"test", known->test}};
  }
  std::cout << stats.dump(2) << '\n';
  return 0;
}

struct TrainCmd {
  fs::path bundle, out, resume;
  std::string dtype = "float64";
  std::string eval_split = "valid";
  std::size_t checkpoint_every = 0, eval_every = 0;
};

int cmd_train(const TrainCmd& tc, const TrainOptions& o, CLI::App& sub, int argc, char** argv) {
  auto manifest = start_manifest("train", argc, argv);
  const auto bundle_path = require_input(tc.bundle, "bundle");
  auto ds = bundle::load(bundle_path);
  manifest.add_dataset(bundle_path);
  const Dtype dtype = tc.dtype == "float32" ? Dtype::kFloat32 : Dtype::kFloat64;

  TrainConfig cfg;
  std::optional<Checkpoint> ck;
  if (!tc.resume.empty()) {
    for (const char* fixed : {"--dim", "--k", "--reserved-fraction", "--reserved-count", "--layers", "--no-reserved",
                              "--no-conrel", "--no-knresent", "--no-mulhop", "--knresent", "--index-seed", "--lr",
                              "--batch-size", "--negatives", "--gamma", "--alpha", "--seed", "--max-neighbors"}) {
      if (sub.get_option(fixed)->count() > 0) {
        throw ConfigError(std::string(fixed) + " cannot change when resuming; the checkpoint's config is used");
      }
    }
    ck = load_checkpoint(require_input(tc.resume, "checkpoint"));
    if (sub.get_option("--steps")->count() > 0) ck->config.max_steps = o.steps;
    if (sub.get_option("--log-every")->count() > 0) ck->config.log_every = o.log_every;
    cfg = ck->config;
  } else {
    cfg = make_config(o, ds);
  }
  cfg.checkpoint_every = tc.checkpoint_every;
  cfg.eval_every = tc.eval_every;
  resolve_index(ds, cfg);
  std::optional<Trainer> trainer;
  if (ck) {
    ck->config = cfg;
    trainer.emplace(ds, std::move(*ck));
  } else {
    trainer.emplace(ds, cfg);
  }
  manifest.config = to_json(cfg);
  manifest.seed = cfg.seed;

  const auto manifest_path = tc.out / "manifest.json";
  const auto ck_path = tc.out / "checkpoint";
  manifest.write(manifest_path);

  std::vector<std::string> eval_rows;
  const auto split = parse_split(tc.eval_split == "none" ? "valid" : tc.eval_split);
  Trainer::Hooks hooks;
  hooks.on_log = [&](const LogRow& r) { progress(r, cfg.max_steps); };
  hooks.on_checkpoint = [&](std::size_t) {
    save_checkpoint(ck_path, trainer->checkpoint(manifest_path.string()), dtype);
  };
  hooks.on_eval = [&](std::size_t step) {
    const auto rep = evaluate(ds, trainer->params(), split);
    std::ostringstream os;
    os << step << ',' << rep.mrr << ',' << rep.hits.at(1) << ',' << rep.hits.at(3) << ',' << rep.hits.at(10);
    eval_rows.push_back(os.str());
  };

  try {
    trainer->run(hooks);
  } catch (const NumericalError&) {
    // The failed step never touched the parameters, so this is the last good state.
    const auto last_good = tc.out / "checkpoint-last-good";
    save_checkpoint(last_good, trainer->checkpoint(manifest_path.string()), dtype);
    write_log_csv(tc.out / "log.csv", trainer->log());
    manifest.add_output(last_good, "checkpoint");
    manifest.add_output(tc.out / "log.csv", "learning-curve");
    manifest.finish(manifest_path, "numerical-failure");
    throw;
  }

  save_checkpoint(ck_path, trainer->checkpoint(manifest_path.string()), dtype);
  manifest.add_output(ck_path, "checkpoint");
  write_log_csv(tc.out / "log.csv", trainer->log());
  manifest.add_output(tc.out / "log.csv", "learning-curve");
  if (!eval_rows.empty()) {
    std::string csv = "step,mrr,hits1,hits3,hits10\n";
    for (const auto& r : eval_rows) csv += r + "\n";
    write_text(tc.out / "eval_curve.csv", csv);
    manifest.add_output(tc.out / "eval_curve.csv", "eval-curve");
  }
  if (tc.eval_split != "none") {
    auto rep = evaluate(ds, trainer->params(), split);
    rep.config = to_json(trainer->config());
    auto j = rep.to_json();
    j["run_manifest"] = manifest_path.string();
    write_json(tc.out / "report.json", j);
    manifest.add_output(tc.out / "report.json", "report");
    std::cout << j.dump(2) << '\n';
  }
  manifest.finish(manifest_path);
  return 0;
}

struct EvalCmd {
  fs::path bundle, checkpoint, out;
  std::string split = "test";
  bool csv = false;
};

int cmd_eval(const EvalCmd& ec, int argc, char** argv) {
  auto manifest = start_manifest("eval", argc, argv);
  const auto bundle_path = require_input(ec.bundle, "bundle");
  auto ds = bundle::load(bundle_path);
  auto ck = load_checkpoint(require_input(ec.checkpoint, "checkpoint"));
  resolve_index(ds, ck.config);
  auto rep = evaluate(ds, ck, parse_split(ec.split));
  auto j = rep.to_json();
  j["checkpoint"] = ec.checkpoint.string();
  if (!ec.out.empty()) {
    manifest.add_dataset(bundle_path);
    manifest.config = to_json(ck.config);
    manifest.seed = ck.config.seed;
    const auto mpath = ec.out / "manifest.json";
    j["run_manifest"] = mpath.string();
    write_json(ec.out / "report.json", j);
    write_text(ec.out / "report.csv", EvalReport::csv_header() + "\n" +
                                          rep.csv_row("eval", ck.config.dim, ck.params.config.num_reserved) + "\n");
    manifest.add_output(ec.out / "report.json", "report");
    manifest.add_output(ec.out / "report.csv", "report-csv");
    manifest.finish(mpath);
  }
  if (ec.csv) {
    std::cout << EvalReport::csv_header() << '\n' << rep.csv_row("eval", ck.config.dim, ck.params.config.num_reserved) << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return 0;
}

struct AblateCmd {
  fs::path bundle, out;
  std::string split = "test";
};

int cmd_ablate(const AblateCmd& ac, const TrainOptions& o, int argc, char** argv) {
  auto manifest = start_manifest("ablate", argc, argv);
  const auto bundle_path = require_input(ac.bundle, "bundle");
  auto ds = bundle::load(bundle_path);
  manifest.add_dataset(bundle_path);
  const auto base = make_config(o, ds);
  manifest.config = to_json(base);
  manifest.seed = base.seed;
  const auto mpath = ac.out / "manifest.json";
  manifest.write(mpath);

  std::string csv = EvalReport::csv_header() + "\n";
  const auto rows = run_ablations(ds, base, parse_split(ac.split), [&](const AblationResult& r) {
    std::cerr << ablation_label(r.which) << ": MRR " << r.report.mrr << '\n';
    std::string slug = ablation_label(r.which);
    for (auto& ch : slug) {
      if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
    }
    auto j = r.report.to_json();
    j["label"] = ablation_label(r.which);
    j["run_manifest"] = mpath.string();
    write_json(ac.out / ("report_" + slug + ".json"), j);
    write_log_csv(ac.out / ("log_" + slug + ".csv"), r.log);
    manifest.add_output(ac.out / ("report_" + slug + ".json"), "report");
    manifest.add_output(ac.out / ("log_" + slug + ".csv"), "learning-curve");
    csv += r.report.csv_row(ablation_label(r.which), r.config.dim,
                            r.config.flags.use_reserved ? ds.reserved.size() : 0) + "\n";
  });
  const auto table = format_ablation_table(rows);
  write_text(ac.out / "ablation.txt", table);
  write_text(ac.out / "ablation.csv", csv);
  manifest.add_output(ac.out / "ablation.txt", "table");
  manifest.add_output(ac.out / "ablation.csv", "table-csv");
  manifest.finish(mpath);
  std::cout << table;
  return 0;
}

struct SweepCmd {
  fs::path bundle, out;
  std::size_t budget = 0;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> reserved;
  std::string split = "test";
};

int cmd_sweep(const SweepCmd& sc, const TrainOptions& o, int argc, char** argv) {
  auto manifest = start_manifest("sweep", argc, argv);
  const auto bundle_path = require_input(sc.bundle, "bundle");
  auto ds = bundle::load(bundle_path);
  manifest.add_dataset(bundle_path);
  const auto base = make_config(o, ds);
  if (!sc.reserved.empty() && sc.reserved.size() != sc.dims.size()) {
    throw ConfigError("--reserved needs one count per --dims entry");
  }
  std::vector<GridPoint> grid;
  for (std::size_t i = 0; i < sc.dims.size(); ++i) {
    const auto r = sc.reserved.empty() ? fit_reserved(base, ds.kg.num_relations(), sc.dims[i], sc.budget)
                                       : sc.reserved[i];
    grid.push_back({sc.dims[i], r});
  }
  check_budget(base, ds.kg.num_relations(), ds.kg.num_entities(), grid, sc.budget);
  manifest.config = to_json(base);
  manifest.config["budget"] = sc.budget;
  manifest.seed = base.seed;
  const auto mpath = sc.out / "manifest.json";
  manifest.write(mpath);

  const auto rows = budget_sweep(ds, base, sc.budget, grid, parse_split(sc.split), [](const SweepRow& r) {
    std::cerr << "dim " << r.point.dim << ", reserved " << r.point.reserved << ": MRR " << r.report.mrr << '\n';
  });
  const auto csv = sweep_csv(rows);
  write_text(sc.out / "sweep.csv", csv);
  manifest.add_output(sc.out / "sweep.csv", "budget-sweep");
  manifest.finish(mpath);
  std::cout << csv;
  return 0;
}

struct CountCmd {
  std::string dataset;
  fs::path bundle;
  std::size_t entities = 0, relations = 0;
  bool rotate = false;
  bool json = false;
};

int cmd_count(const CountCmd& cc, const TrainOptions& o) {
  std::string name = "custom";
  std::size_t ne = cc.entities, nr = cc.relations;
  if (!cc.dataset.empty()) {
    const auto d = known_dataset(cc.dataset);
    if (!d) throw ConfigError("unknown dataset preset '" + cc.dataset + "' (fb15k237, wn18rr, codex-l, yago3-10)");
    name = d->name;
    ne = d->entities;
    nr = d->relations;
  } else if (!cc.bundle.empty()) {
    const auto ds = load_bundle(cc.bundle);
    name = ds.name;
    ne = ds.kg.num_entities();
    nr = ds.kg.num_relations();
  }
  if (ne == 0 || nr == 0) throw ConfigError("count-params needs --dataset, --bundle, or --entities and --relations");

  const auto dim = o.dim.value_or(default_dim(name));
  ParamBreakdown b;
  std::size_t reserved = 0;
  if (cc.rotate) {
    b = count_params_rotate(ne, nr, dim);
  } else {
    TrainConfig c;
    c.dim = dim;
    c.layers = o.layers;
    c.flags = resolve_flags(o);
    c.reserved_fraction = o.reserved_fraction;
    c.reserved_count = o.reserved_count;
    reserved = c.resolved_reserved_count(ne);
    b = count_params(c.model_config(nr, reserved));
  }

  if (cc.json) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : b.items) items.push_back({{"name", it.name}, {"count", it.count}, {"formula", it.formula}});
    std::cout << nlohmann::json{{"dataset", name}, {"entities", ne}, {"relations", nr}, {"dim", dim},
                                {"width", 2 * dim}, {"reserved", reserved}, {"model", cc.rotate ? "rotate" : "earl"},
                                {"items", items}, {"total", b.total}}
                     .dump(2)
              << '\n';
    return 0;
  }
  std::cout << (cc.rotate ? "RotatE" : "EARL") << " on " << name << ": |E| = " << ne << ", |R| = " << nr
            << ", dim = " << dim << ", D = " << 2 * dim;
  if (!cc.rotate) std::cout << ", |Eres| = " << reserved;
  std::cout << '\n';
  for (const auto& it : b.items) {
    std::cout << "  " << std::left << std::setw(24) << it.name << std::setw(26) << it.formula << std::right
              << std::setw(12) << it.count << '\n';
  }
  std::cout << "  " << std::left << std::setw(50) << "total" << std::right << std::setw(12) << b.total << "  ("
            << std::fixed << std::setprecision(3) << static_cast<double>(b.total) / 1e6 << "M)\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Entity-agnostic knowledge graph embedding: prepare, train, evaluate, ablate, sweep."};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  unsigned n_threads = threads();
  fs::path config_path;
  app.add_option("--threads", n_threads, impl("cap on worker threads; default = hardware threads"))
      ->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, impl("key=value file of flag defaults; command-line flags win"));

  PrepareOptions po;
  auto* prep = app.add_subcommand("prepare", "Build a dataset bundle (vocabularies, splits, feature and kNN caches)");
  prep->add_option("--train", po.train, impl("training triples, tab-separated head/relation/tail"));
  prep->add_option("--valid", po.valid, impl("validation triples"));
  prep->add_option("--test", po.test, impl("test triples"));
  prep->add_option("--dataset", po.dataset, impl("directory holding train/valid/test .txt or .tsv"));
  prep->add_option("--planted", po.planted, impl("generate a planted synthetic graph with this many entities (multiple of 20)"));
  prep->add_option("--out", po.out, impl("bundle directory to write"))->required();
  prep->add_option("--name", po.name, impl("dataset name; selects per-dataset defaults"));
  prep->add_option("--k", po.k, pub("nearest reserved entities per entity"))->capture_default_str();
  prep->add_option("--reserved-fraction", po.reserved_fraction, pub("fraction of entities kept as reserved"))
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  prep->add_option("--reserved-count", po.reserved_count, impl("explicit reserved count; overrides the fraction"));
  prep->add_option("--seed", po.seed, impl("reserved-set seed"))->capture_default_str();

  TrainOptions to;
  TrainCmd tc;
  auto* train = app.add_subcommand("train", "Train a model on a bundle");
  train->add_option("--bundle", tc.bundle, impl("prepared bundle directory"))->required();
  train->add_option("--out", tc.out, impl("run directory (checkpoint, log.csv, report.json, manifest.json)"))->required();
  add_train_options(train, to, true);
  train->add_option("--resume", tc.resume, impl("continue from a checkpoint directory"));
  train->add_option("--checkpoint-every", tc.checkpoint_every, impl("steps between checkpoints; 0 = end only"))
      ->capture_default_str();
  train->add_option("--eval-every", tc.eval_every, impl("steps between evaluations written to eval_curve.csv"))
      ->capture_default_str();
  train->add_option("--eval", tc.eval_split, impl("split for the final report"))
      ->capture_default_str()
      ->check(CLI::IsMember({"valid", "test", "none"}));
  train->add_option("--dtype", tc.dtype, impl("checkpoint payload type; float64 resumes bit-exactly"))
      ->capture_default_str()
      ->check(CLI::IsMember({"float64", "float32"}));

  EvalCmd ec;
  auto* eval = app.add_subcommand("eval", "Filtered MRR / Hits@k of a checkpoint");
  eval->add_option("--bundle", ec.bundle, impl("prepared bundle directory"))->required();
  eval->add_option("--checkpoint", ec.checkpoint, impl("checkpoint directory"))->required();
  eval->add_option("--split", ec.split, pub("evaluation split"))->capture_default_str()->check(CLI::IsMember({"valid", "test"}));
  eval->add_option("--out", ec.out, impl("directory for report.json, report.csv and manifest.json"));
  eval->add_flag("--csv", ec.csv, impl("print a CSV row instead of JSON"));

  TrainOptions ao;
  AblateCmd ac;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the full model and every ablation");
  ablate->add_option("--bundle", ac.bundle, impl("prepared bundle directory"))->required();
  ablate->add_option("--out", ac.out, impl("output directory"))->required();
  ablate->add_option("--split", ac.split, pub("evaluation split"))->capture_default_str()->check(CLI::IsMember({"valid", "test"}));
  add_train_options(ablate, ao, false);

  TrainOptions so;
  SweepCmd sc;
  auto* sweep = app.add_subcommand("sweep", "Fixed parameter budget sweep over (dim, reserved count)");
  sweep->add_option("--bundle", sc.bundle, impl("prepared bundle directory"))->required();
  sweep->add_option("--out", sc.out, impl("output directory"))->required();
  sweep->add_option("--budget", sc.budget, pub("parameter budget, e.g. 1000000 for FB15k-237"))
      ->required()
      ->check(CLI::PositiveNumber);
  sweep->add_option("--dims", sc.dims, pub("dimensions to try"))->required()->delimiter(',');
  sweep->add_option("--reserved", sc.reserved, impl("reserved count per dim; default fits the budget"))->delimiter(',');
  sweep->add_option("--split", sc.split, pub("evaluation split"))->capture_default_str()->check(CLI::IsMember({"valid", "test"}));
  add_train_options(sweep, so, false);

  TrainOptions co;
  CountCmd cc;
  auto* count = app.add_subcommand("count-params", "Closed-form parameter count with per-tensor breakdown");
  count->add_option("--dataset", cc.dataset, pub("preset: fb15k237, wn18rr, codex-l, yago3-10"));
  count->add_option("--bundle", cc.bundle, impl("take entity and relation counts from a bundle"));
  count->add_option("--entities", cc.entities, impl("entity count"));
  count->add_option("--relations", cc.relations, impl("relation count"));
  count->add_flag("--rotate", cc.rotate, pub("count plain RotatE instead"));
  count->add_flag("--json", cc.json, impl("machine-readable output"));
  add_model_options(count, co, true);

  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(config_path, app, *sub);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  set_threads(n_threads);

  if (*prep) return cmd_prepare(po, argc, argv);
  if (*train) return cmd_train(tc, to, *train, argc, argv);
  if (*eval) return cmd_eval(ec, argc, argv);
  if (*ablate) return cmd_ablate(ac, ao, argc, argv);
  if (*sweep) return cmd_sweep(sc, so, argc, argv);
  return cmd_count(cc, co);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "earl: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "earl: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "earl: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "earl: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "earl: malformed JSON: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "earl: " << e.what() << '\n';
    return 1;
  }
}
