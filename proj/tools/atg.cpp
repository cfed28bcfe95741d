// Command-line front end: verify, build, generate, sweep_c, export.
#include <atg/generation.hpp>
#include <atg/graph.hpp>
#include <atg/metrics.hpp>
#include <atg/policy.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace atg;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_file(const std::string& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SplitOptions {
  std::string db = "data/prop.mm";
  std::string preset = "wb";
  std::size_t count = 0;
  int k_train = -1, k_test = -1;
  std::uint64_t split_seed = 1;

  void add(CLI::App& app) {
    app.add_option("--db", db, "Metamath database")->check(CLI::ExistingFile);
    app.add_option("--preset", preset, "wb | wif | minimp");
    app.add_option("--count", count, "Override the theorem universe size");
    app.add_option("--k-train", k_train, "Override the training depth threshold");
    app.add_option("--k-test", k_test, "Override the test depth threshold");
    app.add_option("--split-seed", split_seed, "Seed of the library/problem split");
  }

  Preset resolve() const {
    Preset p = preset_or_throw();
    if (count) p.count = count;
    if (k_train >= 0) p.k_train = k_train;
    if (k_test >= 0) p.k_test = k_test;
    if (count || k_train >= 0 || k_test >= 0) {
      p.train_library = p.train_problems = p.test_library = p.test_problems = 0;
      p.name = preset + "-custom";
    }
    return p;
  }

 private:
  Preset preset_or_throw() const {
    try {
      return atg::preset(preset);
    } catch (const SplitError& e) {
      throw UsageError(e.what());
    }
  }
};

struct Splits {
  Preset preset;
  RefGraph graph;
  SplitManifest train, test;
};

Splits make(const Database& db, const SplitOptions& o) {
  Splits s;
  s.preset = o.resolve();
  s.graph = build_graph(db, first_theorems(db, s.preset.count));
  std::tie(s.train, s.test) = make_splits(db, s.graph, s.preset, o.split_seed);
  return s;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& path, const std::vector<std::string>& labels) {
  Database db;
  try {
    db = load_database(path);
  } catch (const std::exception& e) {
    ojson j;
    j["label"] = nullptr;
    j["ok"] = false;
    j["steps"] = 0;
    j["error"] = e.what();
    std::cout << j.dump() << '\n';
    return 1;
  }
  std::vector<std::string> todo = labels;
  if (todo.empty())
    for (int f : db.provable_ids()) todo.push_back(db.frames[static_cast<std::size_t>(f)].label);
  std::size_t ok = 0;
  std::string first_failure;
  for (auto& l : todo) {
    ojson j;
    j["label"] = l;
    try {
      auto t = verify_proof(db, l);
      j["ok"] = true;
      j["steps"] = t.steps();
      ++ok;
    } catch (const std::exception& e) {
      j["ok"] = false;
      j["steps"] = 0;
      j["error"] = e.what();
      if (first_failure.empty()) first_failure = l;
    }
    std::cout << j.dump() << '\n';
  }
  ojson s;
  s["verified"] = ok;
  s["total"] = todo.size();
  s["ok"] = ok == todo.size();
  if (!first_failure.empty()) s["first_failure"] = first_failure;
  std::cout << s.dump() << '\n';
  return ok == todo.size() ? 0 : 1;
}

// ---------------------------------------------------------------- build

int cmd_build(const SplitOptions& o, const std::string& out) {
  Database db = load_database(o.db);
  Splits s = make(db, o);
  fs::create_directories(out);
  write_file(fs::path(out) / "train.json", s.train.to_json() + "\n");
  write_file(fs::path(out) / "test.json", s.test.to_json() + "\n");
  auto tr = split_stats(s.train, db, s.graph), te = split_stats(s.test, db, s.graph);
  write_file(fs::path(out) / "stats.csv", tr.to_csv_rows() + te.to_csv_rows());
  ojson j;
  j["dataset"] = s.preset.name;
  j["train"] = nlohmann::json::parse(tr.to_json());
  j["test"] = nlohmann::json::parse(te.to_json());
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  SplitOptions split;
  std::string method = "mcts";
  std::string expand = "all";
  std::string out = "out";
  std::string model, external;
  GenerationConfig cfg;
  TrainerConfig trainer;

  void add(CLI::App& app) {
    split.add(app);
    app.add_option("--method", method, "random | mcts | mcts_pvn | bpe");
    app.add_option("--seed", cfg.seed, "Generation seed");
    app.add_option("--episodes", cfg.episodes);
    app.add_option("--generations", cfg.generations, "Generations per episode");
    app.add_option("--simulations", cfg.simulations, "Simulations per move");
    app.add_option("--max-steps", cfg.max_steps);
    app.add_option("--c-puct", cfg.c_puct);
    app.add_option("--gamma", cfg.gamma);
    app.add_option("--expand", expand, "best | all")->check(CLI::IsMember({"best", "all"}));
    app.add_option("--library-sample", cfg.library_sample);
    app.add_option("--hypothesis-sample", cfg.hypothesis_sample);
    app.add_option("--threads", cfg.threads, "Worker threads (capped by ATG_THREADS)");
    app.add_option("--epochs", trainer.epochs, "Training epochs per self-play round");
    app.add_option("--batch", trainer.batch);
    app.add_option("--lr", trainer.lr);
    app.add_option("--model", model, "Initial policy checkpoint for mcts_pvn");
    app.add_option("--external-model", external, "Command serving the policy over JSON lines");
    app.add_option("--out", out, "Output directory");
  }
};

struct GenerateResult {
  Report report;
  ojson metrics;
};

GenerateResult run_generate(const GenerateOptions& o, const fs::path& out) {
  Database db = load_database(o.split.db);
  Splits s = make(db, o.split);
  GenerationConfig cfg = o.cfg;
  cfg.expand_all = o.expand == "all";
  cfg.gamma = o.cfg.gamma;
  TrainerConfig tcfg = o.trainer;
  tcfg.gamma = cfg.gamma;
  tcfg.seed = cfg.seed;
  fs::create_directories(out);

  GeneratedLibrary bpe_lib(db, "bpe");
  std::unique_ptr<TheoremLibrary> lib;
  const GeneratedLibrary* generated = nullptr;
  std::string curve;
  if (o.method == "bpe") {
    bpe_mine(db, s.train.library, bpe_lib);
    generated = &bpe_lib;
  } else {
    Method m = parse_method(o.method);
    cfg.validate(m != Method::Random);
    lib = std::make_unique<TheoremLibrary>(db, s.train);
    RunResult r;
    if (m == Method::MctsPvn && o.external.empty()) {
      MlpPolicy model = o.model.empty() ? MlpPolicy(FeatureEncoder(db, cfg.max_steps), 128, cfg.seed)
                                        : MlpPolicy::load(o.model, db);
      auto sp = self_play(model, *lib, s.train, cfg, tcfg);
      r = std::move(sp.run);
      std::string csv = "round,epoch,kl,mse\n";
      for (std::size_t i = 0; i < sp.curves.size(); ++i) {
        std::istringstream rows(sp.curves[i].to_csv());
        std::string line;
        std::getline(rows, line);
        while (std::getline(rows, line)) csv += std::to_string(i + 1) + "," + line + "\n";
      }
      write_file(out / "train_curve.csv", csv);
      model.save((out / "model.json").string());
    } else if (m == Method::MctsPvn) {
      ExternalPolicy ext(o.external, FeatureEncoder(db, cfg.max_steps));
      r = run_episodes(m, *lib, s.train, cfg, &ext);
    } else {
      r = run_episodes(m, *lib, s.train, cfg);
    }
    for (auto& e : r.curve) curve += e.to_json() + "\n";
    generated = &lib->generated();
  }
  write_file(out / "episodes.jsonl", curve);
  std::string blocks = generated->emit();
  write_file(out / "theorems.mm", blocks);
  write_file(out / "augmented.mm", db.source + "\n" + blocks);

  Scorer scorer(*generated, s.test.problems, s.test.library);
  GenerateResult g;
  g.report = evaluate(s.preset.name, "test", *generated, scorer, assertion_keys(db, false, true));
  g.metrics = ojson::parse(g.report.to_json());
  g.metrics["method"] = o.method;
  g.metrics["seed"] = cfg.seed;
  g.metrics["split_seed"] = o.split.split_seed;
  g.metrics["expand"] = o.method == "bpe" ? "n/a" : o.expand;
  write_file(out / "metrics.json", g.metrics.dump(2) + "\n");
  return g;
}

int cmd_generate(const GenerateOptions& o) {
  auto g = run_generate(o, o.out);
  std::cout << g.metrics.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- sweep_c

int cmd_sweep(GenerateOptions o, const std::vector<double>& cs) {
  if (cs.size() < 2) throw UsageError("sweep_c needs at least two c values");
  if (o.method != "mcts" && o.method != "mcts_pvn") throw UsageError("sweep_c needs a tree-search method");
  fs::create_directories(o.out);
  std::string csv = "c,len_LG,APR,precision_pct\n";
  for (double c : cs) {
    GenerateOptions run = o;
    run.cfg.c_puct = c;
    std::ostringstream name;
    name << "c_" << c;
    auto g = run_generate(run, fs::path(o.out) / name.str());
    std::ostringstream row;
    row << c << ',' << g.report.len_lg << ',' << g.report.apr << ',' << g.report.precision_pct << '\n';
    csv += row.str();
  }
  write_file(fs::path(o.out) / "sweep.csv", csv);
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------- export

int cmd_export(const std::string& db_path, const std::string& in, const std::string& out) {
  Database base = load_database(db_path);
  std::string blocks = read_file(in);
  Database merged = parse_database_text(base.source + "\n" + blocks);
  std::size_t n = 0;
  for (int f : merged.provable_ids())
    if (static_cast<std::size_t>(f) >= base.frames.size()) {
      verify_proof(merged, merged.frames[static_cast<std::size_t>(f)].label);
      ++n;
    }
  write_file(out, merged.source);
  ojson j;
  j["theorems"] = n;
  j["out"] = out;
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Theorem generation toolkit"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Verify every (or the listed) provable statements");
  std::string verify_db;
  std::vector<std::string> labels;
  verify->add_option("--db", verify_db, "Metamath database")->required();
  verify->add_option("labels", labels, "Statements to verify");

  auto* build = app.add_subcommand("build", "Write train/test split manifests and statistics");
  SplitOptions build_opts;
  std::uint64_t build_seed = 1;
  std::string build_out = "out";
  build_opts.add(*build);
  build->add_option("--seed", build_seed, "Split seed");
  build->add_option("--out", build_out, "Output directory");

  auto* generate = app.add_subcommand("generate", "Generate theorems and score them on the test split");
  GenerateOptions gen_opts;
  gen_opts.add(*generate);

  auto* sweep = app.add_subcommand("sweep_c", "Generate once per exploration constant");
  GenerateOptions sweep_opts;
  std::vector<double> cs;
  sweep_opts.add(*sweep);
  sweep->add_option("--c", cs, "Exploration constants")->delimiter(',')->required();

  auto* exp = app.add_subcommand("export", "Check generated theorem blocks and merge them into a database");
  std::string exp_db, exp_in, exp_out;
  exp->add_option("--db", exp_db, "Metamath database")->required()->check(CLI::ExistingFile);
  exp->add_option("--in", exp_in, "Theorem blocks")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", exp_out, "Merged database")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*verify) return cmd_verify(verify_db, labels);
    if (*build) {
      build_opts.split_seed = build_seed;
      return cmd_build(build_opts, build_out);
    }
    if (*generate) return cmd_generate(gen_opts);
    if (*sweep) return cmd_sweep(sweep_opts, cs);
    if (*exp) return cmd_export(exp_db, exp_in, exp_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
