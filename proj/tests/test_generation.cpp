#include <atg/generation.hpp>

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <set>

#include "common.hpp"

using namespace atg;
using testdata::fragment;

namespace {

const Database& mini() {
  static const Database db = parse_database_text(testdata::kMini);
  return db;
}

struct Wb {
  SplitManifest train, test;
};

const Wb& wb() {
  static const Wb w = [] {
    const Database& db = fragment();
    const Preset& pr = preset("wb");
    auto g = build_graph(db, first_theorems(db, pr.count));
    auto [tr, te] = make_splits(db, g, pr, 1);
    return Wb{tr, te};
  }();
  return w;
}

GenerationConfig small(std::uint64_t seed) {
  GenerationConfig c;
  c.episodes = 3;
  c.generations = 4;
  c.simulations = 20;
  c.seed = seed;
  c.threads = 1;
  return c;
}

int index_of(const ActionSpace& space, const std::string& label) {
  for (std::size_t i = 0; i < space.size(); ++i)
    if (space[i].label == label) return static_cast<int>(i);
  return -1;
}

// Every generated theorem emitted into the database re-verifies there.
void check_reverifies(const TheoremLibrary& lib) {
  if (lib.generated().empty()) return;
  Database again = parse_database_text(lib.db().source + "\n" + lib.generated().emit());
  for (std::size_t i = 0; i < lib.generated().size(); ++i) {
    const Frame& f = lib.generated().frame(i);
    auto t = verify_proof(again, f.label);
    CHECK(t.conclusion() == f.concl);
  }
}

}  // namespace

TEST_SUITE("puct") {
  TEST_CASE("arithmetic") { CHECK(puct(0.5, 0.2, 0.3, 3, 9) == doctest::Approx(0.545)); }
  TEST_CASE("no exploration at a fresh node or with c = 0") {
    CHECK(puct(0.4, 0.9, 0.3, 0, 0) == doctest::Approx(0.4));
    CHECK(puct(0.4, 0.9, 0.0, 2, 50) == doctest::Approx(0.4));
  }
  TEST_CASE("large c orders by prior over visits") {
    double a = puct(0.9, 0.1, 1e6, 0, 4), b = puct(0.0, 0.5, 1e6, 0, 4);
    CHECK(b > a);
  }
}

TEST_SUITE("actions") {
  // Space over the mini database: pushes ph ps, syntax wn wi, axioms.
  ActionSpace mini_space() {
    const Database& db = mini();
    ActionSpace s;
    for (auto v : {"ph", "ps"}) s.push_back({ActionKind::Push, std::string("w") + v, -1, db.sym(v), {}, 0, 0});
    for (auto l : {"wn", "wi", "ax-1", "ax-mp", "ax-3"}) {
      int f = db.frame_id(l);
      s.push_back({ActionKind::Axiom, l, f, -1, {}, static_cast<int>(db.frames[static_cast<std::size_t>(f)].arity()), 0});
    }
    return s;
  }

  TEST_CASE("pushing two formulas and applying ax-1") {
    const Database& db = mini();
    FrameTable ft(db);
    ProofStore st(ft);
    auto space = mini_space();
    State s;
    for (auto l : {"wph", "wps", "ax-1"}) {
      auto n = apply_action(st, s, space, index_of(space, l));
      REQUIRE(n);
      s = *n;
    }
    REQUIRE(s.stack.size() == 1);
    CHECK(db.text(st.statement(s.stack[0])) == "|- ( ph -> ( ps -> ph ) )");
    CHECK(is_terminal(st, s));
    CHECK(s.history.size() == 3);
  }

  TEST_CASE("underflow and mismatch are invalid and leave the state alone") {
    const Database& db = mini();
    FrameTable ft(db);
    ProofStore st(ft);
    auto space = mini_space();
    State empty;
    CHECK_FALSE(apply_action(st, empty, space, index_of(space, "ax-mp")));
    State s = *apply_action(st, empty, space, index_of(space, "wph"));
    s = *apply_action(st, s, space, index_of(space, "wps"));
    State before = s;
    // ax-mp needs two provable operands after two formulas.
    CHECK_FALSE(apply_action(st, s, space, index_of(space, "ax-mp")));
    CHECK_FALSE(apply_action(st, s, space, -1));
    CHECK_FALSE(apply_action(st, s, space, static_cast<int>(space.size())));
    CHECK(s.stack == before.stack);
    CHECK(s.history == before.history);
  }

  TEST_CASE("a bare formula or hypothesis is not terminal") {
    const Database& db = mini();
    FrameTable ft(db);
    ProofStore st(ft);
    ActionSpace space{{ActionKind::Hyp, "|- ph", -1, -1, db.expr("|- ph"), 0, 0}};
    space.push_back({ActionKind::Push, "wph", -1, db.sym("ph"), {}, 0, 0});
    CHECK_FALSE(is_terminal(st, *apply_action(st, State{}, space, 0)));
    CHECK_FALSE(is_terminal(st, *apply_action(st, State{}, space, 1)));
  }

  TEST_CASE("replaying the pm2.21dd proof reaches the verified conclusion") {
    const Database& db = mini();
    auto tree = verify_proof(db, "pm2.21dd");
    FrameTable ft(db);
    ProofStore st(ft);
    ActionSpace space;
    State s;
    for (auto& l : decompress_proof(db, "pm2.21dd")) {
      int a = index_of(space, l);
      if (a < 0) {
        if (const HypDecl* h = db.find_hyp(l)) {
          if (h->floating)
            space.push_back({ActionKind::Push, l, -1, h->expr[1], {}, 0, 0});
          else
            space.push_back({ActionKind::Hyp, l, -1, -1, h->expr, 0, 0});
        } else {
          int f = db.frame_id(l);
          space.push_back({ActionKind::Axiom, l, f, -1, {}, static_cast<int>(db.frames[static_cast<std::size_t>(f)].arity()), 0});
        }
        a = static_cast<int>(space.size() - 1);
      }
      auto n = apply_action(st, s, space, a);
      REQUIRE(n);
      s = *n;
    }
    REQUIRE(is_terminal(st, s));
    CHECK(st.statement(s.stack[0]) == tree.conclusion());
    CHECK(st.size(s.stack[0]) == tree.steps());
  }
}

TEST_SUITE("action space") {
  TEST_CASE("composition on wb") {
    const Database& db = fragment();
    TheoremLibrary lib(db, wb().train);
    GenerationConfig cfg;
    std::mt19937_64 rng(7);
    auto space = sample_action_space(lib, cfg, rng);
    std::size_t pushes = 0, axioms = 0, theorems = 0, hyps = 0;
    for (auto& a : space) {
      pushes += a.kind == ActionKind::Push;
      axioms += a.kind == ActionKind::Axiom;
      theorems += a.kind == ActionKind::Theorem;
      hyps += a.kind == ActionKind::Hyp;
    }
    CHECK(pushes == lib.wff_vars().size());
    CHECK(pushes >= 3);
    CHECK(axioms == lib.axioms().size() + lib.grammar().size());
    CHECK(theorems == 0);  // empty generated library
    CHECK(hyps == std::min<std::size_t>(5, lib.hypotheses().size()));
    for (auto& l : {"ax-1", "ax-2", "ax-3", "ax-mp", "wn", "wi"}) CHECK(index_of(space, l) >= 0);
    for (auto& a : space)
      if (a.kind == ActionKind::Axiom) CHECK(db.frames[static_cast<std::size_t>(a.frame)].dv.empty());
  }

  TEST_CASE("fixed seed gives the same list") {
    TheoremLibrary lib(fragment(), wb().train);
    GenerationConfig cfg;
    std::mt19937_64 a(3), b(3);
    auto x = sample_action_space(lib, cfg, a), y = sample_action_space(lib, cfg, b);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].label == y[i].label);
  }

  TEST_CASE("small libraries are taken whole") {
    TheoremLibrary lib(fragment(), wb().train);
    auto cfg = small(1);
    cfg.expand_all = true;
    cfg.episodes = 1;
    run_episodes(Method::Mcts, lib, wb().train, cfg);
    REQUIRE(lib.generated().size() > 0);
    std::size_t provable = lib.generated().rule_frames().size();
    GenerationConfig big;
    big.library_sample = static_cast<int>(provable) + 10;
    std::mt19937_64 rng(1);
    auto space = sample_action_space(lib, big, rng);
    std::size_t theorems = 0;
    for (auto& a : space) theorems += a.kind == ActionKind::Theorem;
    CHECK(theorems == provable);
    for (auto& a : space)
      if (a.kind == ActionKind::Theorem) CHECK(a.ref_depth >= 1);
  }
}

TEST_SUITE("search") {
  TEST_CASE("config validation") {
    GenerationConfig c;
    c.simulations = 0;
    CHECK_THROWS_AS(c.validate(true), std::invalid_argument);
    CHECK_NOTHROW(c.validate(false));
    c = GenerationConfig{};
    c.max_steps = 0;
    CHECK_THROWS_AS(c.validate(false), std::invalid_argument);
    c = GenerationConfig{};
    c.gamma = 0;
    CHECK_THROWS_AS(c.validate(false), std::invalid_argument);
    CHECK_THROWS_AS(parse_method("beam"), std::invalid_argument);
    CHECK(parse_method("mcts_pvn") == Method::MctsPvn);
  }

  TEST_CASE("zero simulations yield nothing") {
    TheoremLibrary lib(fragment(), wb().train);
    GenerationConfig cfg;
    cfg.simulations = 0;
    std::mt19937_64 rng(1);
    auto space = std::make_shared<const ActionSpace>(sample_action_space(lib, cfg, rng));
    UniformPolicy u;
    CHECK_FALSE(generate_once(&u, false, lib, space, cfg, rng));
  }

  TEST_CASE("visit counts: every simulation credits exactly one root child") {
    TheoremLibrary lib(fragment(), wb().train);
    GenerationConfig cfg;
    cfg.simulations = 37;
    std::mt19937_64 rng(5);
    auto space = std::make_shared<const ActionSpace>(sample_action_space(lib, cfg, rng));
    UniformPolicy u;
    SearchStats stats;
    generate_once(&u, false, lib, space, cfg, rng, nullptr, &stats);
    REQUIRE_FALSE(stats.root_visits.empty());
    CHECK(std::accumulate(stats.root_visits.begin(), stats.root_visits.end(), 0) == cfg.simulations);
    for (int v : stats.root_visits) CHECK(v >= 1);
    CHECK(stats.expansions <= stats.simulations);
  }

  TEST_CASE("generated theorems replay through the actions and are new") {
    TheoremLibrary lib(fragment(), wb().train);
    GenerationConfig cfg;
    cfg.simulations = 30;
    UniformPolicy u;
    int found = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      std::mt19937_64 rng(seed);
      auto space = std::make_shared<const ActionSpace>(sample_action_space(lib, cfg, rng));
      SearchTrace trace;
      auto g = generate_once(&u, false, lib, space, cfg, rng, &trace);
      if (!g) continue;
      ++found;
      ProofStore st(lib.generated().frames());
      State s;
      for (int a : g->actions) s = *apply_action(st, s, *space, a);
      REQUIRE(s.stack.size() == 1);
      CHECK(st.statement(s.stack[0]) == g->store->statement(g->root));
      CHECK(lib.is_new(g->key));
      CHECK(trace.reward == 1.0);
      CHECK(trace.steps.size() == g->actions.size());
      for (auto& step : trace.steps) {
        double total = std::accumulate(step.visits.begin(), step.visits.end(), 0.0);
        CHECK(total == doctest::Approx(1.0));
      }
      REQUIRE(lib.add(*g->store, g->root, 1));
      CHECK_FALSE(lib.is_new(g->key));
      // Same search again never returns the statement just added.
      std::mt19937_64 again(seed);
      auto space2 = std::make_shared<const ActionSpace>(sample_action_space(lib, cfg, again));
      auto h = generate_once(&u, false, lib, space2, cfg, again);
      if (h) CHECK(h->key != g->key);
    }
    CHECK(found > 0);
    check_reverifies(lib);
  }
}

TEST_SUITE("episodes") {
  TEST_CASE("every method produces sound, pairwise distinct theorems") {
    for (auto m : {Method::Random, Method::Mcts}) {
      for (bool all : {true, false}) {
        TheoremLibrary lib(fragment(), wb().train);
        auto cfg = small(2);
        cfg.expand_all = all;
        auto r = run_episodes(m, lib, wb().train, cfg);
        CHECK_FALSE(r.curve.empty());
        std::set<std::string> keys;
        for (auto& t : lib.generated().items()) CHECK(keys.insert(t.key).second);
        for (auto& t : lib.generated().items()) {
          const Frame& f = lib.generated().frames()->operator[](static_cast<std::size_t>(t.frame));
          CHECK(alpha_key(fragment(), f.hyps, f.concl) == t.key);
          CHECK_FALSE(assertion_keys(fragment(), true, false).count(t.key));
        }
        if (!all)
          for (auto& e : r.curve) CHECK(e.new_theorems <= 1);
        std::size_t total = 0;
        for (auto& e : r.curve) {
          total += e.new_theorems;
          CHECK(e.library_size == total);
        }
        check_reverifies(lib);
      }
    }
  }

  TEST_CASE("a fixed seed reproduces the curve") {
    auto run = [] {
      TheoremLibrary lib(fragment(), wb().train);
      auto cfg = small(9);
      cfg.threads = 2;
      std::string out;
      for (auto& e : run_episodes(Method::Mcts, lib, wb().train, cfg).curve) out += e.to_json() + "\n";
      return out + lib.generated().emit();
    };
    CHECK(run() == run());
  }

  TEST_CASE("more generations never shrink a first episode") {
    std::size_t prev = 0;
    for (int g : {1, 2, 4, 8}) {
      TheoremLibrary lib(fragment(), wb().train);
      auto cfg = small(4);
      cfg.episodes = 1;
      cfg.generations = g;
      cfg.expand_all = true;
      run_episodes(Method::Mcts, lib, wb().train, cfg);
      CHECK(lib.generated().size() >= prev);
      prev = lib.generated().size();
    }
  }

  TEST_CASE("curve record json") {
    EpisodeRecord e{3, 2, 7, 1.5};
    auto j = nlohmann::json::parse(e.to_json());
    CHECK(j["episode"] == 3);
    CHECK(j["new_theorems"] == 2);
    CHECK(j["library_size"] == 7);
    CHECK(j["APR_train"] == 1.5);
    CHECK(e.to_json().find("\"episode\"") < e.to_json().find("\"APR_train\""));
  }

  TEST_CASE("thread cap from the environment") {
    GenerationConfig c;
    c.threads = 8;
    setenv("ATG_THREADS", "2", 1);
    CHECK(thread_count(c) == 2);
    setenv("ATG_THREADS", "16", 1);
    CHECK(thread_count(c) == 8);
    unsetenv("ATG_THREADS");
    CHECK(thread_count(c) == 8);
  }
}

TEST_SUITE("bpe") {
  const char* kPairs = R"(
    $c ( ) -> wff |- $.
    $v ph ps ch $.
    wph $f wff ph $.
    wps $f wff ps $.
    wch $f wff ch $.
    wi $a wff ( ph -> ps ) $.
    ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
    t1 $p |- ( ph -> ( ps -> ph ) ) $= wph wps ax-1 $.
    t2 $p |- ( ph -> ( ps -> ph ) ) $= wph wps ax-1 $.
    t3 $p |- ( ph -> ( ps -> ph ) ) $= wph wps ax-1 $.
    t4 $p |- ( ch -> ( ch -> ch ) ) $= wch wch ax-1 $.
    t5 $p |- ( ch -> ( ch -> ch ) ) $= wch wch ax-1 $.
    t6 $p |- ( ps -> ( ch -> ps ) ) $= wps wch ax-1 $.
  )";

  using Labels = std::vector<std::string>;

  TEST_CASE("the most frequent pair merges first") {
    // Pairs of the t1 subproof occur 3 times, those of t4 twice but earlier.
    Database db = parse_database_text(kPairs);
    auto segs = bpe_segments(db, {"t4", "t5", "t1", "t2", "t3"});
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].labels == Labels{"wph", "wps", "ax-1"});
    CHECK(segs[0].occurrences == 3);
    CHECK(segs[0].proofs == 3);
    CHECK(segs[1].labels == Labels{"wch", "wch", "ax-1"});
  }

  TEST_CASE("ties go to the earlier pair") {
    Database db = parse_database_text(kPairs);
    auto segs = bpe_segments(db, {"t4", "t5", "t1", "t2"});
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].labels == Labels{"wch", "wch", "ax-1"});
  }

  TEST_CASE("a subproof in a single proof is not mined") {
    Database db = parse_database_text(kPairs);
    auto segs = bpe_segments(db, {"t1", "t6"});
    CHECK(segs.empty());
  }

  TEST_CASE("replay errors") {
    Database db = parse_database_text(kPairs);
    FrameTable ft(db);
    ProofStore st(ft);
    CHECK_THROWS_AS(replay(st, {"ax-1"}), ProofError);
    CHECK_THROWS_AS(replay(st, {"wph", "wph"}), ProofError);
    CHECK_THROWS_AS(replay(st, {"nope"}), ProofError);
  }

  TEST_CASE("unverifiable corpus is rejected") {
    Database db = parse_database_text(std::string(kPairs) + " bad $p |- ( ph -> ( ph -> ph ) ) $= wph ax-1 $.");
    CHECK_THROWS(bpe_segments(db, {"t1", "bad"}));
  }

  TEST_CASE("wb training library: segments recur, theorems verify") {
    const Database& db = fragment();
    auto segs = bpe_segments(db, wb().train.library);
    REQUIRE(segs.size() > 5);
    // Independent count: scan every decompressed proof for the segment.
    std::vector<std::vector<std::string>> corpus;
    for (auto& l : wb().train.library) corpus.push_back(decompress_proof(db, l));
    for (auto& s : segs) {
      std::size_t n = 0, proofs = 0;
      for (auto& p : corpus) {
        std::size_t here = 0;
        for (std::size_t i = 0; i + s.labels.size() <= p.size(); ++i)
          here += std::equal(s.labels.begin(), s.labels.end(), p.begin() + static_cast<long>(i));
        n += here;
        proofs += here > 0;
      }
      CHECK(n == s.occurrences);
      CHECK(proofs == s.proofs);
      CHECK(proofs >= 2);
    }
    GeneratedLibrary lib(db, "bpe");
    std::size_t added = bpe_mine(db, wb().train.library, lib);
    CHECK(added == lib.size());
    CHECK(added > 0);
    CHECK(added <= segs.size());
    Database again = parse_database_text(db.source + "\n" + lib.emit());
    for (std::size_t i = 0; i < lib.size(); ++i)
      CHECK(verify_proof(again, lib.frame(i).label).conclusion() == lib.frame(i).concl);
  }
}
