#include <atg/proof.hpp>

#include <doctest.h>

#include <random>
#include <sstream>

#include "common.hpp"

using namespace atg;
using testdata::fragment;

namespace {

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

const Database& mini() {
  static const Database db = parse_database_text(testdata::kMini);
  return db;
}

}  // namespace

TEST_SUITE("parse") {
  TEST_CASE("pm2.21dd frame") {
    const Database& db = mini();
    const Frame& f = db.frames[db.frame_id("pm2.21dd")];
    CHECK(f.hyps.size() == 2);
    CHECK(db.text(f.concl) == "|- ( ph -> ch )");
    CHECK(f.float_labels == std::vector<std::string>{"wph", "wps", "wch"});
    CHECK(db.provable[db.frame_id("pm2.21dd")]);
    CHECK_FALSE(db.provable[db.frame_id("ax-1")]);
  }

  TEST_CASE("empty file") {
    Database db = parse_database_text("");
    CHECK(db.frames.empty());
    CHECK(db.symbol_count() == 0);
  }

  TEST_CASE("fragment size") {
    CHECK(fragment().provable_ids().size() >= 2048);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_WITH_AS(parse_database_text("$c a $. $c a $."), doctest::Contains("twice"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("$c wff $. x $a wff y $."), doctest::Contains("undeclared"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("$c wff $. x $a wff $. x $a wff $."), doctest::Contains("duplicate"),
                         MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("${ $c a $."), doctest::Contains("scoping"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("$}"), doctest::Contains("scoping"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("$( open"), doctest::Contains("line 1"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("\n\n$c a$b $."), doctest::Contains("line 3"), MMError);
    CHECK_THROWS_WITH_AS(parse_database_text("$[ x.mm $]"), doctest::Contains("inclusion"), MMError);
  }

  TEST_CASE("scoped hypotheses are not visible outside") {
    const Database& db = mini();
    const Frame& f = db.frames[db.frame_id("ax-1")];
    CHECK(f.hyps.empty());
    CHECK(f.vars.size() == 2);
  }
}

TEST_SUITE("decompress") {
  TEST_CASE("pm2.21dd letters") {
    auto seq = decompress_proof(mini(), "pm2.21dd");
    CHECK(seq == split("wph wch wph wps pm2.21dd.1 pm2.21dd.2 pm2.65i pm2.21i"));
  }

  TEST_CASE("single hypothesis") {
    Database db = parse_database_text(R"(
      $c |- wff $. $v p $. wp $f wff p $.
      ${ h $e |- p $. t $p |- p $= ( ) B $. $}
    )");
    CHECK(decompress_proof(db, "t") == split("h"));
    CHECK(verify_proof(db, "t").steps() == 1);
  }

  TEST_CASE("Z tagged subproof") {
    const Database& db = fragment();
    auto seq = decompress_proof(db, "id");
    // ( wi ax-1 mpd ) AAABZAAACAECD decoded by hand
    CHECK(seq == split("wph wph wph wi wph wph wph ax-1 wph wph wph wi ax-1 mpd"));
    std::string oracle = testdata::run(std::string("python3 ") + ATG_ORACLE + " " + testdata::data("prop.mm") +
                                       " --decompress id");
    CHECK(split(oracle) == seq);
  }

  TEST_CASE("oracle agreement on a sample") {
    const Database& db = fragment();
    std::vector<std::string> labels;
    auto ids = db.provable_ids();
    for (std::size_t i = 0; i < ids.size(); i += 97) labels.push_back(db.frames[ids[i]].label);
    for (auto& l : labels) {
      std::string oracle = testdata::run(std::string("python3 ") + ATG_ORACLE + " " + testdata::data("prop.mm") +
                                         " --decompress " + l);
      CHECK_MESSAGE(split(oracle) == decompress_proof(db, l), l);
    }
  }

  TEST_CASE("letter codec") {
    for (std::size_t n : {1u, 20u, 21u, 120u, 121u, 2000u}) {
      auto code = encode_number(n);
      CHECK(decode_letters(code) == std::vector<std::size_t>{n});
    }
    CHECK(encode_number(21) == "UA");
    CHECK(encode_number(120) == "YT");
    CHECK(encode_number(121) == "UUA");
    CHECK_THROWS_AS(decode_letters("AU"), MMError);
  }

  TEST_CASE("range errors") {
    Database db = parse_database_text(R"(
      $c |- wff $. $v p $. wp $f wff p $.
      ${ h $e |- p $. t $p |- p $= ( ) C $. $}
      ${ h2 $e |- p $. t2 $p |- p $= ( ) ZB $. $}
    )");
    CHECK_THROWS_WITH_AS(decompress_proof(db, "t"), doctest::Contains("out of range"), MMError);
    CHECK_THROWS_WITH_AS(decompress_proof(db, "t2"), doctest::Contains("dangling Z"), MMError);
  }
}

TEST_SUITE("verify") {
  TEST_CASE("pm2.21dd") {
    auto t = verify_proof(mini(), "pm2.21dd");
    CHECK(mini().text(t.conclusion()) == "|- ( ph -> ch )");
    CHECK(t.steps() == 4);
  }

  TEST_CASE("axiom restatement") {
    auto t = verify_proof(mini(), "ax1re");
    CHECK(mini().text(t.conclusion()) == "|- ( ph -> ( ps -> ph ) )");
    CHECK(t.steps() == 1);
  }

  TEST_CASE("swapped letters rejected") {
    std::string txt = testdata::kMini;
    auto p = txt.find("ACABDEFG");
    txt.replace(p, 8, "ACABDEGF");
    Database db = parse_database_text(txt);
    CHECK_THROWS_WITH_AS(verify_proof(db, "pm2.21dd"), doctest::Contains("substitution mismatch"), ProofError);
  }

  TEST_CASE("stack errors") {
    std::string base = R"($c |- wff ( ) -> $. $v p q $. wp $f wff p $. wq $f wff q $.
      wi $a wff ( p -> q ) $.
      ax $a |- ( p -> p ) $.
    )";
    CHECK_THROWS_WITH_AS(verify_proof(parse_database_text(base + "t $p |- ( p -> p ) $= ax $."), "t"),
                         doctest::Contains("underflow"), ProofError);
    CHECK_THROWS_WITH_AS(verify_proof(parse_database_text(base + "t $p |- ( p -> p ) $= wp wp ax $."), "t"),
                         doctest::Contains("residual"), ProofError);
    CHECK_THROWS_WITH_AS(verify_proof(parse_database_text(base + "t $p |- ( q -> q ) $= wp ax $."), "t"),
                         doctest::Contains("final statement"), ProofError);
  }

  TEST_CASE("disjoint variables") {
    std::string base = R"($c |- wff A $. $v p q $. wp $f wff p $. wq $f wff q $.
      wA $a wff A $.
      ${ $d p q $. ax $a |- p $. $}
    )";
    // ax's mandatory pair is only p alone, so no violation possible there.
    Database ok = parse_database_text(base + "t $p |- A $= wA ax $.");
    CHECK(verify_proof(ok, "t").steps() == 1);
    std::string dvax = R"($c |- wff ( ) -> $. $v p q $. wp $f wff p $. wq $f wff q $.
      wi $a wff ( p -> q ) $.
      ${ $d p q $. ax $a |- ( p -> q ) $. $}
    )";
    Database bad = parse_database_text(dvax + "t $p |- ( p -> p ) $= wp wp ax $.");
    CHECK_THROWS_WITH_AS(verify_proof(bad, "t"), doctest::Contains("disjoint"), ProofError);
    Database missing = parse_database_text(dvax + "t $p |- ( p -> q ) $= wp wq ax $.");
    CHECK_THROWS_WITH_AS(verify_proof(missing, "t"), doctest::Contains("disjoint"), ProofError);
    Database good = parse_database_text(dvax + "${ $d p q $. t $p |- ( p -> q ) $= wp wq ax $. $}");
    CHECK(verify_proof(good, "t").steps() == 1);
  }

  TEST_CASE("whole fragment round trip") {
    const Database& db = fragment();
    FrameTable ft(db);
    ProofStore st(ft);
    std::size_t n = 0;
    for (int id : db.provable_ids()) {
      std::uint32_t root = verify_into(st, id);
      CHECK(st.statement(root) == db.frames[id].concl);
      ++n;
    }
    CHECK(n == db.provable_ids().size());
  }

  TEST_CASE("mutations never change the conclusion") {
    const Database& db = fragment();
    std::mt19937_64 rng(7);
    auto ids = db.provable_ids();
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      int id = ids[rng() % ids.size()];
      std::string txt = db.source;
      const std::string& letters = db.proofs[id].letters;
      if (letters.empty()) continue;
      auto head = txt.find(" " + db.frames[id].label + " $p ");
      REQUIRE(head != std::string::npos);
      auto stream = txt.find(") ", txt.find("$=", head)) + 2;
      std::size_t pos = stream + rng() % (txt.find(" $.", stream) - stream);
      if (txt[pos] < 'A' || txt[pos] > 'Z') continue;
      txt[pos] = static_cast<char>('A' + rng() % 26);
      Database m;
      try {
        m = parse_database_text(txt);
        auto t = verify_proof(m, db.frames[id].label);
        CHECK(t.conclusion() == db.frames[id].concl);
      } catch (const MMError&) {
      }
      ++checked;
    }
    CHECK(checked > 50);
  }
}

TEST_SUITE("match") {
  TEST_CASE("pm2.21i against target") {
    const Database& db = mini();
    const Frame& f = db.frames[db.frame_id("pm2.21i")];
    auto s = match_assertion(db, f, db.expr("|- ( ph -> ch )"), {db.expr("|- -. ph")});
    REQUIRE(s);
    CHECK(db.text(s->at(db.sym("ph"))) == "ph");
    CHECK(db.text(s->at(db.sym("ps"))) == "ch");
    CHECK_FALSE(match_assertion(db, f, db.expr("|- ( ph -> ch )"), {}));
  }

  TEST_CASE("identity") {
    const Database& db = mini();
    const Frame& f = db.frames[db.frame_id("ax-1")];
    auto s = match_assertion(db, f, f.concl, {});
    REQUIRE(s);
    for (auto& [v, e] : *s) CHECK(e == Expr{v});
  }

  TEST_CASE("pool order does not matter") {
    const Database& db = mini();
    const Frame& f = db.frames[db.frame_id("ax-mp")];
    std::vector<Expr> pool{db.expr("|- ps"), db.expr("|- ( ps -> ch )"), db.expr("|- ph"),
                           db.expr("|- ( ph -> ch )")};
    auto a = match_assertion(db, f, db.expr("|- ch"), pool);
    std::reverse(pool.begin(), pool.end());
    auto b = match_assertion(db, f, db.expr("|- ch"), pool);
    REQUIRE(a);
    CHECK(a == b);
  }
}

TEST_SUITE("emit") {
  TEST_CASE("axiom restatement block") {
    const Database& db = mini();
    auto t = verify_proof(db, "ax1re");
    Frame f = make_frame(db, "gax1", {}, t.conclusion());
    std::string block = emit_theorem(f, *t.store, t.root);
    Database re = parse_database_text(db.source + block);
    CHECK(decompress_proof(re, "gax1").size() == 3);
    CHECK(verify_proof(re, "gax1").conclusion() == f.concl);
  }

  TEST_CASE("mp2b equivalent") {
    const Database& db = fragment();
    auto t = verify_proof(db, "mp2b");
    const Frame& orig = db.frames[db.frame_id("mp2b")];
    // rename variables to show alpha matching
    Expr a = db.expr("|- ch"), b = db.expr("|- ( ch -> th )"), c = db.expr("|- ( th -> ta )");
    Frame f = make_frame(db, "gen.mp2b", {a, b, c}, db.expr("|- ta"));
    CHECK(alpha_key(db, f.hyps, f.concl) == alpha_key(db, orig.hyps, orig.concl));
    Frame same = make_frame(db, "gen.mp2b", orig.hyps, orig.concl);
    std::string block = emit_theorem(same, *t.store, t.root);
    Database re = parse_database_text(db.source + block);
    CHECK(verify_proof(re, "gen.mp2b").conclusion() == orig.concl);
  }

  TEST_CASE("refuses a wrong frame") {
    const Database& db = mini();
    auto t = verify_proof(db, "ax1re");
    Frame f = make_frame(db, "bad", {}, db.expr("|- ( ps -> ph )"));
    CHECK_THROWS_AS(emit_theorem(f, *t.store, t.root), ProofError);
  }

  TEST_CASE("idempotent and round trips for database theorems") {
    const Database& db = fragment();
    auto ids = db.provable_ids();
    std::string blocks;
    std::vector<std::string> first;
    FrameTable ft(db);
    ProofStore st(ft);
    for (std::size_t i = 0; i < ids.size(); i += ids.size() / 100) {
      const Frame& o = db.frames[ids[i]];
      std::uint32_t root = verify_into(st, ids[i]);
      Frame f = make_frame(db, "re." + o.label, o.hyps, o.concl);
      first.push_back(emit_theorem(f, st, root));
      blocks += first.back();
    }
    Database re = parse_database_text(db.source + blocks);
    FrameTable ft2(re);
    ProofStore st2(ft2);
    std::size_t k = 0;
    for (std::size_t i = 0; i < ids.size(); i += ids.size() / 100, ++k) {
      const Frame& o = db.frames[ids[i]];
      int nid = re.frame_id("re." + o.label);
      std::uint32_t root = verify_into(st2, nid);
      CHECK(st2.statement(root) == o.concl);
      CHECK(emit_theorem(re.frames[nid], st2, root) == first[k]);
    }
  }
}

TEST_SUITE("alpha") {
  TEST_CASE("renaming and hypothesis order") {
    const Database& db = fragment();
    auto k1 = alpha_key(db, {db.expr("|- ( ph -> ps )"), db.expr("|- ( ps -> ch )")}, db.expr("|- ( ph -> ch )"));
    auto k2 = alpha_key(db, {db.expr("|- ( th -> ta )"), db.expr("|- ( ch -> th )")}, db.expr("|- ( ch -> ta )"));
    auto k3 = alpha_key(db, {db.expr("|- ( ph -> ps )"), db.expr("|- ( ps -> ph )")}, db.expr("|- ( ph -> ph )"));
    CHECK(k1 == k2);
    CHECK(k1 != k3);
  }
}
