#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"

namespace fs = std::filesystem;
using testdata::run;

namespace {

std::string cli() { return ATG_CLI; }
std::string prop() { return testdata::data("prop.mm"); }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("atg_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const std::string& name, const std::string& text) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

nlohmann::json last_line(const std::string& out) {
  auto end = out.find_last_not_of('\n');
  auto start = out.rfind('\n', end);
  return nlohmann::json::parse(out.substr(start == std::string::npos ? 0 : start + 1, end - start));
}

std::string small_generate(const std::string& method, const fs::path& out, const std::string& extra = "") {
  return cli() + " generate --db " + prop() + " --preset wb --method " + method +
         " --episodes 3 --generations 4 --simulations 10 --seed 2 --out " + out.string() + " " + extra +
         " 2>&1";
}

}  // namespace

TEST_SUITE("cli verify") {
  TEST_CASE("whole fragment") {
    int st = -1;
    auto out = run(cli() + " verify --db " + prop(), &st);
    CHECK(st == 0);
    auto s = last_line(out);
    CHECK(s["ok"] == true);
    CHECK(s["verified"] == s["total"]);
    CHECK(s["total"].get<int>() >= 2000);
  }

  TEST_CASE("listed labels report steps") {
    int st = -1;
    auto out = run(cli() + " verify --db " + prop() + " a1i mp2", &st);
    CHECK(st == 0);
    auto j = nlohmann::json::parse(out.substr(0, out.find('\n')));
    CHECK(j["label"] == "a1i");
    CHECK(j["ok"] == true);
    CHECK(j["steps"].get<int>() > 0);
    CHECK_FALSE(j.contains("error"));
  }

  TEST_CASE("a corrupted proof fails with its label") {
    auto db = write("atg_cli_bad.mm", std::string(testdata::kMini) +
                                         "  bad $p |- ( ph -> ( ps -> ph ) ) $= wps wph ax-1 $.\n");
    int st = -1;
    auto out = run(cli() + " verify --db " + db.string(), &st);
    CHECK(st == 1);
    auto s = last_line(out);
    CHECK(s["first_failure"] == "bad");
    CHECK(out.find("\"label\":\"bad\",\"ok\":false") != std::string::npos);
    CHECK(out.find("\"error\"") != std::string::npos);
  }

  TEST_CASE("empty database") {
    auto db = write("atg_cli_empty.mm", "");
    int st = -1;
    auto out = run(cli() + " verify --db " + db.string(), &st);
    CHECK(st == 0);
    CHECK(last_line(out)["verified"] == 0);
  }

  TEST_CASE("unreadable database") {
    int st = -1;
    run(cli() + " verify --db /nonexistent.mm 2>&1", &st);
    CHECK(st == 1);
  }
}

TEST_SUITE("cli build") {
  TEST_CASE("wb manifests and reproducibility") {
    auto a = scratch("build_a"), b = scratch("build_b");
    int st = -1;
    run(cli() + " build --db " + prop() + " --preset wb --seed 4 --out " + a.string(), &st);
    REQUIRE(st == 0);
    run(cli() + " build --db " + prop() + " --preset wb --seed 4 --out " + b.string(), &st);
    REQUIRE(st == 0);
    auto train = nlohmann::json::parse(slurp(a / "train.json"));
    auto test = nlohmann::json::parse(slurp(a / "test.json"));
    CHECK(train["library"].size() == 82);
    CHECK(train["problems"].size() == 32);
    CHECK(test["library"].size() == 54);
    CHECK(test["problems"].size() == 21);
    CHECK(train["seed"] == 4);
    for (auto f : {"train.json", "test.json", "stats.csv"}) CHECK(slurp(a / f) == slurp(b / f));
  }

  TEST_CASE("infeasible custom preset") {
    int st = -1;
    auto out = run(cli() + " build --db " + prop() + " --count 10 --k-train 5 --k-test 9 --out " +
                       scratch("build_c").string() + " 2>&1",
                   &st);
    CHECK(st != 0);
    CHECK(out.find("empty problem set") != std::string::npos);
  }

  TEST_CASE("unknown preset is a usage error") {
    int st = -1;
    run(cli() + " build --db " + prop() + " --preset nope --out " + scratch("build_d").string() + " 2>&1", &st);
    CHECK(st == 2);
  }
}

TEST_SUITE("cli generate") {
  TEST_CASE("zero simulations are rejected for tree search") {
    int st = -1;
    auto out = run(cli() + " generate --db " + prop() + " --method mcts --simulations 0 --out " +
                       scratch("gen_z").string() + " 2>&1",
                   &st);
    CHECK(st == 2);
    CHECK(out.find("simulations") != std::string::npos);
  }

  TEST_CASE("bad flag values are usage errors") {
    int st = -1;
    run(cli() + " generate --db " + prop() + " --expand some --out " + scratch("gen_e").string() + " 2>&1", &st);
    CHECK(st == 2);
    run(cli() + " generate --db " + prop() + " --method beam --out " + scratch("gen_m").string() + " 2>&1", &st);
    CHECK(st == 2);
    run(cli() + " frobnicate 2>&1", &st);
    CHECK(st == 2);
  }

  TEST_CASE("random search has zero precision") {
    auto out = scratch("gen_r");
    int st = -1;
    run(small_generate("random", out), &st);
    REQUIRE(st == 0);
    auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(m["precision_pct"] == 0.0);
    CHECK(m["method"] == "random");
  }

  TEST_CASE("outputs are reproducible, re-verify and export") {
    auto a = scratch("gen_a"), b = scratch("gen_b");
    int st = -1;
    run(small_generate("mcts", a, "--expand best"), &st);
    REQUIRE(st == 0);
    run("ATG_THREADS=1 " + small_generate("mcts", b, "--expand best"), &st);
    REQUIRE(st == 0);
    for (auto f : {"metrics.json", "episodes.jsonl", "theorems.mm", "augmented.mm"})
      CHECK(slurp(a / f) == slurp(b / f));
    auto m = nlohmann::json::parse(slurp(a / "metrics.json"));
    for (auto k : {"dataset", "split", "len_LG", "D_before", "D_after", "APR", "precision_pct", "histogram"})
      CHECK(m.contains(k));
    std::istringstream lines(slurp(a / "episodes.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      auto e = nlohmann::json::parse(line);
      CHECK(e["episode"] == ++n);
      for (auto k : {"new_theorems", "library_size", "APR_train"}) CHECK(e.contains(k));
    }
    CHECK(n >= 1);
    run(cli() + " verify --db " + (a / "augmented.mm").string() + " > /dev/null", &st);
    CHECK(st == 0);
    auto merged = a / "merged.mm";
    auto out = run(cli() + " export --db " + prop() + " --in " + (a / "theorems.mm").string() + " --out " +
                       merged.string(),
                   &st);
    CHECK(st == 0);
    CHECK(nlohmann::json::parse(out)["theorems"] == m["len_LG"]);
    run(cli() + " verify --db " + merged.string() + " > /dev/null", &st);
    CHECK(st == 0);
  }

  TEST_CASE("bpe miner") {
    auto out = scratch("gen_bpe");
    int st = -1;
    run(small_generate("bpe", out), &st);
    REQUIRE(st == 0);
    auto m = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(m["len_LG"].get<int>() > 0);
    run(cli() + " verify --db " + (out / "augmented.mm").string() + " > /dev/null", &st);
    CHECK(st == 0);
  }

  TEST_CASE("self-play writes a checkpoint and training curve") {
    auto out = scratch("gen_pvn");
    int st = -1;
    run(cli() + " generate --db " + prop() + " --method mcts_pvn --episodes 1 --generations 2 --simulations 5" +
            " --epochs 1 --expand best --seed 1 --out " + out.string() + " 2>&1",
        &st);
    REQUIRE(st == 0);
    CHECK(fs::exists(out / "model.json"));
    CHECK(slurp(out / "train_curve.csv").rfind("round,epoch,kl,mse\n", 0) == 0);
    auto again = scratch("gen_pvn2");
    run(cli() + " generate --db " + prop() + " --method mcts_pvn --episodes 1 --generations 2 --simulations 5" +
            " --epochs 1 --expand best --seed 1 --model " + (out / "model.json").string() + " --out " +
            again.string() + " 2>&1",
        &st);
    CHECK(st == 0);
  }
}

TEST_SUITE("cli sweep") {
  TEST_CASE("a single value is rejected") {
    int st = -1;
    auto out = run(cli() + " sweep_c --db " + prop() + " --c 0.3 --out " + scratch("sw1").string() + " 2>&1", &st);
    CHECK(st == 2);
    CHECK(out.find("two") != std::string::npos);
  }

  TEST_CASE("one row per value, stable across reruns") {
    auto a = scratch("sw_a"), b = scratch("sw_b");
    std::string args = " sweep_c --db " + prop() +
                       " --c 0,0.3,100 --episodes 2 --generations 3 --simulations 8 --expand best --seed 1 --out ";
    int st = -1;
    run(cli() + args + a.string(), &st);
    REQUIRE(st == 0);
    run(cli() + args + b.string(), &st);
    REQUIRE(st == 0);
    auto csv = slurp(a / "sweep.csv");
    CHECK(csv == slurp(b / "sweep.csv"));
    CHECK(csv.rfind("c,len_LG,APR,precision_pct\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(fs::exists(a / "c_0.3" / "metrics.json"));
  }
}
