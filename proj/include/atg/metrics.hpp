// Proof distance, proof reduction with generated theorems, APR, precision
// and usage statistics.
#pragma once

#include <atg/proof.hpp>

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace atg {

// Inlines proofs of theorems outside a base set of frames.
class Expander {
 public:
  Expander(ProofStore& store, std::function<bool(int)> keep);
  // Axioms and hypotheses of the database as the base.
  explicit Expander(ProofStore& store);
  std::uint32_t expand(std::uint32_t root);
  std::uint32_t theorem(int frame);  // expanded proof of a database theorem

 private:
  std::uint32_t instantiate(std::uint32_t schema, std::unordered_map<Sym, std::uint32_t>& vars,
                            std::unordered_map<std::uint32_t, std::uint32_t>& hyps,
                            std::unordered_map<std::uint32_t, std::uint32_t>& memo);
  ProofStore& st_;
  std::function<bool(int)> keep_;
  std::unordered_map<int, std::uint32_t> schema_;
  std::unordered_map<std::uint32_t, std::uint32_t> memo_;
};

struct GeneratedTheorem {
  int frame = -1;            // id in the library frame table
  std::uint32_t proof = kNone;  // root in the library store
  int episode = 0;
  std::string key;  // alpha key
};

// L_G: verified, pairwise non-alpha-equivalent generated theorems.
class GeneratedLibrary {
 public:
  explicit GeneratedLibrary(const Database& db, std::string prefix = "gen");

  const Database& db() const { return *db_; }
  std::shared_ptr<FrameTable> frames() const { return frames_; }
  ProofStore& store() { return *store_; }
  const ProofStore& store() const { return *store_; }

  // Hypotheses are the distinct hypothesis leaves in proof order; a syntax
  // tree root adds a syntax theorem without hypotheses. Returns
  // the new index, or nothing for a known or alpha-duplicate statement.
  // Throws ProofError if the proof does not check.
  std::optional<std::size_t> add(const ProofStore& src, std::uint32_t root, int episode = 0);
  void reserve(const std::string& key) { reserved_.insert(key); }
  bool known(const std::string& key) const { return reserved_.count(key) || keys_.count(key); }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const GeneratedTheorem& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<GeneratedTheorem>& items() const { return items_; }
  const Frame& frame(std::size_t i) const { return (*frames_)[items_[i].frame]; }
  std::vector<int> rule_frames() const;  // provable theorems only

  // All theorems as ${ ... $} blocks in insertion order.
  std::string emit() const;

 private:
  const Database* db_;
  std::string prefix_;
  std::shared_ptr<FrameTable> frames_;
  std::unique_ptr<ProofStore> store_;
  std::vector<GeneratedTheorem> items_;
  std::unordered_set<std::string> keys_, reserved_;
};

// Alpha keys of every axiom and theorem of the database with the provable
// typecode.
std::unordered_set<std::string> assertion_keys(const Database& db, bool axioms, bool theorems);
std::string alpha_key_of(const ProofStore& store, std::uint32_t root, std::vector<Expr>* hyps = nullptr);

struct Rewrite {
  std::int64_t saving = 0;  // per occurrence
  int rule = -1;
  std::vector<std::uint32_t> args;
};

struct ReductionResult {
  std::string problem;
  std::uint64_t original_length = 0;
  std::uint64_t reduced_length = 0;
  std::vector<std::pair<int, std::uint32_t>> applied;  // rule frame, node in the final proof
  std::uint32_t root = kNone;
};

// Greedy rewriting of proofs with assertion rules: a node whose conclusion
// is an instance of a rule, with every rule hypothesis available as a
// descendant conclusion, becomes a single application of the rule.
class Reducer {
 public:
  explicit Reducer(ProofStore& store);
  void add_rule(int frame);
  const std::vector<int>& rules() const { return rules_; }

  // Best rewrite of one node over all rules (saving 0 when none helps).
  Rewrite best(std::uint32_t node);
  // Fixpoint of the max-total-saving rewrite; ties by shallowest then
  // leftmost node.
  std::uint32_t reduce(std::uint32_t root);
  // Same, with one extra rule that is not kept.
  std::uint32_t reduce_with(std::uint32_t root, int extra);
  std::vector<std::pair<int, std::uint32_t>> applications(std::uint32_t root) const;

 private:
  struct Cached {
    Rewrite rw;
    std::size_t checked = 0;  // rules examined
  };
  Rewrite evaluate(std::uint32_t node, int rule);
  std::uint32_t run(std::uint32_t root, int extra);
  void index();
  void descendants(std::uint32_t node);
  std::uint32_t replace(std::uint32_t root, std::uint32_t from, std::uint32_t to);

  ProofStore& st_;
  std::vector<int> rules_;
  std::unordered_set<int> rule_set_;
  std::unordered_map<std::uint32_t, Cached> cache_;
  // Syntax parents per node, extended as the store grows.
  std::vector<std::vector<std::uint32_t>> parents_;
  std::size_t indexed_ = 0;
  // Descendant conclusions of the node under evaluation: body -> smallest proof.
  std::uint32_t desc_of_ = kNone;
  std::unordered_map<std::uint32_t, std::uint32_t> desc_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

ReductionResult reduce_proof(ProofStore& store, std::uint32_t problem, const std::vector<int>& rules);

// Problem set scored against a growing rule library. Problems are expanded
// to axioms, their own hypotheses and the base theorems; reductions are
// cached and resumed.
class Scorer {
 public:
  Scorer(const Database& db, std::shared_ptr<const FrameTable> frames, const std::vector<std::string>& problems,
         const std::vector<std::string>& base = {});
  Scorer(const GeneratedLibrary& lib, const std::vector<std::string>& problems,
         const std::vector<std::string>& base = {})
      : Scorer(lib.db(), lib.frames(), problems, base) {}

  std::size_t size() const { return labels_.size(); }
  ProofStore& store() { return *store_; }
  double d_before() const;
  double d_after() const;
  void add_rules(const std::vector<int>& frames);
  // Proof distance if one more rule were added.
  double trial(int frame);
  std::vector<ReductionResult> results() const;

 private:
  std::unique_ptr<ProofStore> store_;
  std::unique_ptr<Reducer> reducer_;
  std::vector<std::string> labels_;
  std::vector<std::uint32_t> original_, current_;
};

double proof_distance(const std::vector<std::uint64_t>& lengths);
double proof_distance(const ProofStore& store, const std::vector<std::uint32_t>& proofs);
double apr(double d_before, double d_after, std::size_t generated);

struct Precision {
  double pct = 0;
  bool undefined = false;  // empty generated library
};
Precision precision(const GeneratedLibrary& generated, const std::unordered_set<std::string>& human);

using Histogram = std::vector<std::pair<std::string, std::size_t>>;
// Buckets "1-2", "3" ... "8", ">=9" over theorems used by at least one problem.
Histogram usage_histogram(const GeneratedLibrary& generated, const std::vector<ReductionResult>& reductions);

struct Report {
  std::string dataset, split;
  std::size_t len_lg = 0;
  double d_before = 0, d_after = 0, apr = 0, precision_pct = 0;
  Histogram histogram;
  std::string to_json() const;
};

Report evaluate(const std::string& dataset, const std::string& split, const GeneratedLibrary& generated,
                Scorer& scorer, const std::unordered_set<std::string>& human);

// Smallest proof by tree size of a statement from the hypotheses, using only
// assertions whose variables are fixed by their hypotheses; searched up to
// max_size steps.
std::uint32_t shortest_proof(ProofStore& store, const Expr& goal, const std::vector<Expr>& hyps,
                             std::uint64_t max_size);

}  // namespace atg
