// Forward-deduction theorem generation: action spaces, the proof-stack
// state machine, PUCT tree search, random search, the episode loop and the
// BPE proof miner.
#pragma once

#include <atg/graph.hpp>
#include <atg/metrics.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace atg {

struct GenerationConfig {
  int max_steps = 32;
  int generations = 100;  // per episode
  int simulations = 100;
  double c_puct = 0.3;
  int library_sample = 5;
  int hypothesis_sample = 5;
  double gamma = 0.95;
  double model_weight = 0.5;  // leaf value mix of model value and rollout
  int episodes = 20;
  bool expand_all = true;  // false: one theorem per episode by training distance
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency, capped by ATG_THREADS
  // Throws std::invalid_argument on non-positive sizes, or zero simulations
  // for tree search.
  void validate(bool tree_search) const;
};

enum class ActionKind { Push, Hyp, Axiom, Theorem };
const char* kind_name(ActionKind k);

struct Action {
  ActionKind kind = ActionKind::Push;
  std::string label;  // float label, assertion label, or hypothesis text
  int frame = -1;     // Axiom and Theorem
  Sym var = -1;       // Push
  Expr hyp;           // Hyp: statement with typecode
  int arity = 0;      // operands popped
  int ref_depth = 0;  // 0 for axioms, generated theorems count their nesting
};

using ActionSpace = std::vector<Action>;

// Axioms, dataset hypotheses and the generated theorems added so far.
class TheoremLibrary {
 public:
  // Logical axioms are the manifest axioms; grammar constructors are the
  // syntax axioms declared before the last manifest statement; hypotheses
  // are the essential hypotheses of the manifest's theorems.
  TheoremLibrary(const Database& db, const SplitManifest& split);

  const Database& db() const { return lib_.db(); }
  GeneratedLibrary& generated() { return lib_; }
  const GeneratedLibrary& generated() const { return lib_; }
  const std::vector<int>& axioms() const { return axioms_; }
  const std::vector<int>& grammar() const { return grammar_; }
  const std::vector<Expr>& hypotheses() const { return hyps_; }
  const std::vector<Sym>& wff_vars() const { return wff_vars_; }
  int depth(int frame) const;  // 0 for database frames

  bool is_new(const std::string& key) const { return !lib_.known(key); }
  std::optional<std::size_t> add(const ProofStore& src, std::uint32_t root, int episode);

 private:
  GeneratedLibrary lib_;
  std::vector<int> axioms_, grammar_;
  std::vector<Expr> hyps_;
  std::vector<Sym> wff_vars_;
  std::unordered_map<int, int> depth_;
};

// Every axiom, grammar constructor and variable push, plus sampled library
// theorems and hypotheses drawn from intermediate conclusions of their
// proofs and from the dataset hypotheses.
ActionSpace sample_action_space(const TheoremLibrary& lib, const GenerationConfig& cfg, std::mt19937_64& rng);

struct State {
  std::vector<std::uint32_t> stack;  // node ids in the generation store
  std::vector<int> history;          // action indices
};

// Pushes or applies; nothing on underflow or mismatch.
std::optional<State> apply_action(ProofStore& store, const State& s, const ActionSpace& space, int action);

// A single provable item produced by an application.
bool is_terminal(const ProofStore& store, const State& s);

struct SearchNode {
  State state;
  int parent = -1;
  int action = -1;            // action leading here
  std::vector<int> children;  // node indices, in expansion order
  std::vector<int> untried;   // actions not yet expanded, in expansion order
  std::vector<double> priors; // per action of the space
  std::vector<double> values; // model value per action of the space
  bool evaluated = false;     // priors computed
  double prior = 0;
  double value_prior = 0;
  int visits = 0;
  double value_sum = 0;
  bool terminal = false;
  double reward = 0;
  double q() const { return visits ? value_sum / visits : 0.0; }
};

// v + c * pi * sqrt(total) / (1 + visits).
double puct(double v, double pi, double c, int visits, int total_visits);

struct Prediction {
  std::vector<double> pi;  // over the given actions, sums to 1
  std::vector<double> v;   // per action, in [0, 1]
  double value = 0;        // sum of pi * v
};

class PolicyValue {
 public:
  virtual ~PolicyValue() = default;
  virtual Prediction predict(const ProofStore& store, const ActionSpace& space, const State& s,
                             const std::vector<int>& actions) const = 0;
};

// Uniform priors and neutral values.
class UniformPolicy : public PolicyValue {
 public:
  Prediction predict(const ProofStore& store, const ActionSpace& space, const State& s,
                     const std::vector<int>& actions) const override;
};

// A traveled state with the normalized visit counts of its moves.
struct TraceStep {
  State state;
  std::vector<int> actions;
  std::vector<double> visits;
  int chosen = -1;
};

struct SearchTrace {
  std::shared_ptr<ProofStore> store;
  std::shared_ptr<const ActionSpace> space;
  std::vector<TraceStep> steps;
  double reward = 0;
};

struct Generated {
  std::shared_ptr<ProofStore> store;
  std::uint32_t root = kNone;
  std::string key;
  std::vector<int> actions;
};

enum class Method { Random, Mcts, MctsPvn };
Method parse_method(const std::string& name);  // random | mcts | mcts_pvn
const char* method_name(Method m);

struct SearchStats {
  std::size_t simulations = 0, expansions = 0, rollouts = 0;
  std::vector<int> root_visits;  // visits per expanded root child after the first move
};

// One generation from the empty stack. Without a policy: uniform random
// actions, an invalid action ends the attempt. With one: PUCT tree search
// with `simulations` simulations per move; leaf values are rollout rewards,
// mixed with the model value when use_model_value is set. Returns a theorem
// not yet in the library.
std::optional<Generated> generate_once(const PolicyValue* policy, bool use_model_value, const TheoremLibrary& lib,
                                       std::shared_ptr<const ActionSpace> space, const GenerationConfig& cfg,
                                       std::mt19937_64& rng, SearchTrace* trace = nullptr,
                                       SearchStats* stats = nullptr);

struct EpisodeRecord {
  int episode = 0;
  std::size_t new_theorems = 0;
  std::size_t library_size = 0;
  double apr_train = 0;
  std::string to_json() const;
};

struct RunResult {
  std::vector<EpisodeRecord> curve;
  std::vector<SearchTrace> traces;  // searches of the latest episode
};

// Episodes of `generations` parallel generations over one sampled action
// space; new theorems join the library at the episode boundary (all of them,
// or the one minimizing the training proof distance). Stops after
// cfg.episodes or at the first episode without a new theorem. The hook runs
// after each episode.
RunResult run_episodes(Method method, TheoremLibrary& lib, const SplitManifest& train, const GenerationConfig& cfg,
                       const PolicyValue* policy = nullptr,
                       const std::function<void(int, RunResult&)>& after_episode = {});

// cfg.threads or hardware concurrency, capped by ATG_THREADS.
int thread_count(const GenerationConfig& cfg);

// ---------------------------------------------------------------- BPE

struct MinedSegment {
  std::vector<std::string> labels;  // proof text of the subproof
  int source = -1;                  // corpus theorem where it was first closed
  std::size_t occurrences = 0;      // verbatim occurrences in the corpus
  std::size_t proofs = 0;           // corpus proofs containing it
};

// Byte-pair merging over decompressed corpus proofs until every adjacent
// pair occurs once. A merged pair ending in an assertion is widened leftward
// to the complete subproof it closes, which becomes the merged element.
// Returns the distinct subproofs found in at least two corpus proofs, in
// discovery order.
std::vector<MinedSegment> bpe_segments(const Database& db, const std::vector<std::string>& corpus);

// Runs a label sequence through the stack machine; throws ProofError unless
// exactly one item remains.
std::uint32_t replay(ProofStore& store, const std::vector<std::string>& labels);

// Adds every mined subproof not alpha-equivalent to an axiom as a generated
// theorem (syntax subproofs become syntax theorems). Returns the number
// added.
std::size_t bpe_mine(const Database& db, const std::vector<std::string>& corpus, GeneratedLibrary& out);

}  // namespace atg
