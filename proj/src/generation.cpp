#include <atg/generation.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

namespace atg {

void GenerationConfig::validate(bool tree_search) const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(max_steps, "max_steps");
  positive(generations, "generations");
  positive(episodes, "episodes");
  if (library_sample < 0 || hypothesis_sample < 0) throw std::invalid_argument("sample sizes must be non-negative");
  if (tree_search) positive(simulations, "simulations");
  if (!(c_puct >= 0) || !std::isfinite(c_puct)) throw std::invalid_argument("c_puct must be a non-negative number");
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(model_weight >= 0 && model_weight <= 1)) throw std::invalid_argument("model_weight must be in [0, 1]");
}

const char* kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Push: return "push";
    case ActionKind::Hyp: return "hyp";
    case ActionKind::Axiom: return "axiom";
    case ActionKind::Theorem: return "theorem";
  }
  return "?";
}

// ---------------------------------------------------------------- library

TheoremLibrary::TheoremLibrary(const Database& db, const SplitManifest& split) : lib_(db, "gen") {
  int last = -1;
  for (auto* v : {&split.axioms, &split.library, &split.problems})
    for (auto& l : *v) last = std::max(last, db.frame_id(l));
  for (auto& l : split.axioms) {
    int f = db.frame_id(l);
    if (db.frames[static_cast<std::size_t>(f)].dv.empty()) axioms_.push_back(f);
  }
  for (auto& k : assertion_keys(db, true, false)) lib_.reserve(k);
  for (int f : db.syntax_frames())
    if (f < last) grammar_.push_back(f);
  std::set<Expr> seen;
  for (auto* v : {&split.library, &split.problems})
    for (auto& l : *v)
      for (auto& h : db.frames[static_cast<std::size_t>(db.frame_id(l))].hyps)
        if (seen.insert(h).second) hyps_.push_back(h);
  std::set<Sym> used;
  for (int f : grammar_)
    for (Sym v : db.frames[static_cast<std::size_t>(f)].vars) used.insert(db.var_typecode(v));
  for (Sym v : db.variables())
    if (db.var_rank(v) >= 0 && used.count(db.var_typecode(v))) wff_vars_.push_back(v);
  std::sort(wff_vars_.begin(), wff_vars_.end(), [&](Sym a, Sym b) { return db.var_rank(a) < db.var_rank(b); });
}

int TheoremLibrary::depth(int frame) const {
  auto it = depth_.find(frame);
  return it == depth_.end() ? 0 : it->second;
}

std::optional<std::size_t> TheoremLibrary::add(const ProofStore& src, std::uint32_t root, int episode) {
  auto idx = lib_.add(src, root, episode);
  if (!idx) return idx;
  const ProofStore& st = lib_.store();
  int d = 0;
  std::vector<std::uint32_t> todo{lib_[*idx].proof};
  std::set<std::uint32_t> seen;
  while (!todo.empty()) {
    auto n = todo.back();
    todo.pop_back();
    if (!seen.insert(n).second || !st.provable(n)) continue;
    if (st.node(n).kind == NodeKind::App) d = std::max(d, depth(st.node(n).label));
    for (auto k : st.kids(n)) todo.push_back(k);
  }
  depth_[lib_[*idx].frame] = d + 1;
  return idx;
}

// ---------------------------------------------------------------- actions

ActionSpace sample_action_space(const TheoremLibrary& lib, const GenerationConfig& cfg, std::mt19937_64& rng) {
  const Database& db = lib.db();
  const GeneratedLibrary& gen = lib.generated();
  ActionSpace out;
  for (int f : lib.axioms()) {
    const Frame& fr = db.frames[static_cast<std::size_t>(f)];
    out.push_back({ActionKind::Axiom, fr.label, f, -1, {}, static_cast<int>(fr.arity()), 0});
  }
  for (int f : lib.grammar()) {
    const Frame& fr = db.frames[static_cast<std::size_t>(f)];
    out.push_back({ActionKind::Axiom, fr.label, f, -1, {}, static_cast<int>(fr.arity()), 0});
  }
  for (Sym v : lib.wff_vars()) out.push_back({ActionKind::Push, db.var_float(v), -1, v, {}, 0, 0});

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < gen.size(); ++i)
    if (!gen.frame(i).syntax) pool.push_back(i);
  std::vector<std::size_t> picked;
  std::sample(pool.begin(), pool.end(), std::back_inserter(picked), static_cast<std::size_t>(cfg.library_sample), rng);
  std::set<Expr> hyp_pool;
  const ProofStore& st = gen.store();
  for (auto i : picked) {
    const Frame& fr = gen.frame(i);
    out.push_back({ActionKind::Theorem, fr.label, gen[i].frame, -1, {}, static_cast<int>(fr.arity()),
                   lib.depth(gen[i].frame)});
    std::vector<std::uint32_t> todo(st.kids(gen[i].proof).begin(), st.kids(gen[i].proof).end());
    std::set<std::uint32_t> seen;
    while (!todo.empty()) {
      auto n = todo.back();
      todo.pop_back();
      if (!st.provable(n) || !seen.insert(n).second) continue;
      hyp_pool.insert(st.statement(n));
      auto ks = st.kids(n);
      todo.insert(todo.end(), ks.begin(), ks.end());
    }
  }
  hyp_pool.insert(lib.hypotheses().begin(), lib.hypotheses().end());
  std::vector<Expr> hyps;
  std::sample(hyp_pool.begin(), hyp_pool.end(), std::back_inserter(hyps), static_cast<std::size_t>(cfg.hypothesis_sample),
              rng);
  for (auto& h : hyps) out.push_back({ActionKind::Hyp, db.text(h), -1, -1, h, 0, 0});
  return out;
}

std::optional<State> apply_action(ProofStore& store, const State& s, const ActionSpace& space, int action) {
  if (action < 0 || static_cast<std::size_t>(action) >= space.size()) return std::nullopt;
  const Action& a = space[static_cast<std::size_t>(action)];
  State t = s;
  switch (a.kind) {
    case ActionKind::Push:
      t.stack.push_back(store.var(a.var));
      break;
    case ActionKind::Hyp:
      t.stack.push_back(store.hyp(store.from_expr(a.hyp)));
      break;
    default: {
      auto k = static_cast<std::size_t>(a.arity);
      if (t.stack.size() < k) return std::nullopt;
      std::uint32_t r = store.apply(a.frame, {t.stack.data() + t.stack.size() - k, k});
      if (r == kNone) return std::nullopt;
      t.stack.resize(t.stack.size() - k);
      t.stack.push_back(r);
    }
  }
  t.history.push_back(action);
  return t;
}

bool is_terminal(const ProofStore& store, const State& s) {
  return s.stack.size() == 1 && store.node(s.stack[0]).kind == NodeKind::App;
}

double puct(double v, double pi, double c, int visits, int total_visits) {
  return v + c * pi * std::sqrt(static_cast<double>(total_visits)) / (1.0 + visits);
}

Prediction UniformPolicy::predict(const ProofStore&, const ActionSpace&, const State&,
                                  const std::vector<int>& actions) const {
  Prediction p;
  double u = actions.empty() ? 0.0 : 1.0 / static_cast<double>(actions.size());
  p.pi.assign(actions.size(), u);
  p.v.assign(actions.size(), 0.5);
  p.value = actions.empty() ? 0.0 : 0.5;
  return p;
}

Method parse_method(const std::string& name) {
  if (name == "random") return Method::Random;
  if (name == "mcts") return Method::Mcts;
  if (name == "mcts_pvn" || name == "pvn") return Method::MctsPvn;
  throw std::invalid_argument("unknown method: " + name);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Random: return "random";
    case Method::Mcts: return "mcts";
    case Method::MctsPvn: return "mcts_pvn";
  }
  return "?";
}

// ---------------------------------------------------------------- search

namespace {

class Search {
 public:
  Search(const PolicyValue* policy, bool model_value, const TheoremLibrary& lib, const ActionSpace& space,
         const GenerationConfig& cfg, std::mt19937_64& rng, ProofStore& store, SearchStats* stats)
      : policy_(policy), model_value_(model_value), lib_(lib), space_(space), cfg_(cfg), rng_(rng), st_(store),
        stats_(stats) {}

  // Reward of a terminal state: 1 for a statement not yet in the library.
  double reward(const State& s) {
    std::uint32_t r = s.stack[0];
    auto it = keys_.find(r);
    if (it == keys_.end()) it = keys_.emplace(r, alpha_key_of(st_, r)).first;
    return lib_.is_new(it->second) ? 1.0 : 0.0;
  }

  const std::string& key(std::uint32_t root) {
    auto it = keys_.find(root);
    if (it == keys_.end()) it = keys_.emplace(root, alpha_key_of(st_, root)).first;
    return it->second;
  }

  // Uniformly random valid moves until a terminal state or the step limit.
  double rollout(State s) {
    if (stats_) ++stats_->rollouts;
    std::vector<int> order(space_.size());
    while (static_cast<int>(s.history.size()) < cfg_.max_steps) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng_);
      std::optional<State> next;
      for (int a : order)
        if ((next = apply_action(st_, s, space_, a))) break;
      if (!next) return 0.0;
      s = std::move(*next);
      if (is_terminal(st_, s)) return reward(s);
    }
    return 0.0;
  }

  void evaluate(int id) {
    SearchNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.evaluated) return;
    std::vector<int> all(space_.size());
    std::iota(all.begin(), all.end(), 0);
    Prediction p = policy_->predict(st_, space_, n.state, all);
    if (p.pi.size() != all.size() || p.v.size() != all.size())
      throw std::runtime_error("policy returned a prediction of the wrong size");
    SearchNode& m = nodes_[static_cast<std::size_t>(id)];
    m.priors = std::move(p.pi);
    m.values = std::move(p.v);
    m.untried = all;
    std::stable_sort(m.untried.begin(), m.untried.end(), [&](int a, int b) {
      if (m.priors[static_cast<std::size_t>(a)] != m.priors[static_cast<std::size_t>(b)])
        return m.priors[static_cast<std::size_t>(a)] > m.priors[static_cast<std::size_t>(b)];
      return space_[static_cast<std::size_t>(a)].label < space_[static_cast<std::size_t>(b)].label;
    });
    m.evaluated = true;
  }

  // Adds the next valid untried child; -1 when none is left.
  int expand(int id) {
    for (;;) {
      SearchNode& n = nodes_[static_cast<std::size_t>(id)];
      if (n.untried.empty()) return -1;
      int a = n.untried.front();
      n.untried.erase(n.untried.begin());
      auto next = apply_action(st_, n.state, space_, a);
      if (!next) continue;
      SearchNode c;
      c.state = std::move(*next);
      c.parent = id;
      c.action = a;
      c.prior = n.priors[static_cast<std::size_t>(a)];
      c.value_prior = n.values[static_cast<std::size_t>(a)];
      c.terminal = is_terminal(st_, c.state);
      if (c.terminal) c.reward = reward(c.state);
      int cid = static_cast<int>(nodes_.size());
      nodes_[static_cast<std::size_t>(id)].children.push_back(cid);
      nodes_.push_back(std::move(c));
      if (stats_) ++stats_->expansions;
      return cid;
    }
  }

  void simulate(int root) {
    if (stats_) ++stats_->simulations;
    int id = root;
    double value = 0;
    for (;;) {
      SearchNode& n = nodes_[static_cast<std::size_t>(id)];
      if (n.terminal) {
        value = n.reward;
        break;
      }
      if (static_cast<int>(n.state.history.size()) >= cfg_.max_steps) {
        value = 0;
        break;
      }
      evaluate(id);
      int c = expand(id);
      if (c >= 0) {
        SearchNode& leaf = nodes_[static_cast<std::size_t>(c)];
        if (leaf.terminal) {
          value = leaf.reward;
        } else {
          double r = rollout(leaf.state);
          value = model_value_ ? cfg_.model_weight * leaf.value_prior + (1 - cfg_.model_weight) * r : r;
        }
        id = c;
        break;
      }
      const SearchNode& m = nodes_[static_cast<std::size_t>(id)];
      if (m.children.empty()) {
        value = 0;
        break;
      }
      int total = 0;
      for (int k : m.children) total += nodes_[static_cast<std::size_t>(k)].visits;
      int best = -1;
      double best_score = -1e300;
      for (int k : m.children) {
        const SearchNode& ch = nodes_[static_cast<std::size_t>(k)];
        double sc = puct(ch.q(), ch.prior, cfg_.c_puct, ch.visits, total);
        if (sc > best_score) {
          best_score = sc;
          best = k;
        }
      }
      id = best;
    }
    for (int k = id; k >= 0; k = nodes_[static_cast<std::size_t>(k)].parent) {
      ++nodes_[static_cast<std::size_t>(k)].visits;
      nodes_[static_cast<std::size_t>(k)].value_sum += value;
    }
  }

  std::optional<Generated> run(SearchTrace* trace) {
    nodes_.clear();
    nodes_.emplace_back();
    int root = 0;
    while (static_cast<int>(nodes_[static_cast<std::size_t>(root)].state.history.size()) < cfg_.max_steps) {
      for (int i = 0; i < cfg_.simulations; ++i) simulate(root);
      const SearchNode& r = nodes_[static_cast<std::size_t>(root)];
      if (r.children.empty()) return std::nullopt;
      if (stats_ && stats_->root_visits.empty())
        for (int k : r.children) stats_->root_visits.push_back(nodes_[static_cast<std::size_t>(k)].visits);
      int best = r.children.front();
      for (int k : r.children)
        if (nodes_[static_cast<std::size_t>(k)].visits > nodes_[static_cast<std::size_t>(best)].visits) best = k;
      if (trace) {
        TraceStep step;
        step.state = r.state;
        step.chosen = nodes_[static_cast<std::size_t>(best)].action;
        double total = 0;
        for (int k : r.children) total += nodes_[static_cast<std::size_t>(k)].visits;
        for (int k : r.children) {
          step.actions.push_back(nodes_[static_cast<std::size_t>(k)].action);
          step.visits.push_back(nodes_[static_cast<std::size_t>(k)].visits / total);
        }
        trace->steps.push_back(std::move(step));
      }
      root = best;
      const SearchNode& n = nodes_[static_cast<std::size_t>(root)];
      if (n.terminal) {
        if (trace) trace->reward = n.reward;
        if (n.reward <= 0) return std::nullopt;
        return Generated{nullptr, n.state.stack[0], key(n.state.stack[0]), n.state.history};
      }
    }
    return std::nullopt;
  }

  std::optional<Generated> random(SearchTrace* trace) {
    State s;
    std::vector<int> order(space_.size());
    while (static_cast<int>(s.history.size()) < cfg_.max_steps) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng_);
      std::optional<State> next;
      int a = -1;
      for (int b : order)
        if ((next = apply_action(st_, s, space_, a = b))) break;
      if (!next) return std::nullopt;
      if (trace) trace->steps.push_back({s, {a}, {1.0}, a});
      s = std::move(*next);
      if (is_terminal(st_, s)) {
        double r = reward(s);
        if (trace) trace->reward = r;
        if (r <= 0) return std::nullopt;
        return Generated{nullptr, s.stack[0], key(s.stack[0]), s.history};
      }
    }
    return std::nullopt;
  }

 private:
  const PolicyValue* policy_;
  bool model_value_;
  const TheoremLibrary& lib_;
  const ActionSpace& space_;
  const GenerationConfig& cfg_;
  std::mt19937_64& rng_;
  ProofStore& st_;
  SearchStats* stats_;
  std::vector<SearchNode> nodes_;
  std::unordered_map<std::uint32_t, std::string> keys_;
};

}  // namespace

std::optional<Generated> generate_once(const PolicyValue* policy, bool use_model_value, const TheoremLibrary& lib,
                                       std::shared_ptr<const ActionSpace> space, const GenerationConfig& cfg,
                                       std::mt19937_64& rng, SearchTrace* trace, SearchStats* stats) {
  auto store = std::make_shared<ProofStore>(lib.generated().frames());
  if (trace) {
    trace->store = store;
    trace->space = space;
    trace->steps.clear();
    trace->reward = 0;
  }
  if (space->empty()) return std::nullopt;
  Search search(policy, use_model_value, lib, *space, cfg, rng, *store, stats);
  std::optional<Generated> g;
  if (!policy) {
    g = search.random(trace);
  } else {
    if (cfg.simulations <= 0) return std::nullopt;
    g = search.run(trace);
  }
  if (g) g->store = store;
  return g;
}

// ---------------------------------------------------------------- episodes

std::string EpisodeRecord::to_json() const {
  nlohmann::ordered_json j;
  j["episode"] = episode;
  j["new_theorems"] = new_theorems;
  j["library_size"] = library_size;
  j["APR_train"] = apr_train;
  return j.dump();
}

int thread_count(const GenerationConfig& cfg) {
  int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ATG_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(n, 1);
}

RunResult run_episodes(Method method, TheoremLibrary& lib, const SplitManifest& train, const GenerationConfig& cfg,
                       const PolicyValue* policy, const std::function<void(int, RunResult&)>& after_episode) {
  cfg.validate(method != Method::Random);
  UniformPolicy uniform;
  const PolicyValue* pv = method == Method::Random ? nullptr : (policy ? policy : &uniform);
  bool model_value = method == Method::MctsPvn;
  Scorer scorer(lib.generated(), train.problems, train.library);
  scorer.add_rules(lib.generated().rule_frames());
  RunResult result;
  int threads = thread_count(cfg);

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(ep));
    auto space = std::make_shared<const ActionSpace>(sample_action_space(lib, cfg, rng));
    std::vector<std::optional<Generated>> found(static_cast<std::size_t>(cfg.generations));
    std::vector<SearchTrace> traces(static_cast<std::size_t>(cfg.generations));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
      for (int g; (g = next++) < cfg.generations;) {
        try {
          std::mt19937_64 grng(cfg.seed * 0x9E3779B97F4A7C15ull ^ (static_cast<std::uint64_t>(ep) << 32) ^
                               static_cast<std::uint64_t>(g + 1) * 0xBF58476D1CE4E5B9ull);
          found[static_cast<std::size_t>(g)] =
              generate_once(pv, model_value, lib, space, cfg, grng, &traces[static_cast<std::size_t>(g)]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < std::min(threads, cfg.generations); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    // Distinct new statements in generation order.
    std::vector<const Generated*> cands;
    std::set<std::string> keys;
    for (auto& f : found)
      if (f && keys.insert(f->key).second) cands.push_back(&*f);

    std::size_t added = 0;
    if (cfg.expand_all) {
      for (auto* c : cands)
        if (lib.add(*c->store, c->root, ep)) ++added;
    } else if (!cands.empty()) {
      const Generated* best = nullptr;
      double best_d = 0;
      for (auto* c : cands) {
        std::vector<Expr> hyps;
        alpha_key_of(*c->store, c->root, &hyps);
        Frame f = make_frame(lib.db(), "trial" + std::to_string(lib.generated().frames()->size()), hyps,
                             c->store->statement(c->root));
        int id = lib.generated().frames()->add(std::move(f));
        double d = scorer.trial(id);
        if (!best || d < best_d) {
          best = c;
          best_d = d;
        }
      }
      if (lib.add(*best->store, best->root, ep)) ++added;
    }
    scorer.add_rules(lib.generated().rule_frames());
    result.curve.push_back({ep, added, lib.generated().size(),
                            apr(scorer.d_before(), scorer.d_after(), lib.generated().size())});
    result.traces = std::move(traces);
    if (after_episode) after_episode(ep, result);
    if (added == 0) break;
  }
  return result;
}

}  // namespace atg
