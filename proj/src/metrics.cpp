#include "atg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace atg {

// ---------------------------------------------------------------- expand

Expander::Expander(ProofStore& store, std::function<bool(int)> keep) : st_(store), keep_(std::move(keep)) {}

Expander::Expander(ProofStore& store)
    : Expander(store, [&store](int f) { return !store.frames().is_db(f) || !store.db().provable[f]; }) {}

std::uint32_t Expander::theorem(int frame) {
  auto it = schema_.find(frame);
  if (it != schema_.end()) return it->second;
  std::uint32_t r = expand(verify_into(st_, frame));
  schema_.emplace(frame, r);
  return r;
}

std::uint32_t Expander::instantiate(std::uint32_t s, std::unordered_map<Sym, std::uint32_t>& vars,
                                    std::unordered_map<std::uint32_t, std::uint32_t>& hyps,
                                    std::unordered_map<std::uint32_t, std::uint32_t>& memo) {
  auto it = memo.find(s);
  if (it != memo.end()) return it->second;
  const Node n = st_.node(s);
  std::uint32_t r;
  if (n.kind == NodeKind::Var) {
    auto v = vars.find(n.label);
    r = v == vars.end() ? s : v->second;
  } else if (n.kind == NodeKind::Hyp) {
    r = hyps.at(n.concl);
  } else {
    auto ks = st_.kids(s);
    std::vector<std::uint32_t> kids(ks.begin(), ks.end());
    for (auto& k : kids) k = instantiate(k, vars, hyps, memo);
    if (n.kind == NodeKind::Syn) {
      r = st_.syn(n.label, kids);
    } else {
      std::string why;
      r = st_.apply(n.label, kids, &why);
      if (r == kNone) throw ProofError("inlining " + st_.frames()[n.label].label + " failed: " + why);
    }
  }
  memo.emplace(s, r);
  return r;
}

std::uint32_t Expander::expand(std::uint32_t id) {
  auto it = memo_.find(id);
  if (it != memo_.end()) return it->second;
  const Node n = st_.node(id);
  std::uint32_t r = id;
  if (n.kind == NodeKind::App) {
    auto ks = st_.kids(id);
    std::vector<std::uint32_t> kids(ks.begin(), ks.end());
    for (auto& k : kids) k = expand(k);
    if (!keep_(n.label)) {
      std::uint32_t schema = theorem(n.label);
      const Frame& f = st_.frames()[n.label];
      std::unordered_map<Sym, std::uint32_t> vars;
      std::unordered_map<std::uint32_t, std::uint32_t> hyps, memo;
      for (std::size_t i = 0; i < f.order.size(); ++i) {
        auto [fl, j] = f.order[i];
        if (fl) vars[f.vars[j]] = kids[i];
        else hyps[st_.from_expr(f.hyps[j])] = kids[i];
      }
      r = instantiate(schema, vars, hyps, memo);
    } else {
      r = st_.apply(n.label, kids);
      if (r == kNone) throw ProofError("re-applying " + st_.frames()[n.label].label + " failed");
    }
  }
  memo_.emplace(id, r);
  return r;
}

// ---------------------------------------------------------------- library

GeneratedLibrary::GeneratedLibrary(const Database& db, std::string prefix)
    : db_(&db), prefix_(std::move(prefix)), frames_(std::make_shared<FrameTable>(db)) {
  store_ = std::make_unique<ProofStore>(std::shared_ptr<const FrameTable>(frames_));
}

namespace {

// Distinct hypothesis leaves in proof order.
std::vector<std::uint32_t> hyp_leaves(const ProofStore& st, std::uint32_t root) {
  std::vector<std::uint32_t> out;
  std::unordered_set<std::uint32_t> seen;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    if (!st.provable(id) || !seen.insert(id).second) return;
    if (st.node(id).kind == NodeKind::Hyp) {
      out.push_back(id);
      return;
    }
    for (auto k : st.kids(id)) self(self, k);
  };
  rec(rec, root);
  return out;
}

}  // namespace

std::string alpha_key_of(const ProofStore& st, std::uint32_t root, std::vector<Expr>* hyps) {
  std::vector<Expr> hs;
  for (auto h : hyp_leaves(st, root)) hs.push_back(st.statement(h));
  std::string key = alpha_key(st.db(), hs, st.statement(root));
  if (hyps) *hyps = std::move(hs);
  return key;
}

std::optional<std::size_t> GeneratedLibrary::add(const ProofStore& src, std::uint32_t root, int episode) {
  if (root == kNone || root >= src.node_count() || src.node(root).kind == NodeKind::Var)
    throw ProofError("generated theorem has no proof");
  std::uint32_t r = store_->import(src, root);
  std::vector<Expr> hyps;
  std::string key = alpha_key_of(*store_, r, &hyps);
  if (known(key)) return std::nullopt;
  std::string label;
  std::size_t n = items_.size() + 1;
  do {
    label = prefix_ + std::to_string(n++);
  } while (db_->find_frame(label) || db_->find_hyp(label) || frames_->find(label));
  Frame f = make_frame(*db_, label, hyps, store_->statement(r));
  int id = frames_->add(std::move(f));
  keys_.insert(key);
  items_.push_back({id, r, episode, key});
  return items_.size() - 1;
}

std::vector<int> GeneratedLibrary::rule_frames() const {
  std::vector<int> out;
  for (auto& t : items_)
    if (!(*frames_)[t.frame].syntax) out.push_back(t.frame);
  return out;
}

std::string GeneratedLibrary::emit() const {
  std::string out;
  for (auto& t : items_) out += emit_theorem((*frames_)[t.frame], *store_, t.proof);
  return out;
}

std::unordered_set<std::string> assertion_keys(const Database& db, bool axioms, bool theorems) {
  std::unordered_set<std::string> out;
  for (std::size_t i = 0; i < db.frames.size(); ++i) {
    const Frame& f = db.frames[i];
    if (f.syntax) continue;
    if (db.provable[i] ? theorems : axioms) out.insert(alpha_key(db, f.hyps, f.concl));
  }
  return out;
}

// ---------------------------------------------------------------- reduce

Reducer::Reducer(ProofStore& store) : st_(store) {}

void Reducer::add_rule(int frame) {
  if (rule_set_.insert(frame).second) rules_.push_back(frame);
}

void Reducer::index() {
  std::size_t n = st_.node_count();
  if (n == indexed_) return;
  parents_.resize(n);
  for (std::size_t id = indexed_; id < n; ++id) {
    auto i = static_cast<std::uint32_t>(id);
    if (st_.node(i).kind != NodeKind::Syn) continue;
    for (auto k : st_.kids(i))
      if (parents_[k].empty() || parents_[k].back() != i) parents_[k].push_back(i);
  }
  indexed_ = n;
}

void Reducer::descendants(std::uint32_t node) {
  if (desc_of_ == node) return;
  desc_of_ = node;
  desc_.clear();
  if (stamp_.size() < st_.node_count()) stamp_.resize(st_.node_count() * 2, 0);
  ++epoch_;
  std::vector<std::uint32_t> todo;
  for (auto k : st_.kids(node))
    if (st_.provable(k)) todo.push_back(k);
  while (!todo.empty()) {
    std::uint32_t x = todo.back();
    todo.pop_back();
    if (stamp_[x] == epoch_) continue;
    stamp_[x] = epoch_;
    auto [it, fresh] = desc_.try_emplace(st_.node(x).concl, x);
    if (!fresh && st_.size(x) < st_.size(it->second)) it->second = x;
    for (auto k : st_.kids(x))
      if (st_.provable(k) && stamp_[k] != epoch_) todo.push_back(k);
  }
}

namespace {

struct Leaf {
  int slot;
  std::vector<std::pair<int, int>> path;  // (syntax frame, kid index) from the root
};

std::vector<Leaf> leaves_of(const Pattern& p, const FrameTable& ft) {
  std::vector<Leaf> out;
  std::vector<std::pair<int, int>> path;
  std::size_t pos = 0;
  auto rec = [&](auto&& self) -> void {
    std::int32_t c = p.code[pos++];
    if (c < 0) {
      out.push_back({-c - 1, path});
      return;
    }
    std::size_t k = ft[c].vars.size();
    for (std::size_t i = 0; i < k; ++i) {
      path.emplace_back(c, static_cast<int>(i));
      self(self);
      path.pop_back();
    }
  };
  rec(rec);
  return out;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return a + b < a ? ~0ull : a + b; }

}  // namespace

Rewrite Reducer::evaluate(std::uint32_t node, int rule) {
  const Node n = st_.node(node);
  if (n.kind != NodeKind::App || n.size <= 1) return {};
  const Frame& f = st_.frames()[rule];
  if (f.syntax || !f.dv.empty() || f.concl[0] != n.tc) return {};
  if (n.size <= 1 + f.hyps.size()) return {};
  std::vector<std::uint32_t> sigma(f.vars.size(), kNone);
  if (!st_.match(f.concl_pat, n.concl, sigma, f.var_tc)) return {};
  if (!f.hyps.empty()) {
    index();
    descendants(node);
  }

  const std::size_t nh = f.hyps.size();
  std::vector<std::vector<Leaf>> leaves(nh);
  for (std::size_t h = 0; h < nh; ++h) leaves[h] = leaves_of(f.hyp_pats[h], st_.frames());

  std::uint64_t best_cost = n.size - 1;  // must beat this to save anything
  std::vector<std::uint32_t> best_sigma, best_chosen;
  bool found = false;
  std::vector<std::uint32_t> chosen(nh, kNone);
  std::size_t budget = 20000;

  // Candidate bodies for a partly bound hypothesis pattern.
  auto candidates = [&](std::size_t h, const std::vector<std::uint32_t>& sg) {
    std::vector<std::uint32_t> best;
    bool have = false;
    for (auto& lf : leaves[h]) {
      std::uint32_t x = sg[static_cast<std::size_t>(lf.slot)];
      if (x == kNone) continue;
      std::vector<std::uint32_t> set{x};
      for (auto it = lf.path.rbegin(); it != lf.path.rend() && !set.empty(); ++it) {
        std::vector<std::uint32_t> up;
        for (auto y : set)
          for (auto p : parents_[y]) {
            const Node pn = st_.node(p);
            if (pn.label == it->first && st_.kids(p)[static_cast<std::size_t>(it->second)] == y) up.push_back(p);
          }
        std::sort(up.begin(), up.end());
        up.erase(std::unique(up.begin(), up.end()), up.end());
        set.swap(up);
      }
      if (!have || set.size() < best.size()) {
        best.swap(set);
        have = true;
      }
      if (best.size() <= 1) break;
    }
    if (!have) {
      for (auto& [body, d] : desc_) best.push_back(body);
      std::sort(best.begin(), best.end());
    }
    return best;
  };

  auto rec = [&](auto&& self, const std::vector<std::uint32_t>& sg, std::uint64_t cost, std::size_t left) -> void {
    if (budget == 0) return;
    --budget;
    if (cost + left >= best_cost) return;
    if (left == 0) {
      best_cost = cost;
      found = true;
      best_sigma = sg;
      best_chosen = chosen;
      return;
    }
    // Fully bound hypotheses first, then the one with fewest free slots.
    std::size_t pick = nh;
    std::size_t fewest = ~std::size_t{0};
    for (std::size_t h = 0; h < nh; ++h) {
      if (chosen[h] != kNone) continue;
      std::size_t unbound = 0;
      for (auto& lf : leaves[h]) unbound += sg[static_cast<std::size_t>(lf.slot)] == kNone;
      if (unbound < fewest) {
        fewest = unbound;
        pick = h;
      }
    }
    if (fewest == 0) {
      std::uint32_t body = st_.find_instance(f.hyp_pats[pick], sg);
      if (body == kNone) return;
      auto it = desc_.find(body);
      if (it == desc_.end()) return;
      chosen[pick] = it->second;
      self(self, sg, sat_add(cost, st_.size(it->second)), left - 1);
      chosen[pick] = kNone;
      return;
    }
    for (auto body : candidates(pick, sg)) {
      auto it = desc_.find(body);
      if (it == desc_.end()) continue;
      std::vector<std::uint32_t> s2 = sg;
      if (!st_.match(f.hyp_pats[pick], body, s2, f.var_tc)) continue;
      chosen[pick] = it->second;
      self(self, s2, sat_add(cost, st_.size(it->second)), left - 1);
      chosen[pick] = kNone;
      if (budget == 0) break;
    }
  };
  rec(rec, sigma, 0, nh);
  if (!found) return {};
  for (auto v : best_sigma)
    if (v == kNone) return {};
  Rewrite rw;
  rw.rule = rule;
  rw.saving = static_cast<std::int64_t>(std::min<std::uint64_t>(n.size - 1 - best_cost, INT64_MAX));
  for (auto [fl, k] : f.order) rw.args.push_back(fl ? best_sigma[k] : best_chosen[k]);
  return rw;
}

Rewrite Reducer::best(std::uint32_t node) {
  Cached& c = cache_[node];
  while (c.checked < rules_.size()) {
    Rewrite rw = evaluate(node, rules_[c.checked++]);
    if (rw.saving > c.rw.saving) c.rw = std::move(rw);
  }
  return c.rw;
}

std::uint32_t Reducer::replace(std::uint32_t root, std::uint32_t from, std::uint32_t to) {
  std::unordered_map<std::uint32_t, std::uint32_t> memo;
  auto rec = [&](auto&& self, std::uint32_t x) -> std::uint32_t {
    if (x == from) return to;
    if (x < from || st_.node(x).kind != NodeKind::App) return x;
    auto it = memo.find(x);
    if (it != memo.end()) return it->second;
    auto ks = st_.kids(x);
    std::vector<std::uint32_t> kids(ks.begin(), ks.end());
    bool changed = false;
    for (auto& k : kids) {
      std::uint32_t nk = self(self, k);
      changed = changed || nk != k;
      k = nk;
    }
    std::uint32_t r = x;
    if (changed) {
      std::string why;
      r = st_.apply(st_.node(x).label, kids, &why);
      if (r == kNone) throw ProofError("rewrite broke the proof: " + why);
    }
    memo.emplace(x, r);
    return r;
  };
  return rec(rec, root);
}

std::uint32_t Reducer::run(std::uint32_t root, int extra) {
  std::unordered_map<std::uint32_t, Rewrite> extra_cache;
  for (;;) {
    // Distinct provable nodes in first-occurrence preorder.
    std::vector<std::uint32_t> order;
    std::unordered_map<std::uint32_t, std::size_t> pos;
    auto visit = [&](auto&& self, std::uint32_t id) -> void {
      if (!st_.provable(id) || pos.count(id)) return;
      pos.emplace(id, order.size());
      order.push_back(id);
      for (auto k : st_.kids(id)) self(self, k);
    };
    visit(visit, root);
    // Occurrence counts and depths; ids descend topologically.
    std::vector<std::size_t> by_id(order.size());
    std::iota(by_id.begin(), by_id.end(), 0);
    std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return order[a] > order[b]; });
    std::vector<double> occ(order.size(), 0);
    std::vector<std::size_t> depth(order.size(), ~std::size_t{0});
    occ[0] = 1;
    depth[0] = 0;
    for (auto i : by_id) {
      for (auto k : st_.kids(order[i])) {
        auto it = pos.find(k);
        if (it == pos.end()) continue;
        occ[it->second] += occ[i];
        depth[it->second] = std::min(depth[it->second], depth[i] + 1);
      }
    }
    double best_total = 0;
    std::size_t best_i = 0;
    Rewrite best_rw;
    for (std::size_t i = 0; i < order.size(); ++i) {
      std::uint32_t id = order[i];
      if (st_.node(id).kind != NodeKind::App) continue;
      Rewrite rw = best(id);
      if (extra >= 0 && !rule_set_.count(extra)) {
        auto it = extra_cache.find(id);
        if (it == extra_cache.end()) it = extra_cache.emplace(id, evaluate(id, extra)).first;
        if (it->second.saving > rw.saving) rw = it->second;
      }
      if (rw.saving <= 0) continue;
      double total = occ[i] * static_cast<double>(rw.saving);
      bool better = total > best_total ||
                    (total == best_total && best_total > 0 &&
                     (depth[i] < depth[best_i] || (depth[i] == depth[best_i] && i < best_i)));
      if (better) {
        best_total = total;
        best_i = i;
        best_rw = std::move(rw);
      }
    }
    if (best_total <= 0) return root;
    std::string why;
    std::uint32_t m = st_.apply(best_rw.rule, best_rw.args, &why);
    if (m == kNone) throw ProofError("rewrite does not check: " + why);
    root = replace(root, order[best_i], m);
  }
}

std::uint32_t Reducer::reduce(std::uint32_t root) { return run(root, -1); }

std::uint32_t Reducer::reduce_with(std::uint32_t root, int extra) { return run(root, extra); }

std::vector<std::pair<int, std::uint32_t>> Reducer::applications(std::uint32_t root) const {
  std::vector<std::pair<int, std::uint32_t>> out;
  std::unordered_set<std::uint32_t> seen;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    if (!st_.provable(id) || !seen.insert(id).second) return;
    const Node n = st_.node(id);
    for (auto k : st_.kids(id)) self(self, k);
    if (n.kind == NodeKind::App && rule_set_.count(n.label)) out.emplace_back(n.label, id);
  };
  rec(rec, root);
  return out;
}

ReductionResult reduce_proof(ProofStore& store, std::uint32_t problem, const std::vector<int>& rules) {
  Reducer r(store);
  for (int f : rules) r.add_rule(f);
  ReductionResult out;
  out.original_length = store.size(problem);
  out.root = r.reduce(problem);
  out.reduced_length = store.size(out.root);
  out.applied = r.applications(out.root);
  return out;
}

// ---------------------------------------------------------------- scorer

Scorer::Scorer(const Database& db, std::shared_ptr<const FrameTable> frames, const std::vector<std::string>& problems,
               const std::vector<std::string>& base)
    : store_(std::make_unique<ProofStore>(std::move(frames))), labels_(problems) {
  std::unordered_set<int> keep;
  for (auto& l : base) keep.insert(db.frame_id(l));
  Expander ex(*store_, [&](int f) {
    return !store_->frames().is_db(static_cast<std::size_t>(f)) || !db.provable[f] || keep.count(f);
  });
  for (auto& l : problems) original_.push_back(ex.theorem(db.frame_id(l)));
  current_ = original_;
  reducer_ = std::make_unique<Reducer>(*store_);
}

double Scorer::d_before() const { return proof_distance(*store_, original_); }

double Scorer::d_after() const { return proof_distance(*store_, current_); }

void Scorer::add_rules(const std::vector<int>& frames) {
  std::size_t before = reducer_->rules().size();
  for (int f : frames) reducer_->add_rule(f);
  if (reducer_->rules().size() == before) return;
  for (auto& r : current_) r = reducer_->reduce(r);
}

double Scorer::trial(int frame) {
  std::vector<std::uint32_t> roots;
  for (auto r : current_) roots.push_back(reducer_->reduce_with(r, frame));
  return proof_distance(*store_, roots);
}

std::vector<ReductionResult> Scorer::results() const {
  std::vector<ReductionResult> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    ReductionResult r;
    r.problem = labels_[i];
    r.original_length = store_->size(original_[i]);
    r.reduced_length = store_->size(current_[i]);
    r.applied = reducer_->applications(current_[i]);
    r.root = current_[i];
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- metrics

double proof_distance(const std::vector<std::uint64_t>& lengths) {
  if (lengths.empty()) return 0;
  long double s = 0;
  for (auto l : lengths) s += static_cast<long double>(l);
  return static_cast<double>(s / lengths.size());
}

double proof_distance(const ProofStore& store, const std::vector<std::uint32_t>& proofs) {
  std::vector<std::uint64_t> lens;
  for (auto p : proofs) {
    if (p == kNone || p >= store.node_count() || !store.provable(p)) throw MMError("problem has no available proof");
    lens.push_back(store.size(p));
  }
  return proof_distance(lens);
}

double apr(double d_before, double d_after, std::size_t generated) {
  return d_before - d_after - static_cast<double>(generated);
}

Precision precision(const GeneratedLibrary& generated, const std::unordered_set<std::string>& human) {
  Precision p;
  if (generated.empty()) {
    p.undefined = true;
    return p;
  }
  std::size_t hit = 0;
  for (auto& t : generated.items()) hit += human.count(t.key);
  p.pct = 100.0 * static_cast<double>(hit) / static_cast<double>(generated.size());
  return p;
}

Histogram usage_histogram(const GeneratedLibrary& generated, const std::vector<ReductionResult>& reductions) {
  Histogram h{{"1-2", 0}, {"3", 0}, {"4", 0}, {"5", 0}, {"6", 0}, {"7", 0}, {"8", 0}, {">=9", 0}};
  std::unordered_map<int, std::size_t> uses;
  for (auto& r : reductions) {
    std::unordered_set<int> once;
    for (auto& [f, node] : r.applied) once.insert(f);
    for (int f : once) ++uses[f];
  }
  for (auto& t : generated.items()) {
    std::size_t u = uses.count(t.frame) ? uses[t.frame] : 0;
    if (u == 0) continue;
    std::size_t b = u <= 2 ? 0 : std::min<std::size_t>(u - 2, 7);
    ++h[b].second;
  }
  return h;
}

std::string Report::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["split"] = split;
  j["len_LG"] = len_lg;
  j["D_before"] = d_before;
  j["D_after"] = d_after;
  j["APR"] = apr;
  j["precision_pct"] = precision_pct;
  nlohmann::ordered_json h = nlohmann::ordered_json::object();
  for (auto& [k, v] : histogram) h[k] = v;
  j["histogram"] = h;
  return j.dump(2);
}

Report evaluate(const std::string& dataset, const std::string& split, const GeneratedLibrary& generated,
                Scorer& scorer, const std::unordered_set<std::string>& human) {
  scorer.add_rules(generated.rule_frames());
  Report r;
  r.dataset = dataset;
  r.split = split;
  r.len_lg = generated.size();
  r.d_before = scorer.d_before();
  r.d_after = scorer.d_after();
  r.apr = apr(r.d_before, r.d_after, r.len_lg);
  r.precision_pct = precision(generated, human).pct;
  r.histogram = usage_histogram(generated, scorer.results());
  return r;
}

// ---------------------------------------------------------------- search

std::uint32_t shortest_proof(ProofStore& store, const Expr& goal, const std::vector<Expr>& hyps,
                             std::uint64_t max_size) {
  const FrameTable& ft = store.frames();
  std::vector<int> usable;
  for (std::size_t i = 0; i < ft.size(); ++i) {
    const Frame& f = ft[i];
    if (f.syntax || !f.dv.empty()) continue;
    std::vector<bool> bound(f.vars.size(), false);
    for (auto& p : f.hyp_pats)
      for (auto c : p.code)
        if (c < 0) bound[static_cast<std::size_t>(-c - 1)] = true;
    if (std::all_of(bound.begin(), bound.end(), [](bool b) { return b; })) usable.push_back(static_cast<int>(i));
  }
  std::unordered_map<std::uint32_t, std::uint32_t> known;  // body -> proof
  std::vector<std::uint32_t> bodies;
  auto offer = [&](std::uint32_t node) {
    std::uint32_t body = store.node(node).concl;
    auto it = known.find(body);
    if (it == known.end()) {
      known.emplace(body, node);
      bodies.push_back(body);
      return true;
    }
    if (store.size(node) < store.size(it->second)) {
      it->second = node;
      return true;
    }
    return false;
  };
  for (auto& h : hyps) offer(store.hyp(store.from_expr(h)));
  bool changed = true;
  while (changed) {
    changed = false;
    for (int fid : usable) {
      const Frame& f = ft[fid];
      std::vector<std::uint32_t> snapshot = bodies;
      std::vector<std::uint32_t> args(f.hyps.size());
      auto rec = [&](auto&& self, std::size_t h, std::vector<std::uint32_t>& sg, std::uint64_t cost) -> void {
        if (h == f.hyps.size()) {
          std::vector<std::uint32_t> full;
          for (auto [fl, k] : f.order) full.push_back(fl ? sg[k] : args[k]);
          std::uint32_t r = store.apply(fid, full);
          if (r != kNone && offer(r)) changed = true;
          return;
        }
        for (auto body : snapshot) {
          std::uint32_t p = known.at(body);
          std::uint64_t c = cost + store.size(p);
          if (c + (f.hyps.size() - h - 1) + 1 > max_size) continue;
          std::vector<std::uint32_t> s2 = sg;
          if (!store.match(f.hyp_pats[h], body, s2, f.var_tc)) continue;
          args[h] = p;
          self(self, h + 1, s2, c);
        }
      };
      std::vector<std::uint32_t> sg(f.vars.size(), kNone);
      if (f.hyps.empty()) {
        if (max_size >= 1) {
          std::uint32_t r = store.apply(fid, {});
          if (r != kNone && offer(r)) changed = true;
        }
        continue;
      }
      rec(rec, 0, sg, 0);
    }
  }
  std::uint32_t g;
  try {
    g = store.from_expr(goal);
  } catch (const MMError&) {
    return kNone;
  }
  auto it = known.find(g);
  if (it == known.end() || store.size(it->second) > max_size) return kNone;
  return it->second;
}

}  // namespace atg
