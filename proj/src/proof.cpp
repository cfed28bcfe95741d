#include "atg/proof.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace atg {

int FrameTable::add(Frame f) {
  int id = static_cast<int>(size());
  if (find(f.label)) throw MMError("duplicate label " + f.label);
  f.decl = id;
  extra_ids_.emplace(f.label, id);
  extra_.push_back(std::move(f));
  return id;
}

std::optional<int> FrameTable::find(std::string_view label) const {
  if (auto id = db_->find_frame(label)) return id;
  auto it = extra_ids_.find(std::string(label));
  if (it == extra_ids_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- store

ProofStore::ProofStore(const FrameTable& ft) : ft_(&ft) { table_.assign(1024, kNone); }

ProofStore::ProofStore(std::shared_ptr<const FrameTable> ft) : owned_(std::move(ft)), ft_(owned_.get()) {
  table_.assign(1024, kNone);
}

std::uint64_t ProofStore::hash_key(NodeKind kind, std::int32_t label, std::uint32_t concl,
                                   std::span<const std::uint32_t> kids) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull ^ (static_cast<std::uint64_t>(kind) << 56);
  auto mix = [&](std::uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
  };
  mix(static_cast<std::uint32_t>(label));
  mix(concl);
  for (auto k : kids) mix(k);
  return h ^ (h >> 31);
}

bool ProofStore::same(std::uint32_t id, NodeKind kind, std::int32_t label, std::uint32_t concl,
                      std::span<const std::uint32_t> kids) const {
  const Node& n = nodes_[id];
  if (n.kind != kind || n.label != label || n.nkids != kids.size()) return false;
  if (kind == NodeKind::Hyp && n.concl != concl) return false;
  return std::equal(kids.begin(), kids.end(), kids_.begin() + n.kid_off);
}

void ProofStore::grow() {
  std::vector<std::uint32_t> t(table_.size() * 2, kNone);
  std::size_t mask = t.size() - 1;
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    std::size_t i = hashes_[id] & mask;
    while (t[i] != kNone) i = (i + 1) & mask;
    t[i] = id;
  }
  table_.swap(t);
}

std::uint32_t ProofStore::find(NodeKind kind, std::int32_t label, std::uint32_t concl,
                               std::span<const std::uint32_t> kids) const {
  std::uint64_t h = hash_key(kind, label, kind == NodeKind::Hyp ? concl : kNone, kids);
  std::size_t mask = table_.size() - 1;
  for (std::size_t i = h & mask; table_[i] != kNone; i = (i + 1) & mask) {
    std::uint32_t id = table_[i];
    if (hashes_[id] == h && same(id, kind, label, concl, kids)) return id;
  }
  return kNone;
}

std::uint32_t ProofStore::intern(NodeKind kind, Sym tc, std::int32_t label, std::uint32_t concl,
                                 std::span<const std::uint32_t> kids) {
  std::uint32_t key_concl = kind == NodeKind::Hyp ? concl : kNone;
  std::uint64_t h = hash_key(kind, label, key_concl, kids);
  std::size_t mask = table_.size() - 1;
  std::size_t i = h & mask;
  while (table_[i] != kNone) {
    std::uint32_t id = table_[i];
    if (hashes_[id] == h && same(id, kind, label, concl, kids)) return id;
    i = (i + 1) & mask;
  }
  if (nodes_.size() >= 0xfffffff0u) throw MMError("proof store exhausted");
  auto id = static_cast<std::uint32_t>(nodes_.size());
  std::vector<std::uint32_t> own;
  if (!kids.empty() && kids.data() >= kids_.data() && kids.data() < kids_.data() + kids_.size()) {
    own.assign(kids.begin(), kids.end());
    kids = own;
  }
  Node n{kind, tc, label, concl, static_cast<std::uint32_t>(kids_.size()),
         static_cast<std::uint32_t>(kids.size()), 0};
  if (kind == NodeKind::Var || kind == NodeKind::Syn) n.concl = id;
  if (kind == NodeKind::Hyp) n.size = 1;
  if (kind == NodeKind::App) {
    std::uint64_t s = 1;
    for (auto k : kids) {
      std::uint64_t ks = nodes_[k].size;
      s = (s + ks < s) ? ~0ull : s + ks;
    }
    n.size = s;
  }
  kids_.insert(kids_.end(), kids.begin(), kids.end());
  nodes_.push_back(n);
  hashes_.push_back(h);
  table_[i] = id;
  if (nodes_.size() * 2 > table_.size()) grow();
  return id;
}

std::uint32_t ProofStore::var(Sym v) {
  return intern(NodeKind::Var, db().var_typecode(v), v, kNone, {});
}

std::uint32_t ProofStore::syn(int frame, std::span<const std::uint32_t> kids) {
  const Frame& f = (*ft_)[frame];
  if (kids.size() != f.vars.size()) throw MMError("syntax arity mismatch for " + f.label);
  return intern(NodeKind::Syn, f.concl[0], frame, kNone, kids);
}

std::uint32_t ProofStore::hyp(std::uint32_t concl) {
  return intern(NodeKind::Hyp, db().turnstile(), -1, concl, {});
}

std::uint32_t ProofStore::apply(int frame, std::span<const std::uint32_t> in, std::string* why) {
  const Frame& f = (*ft_)[frame];
  std::vector<std::uint32_t> own(in.begin(), in.end());
  std::span<const std::uint32_t> args = own;
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return kNone;
  };
  if (args.size() != f.arity()) return fail("arity mismatch");
  std::vector<std::uint32_t> sigma(f.vars.size(), kNone);
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto [fl, k] = f.order[i];
    if (!fl) continue;
    const Node& n = nodes_[args[i]];
    if ((n.kind != NodeKind::Var && n.kind != NodeKind::Syn) || n.tc != f.var_tc[k])
      return fail("typecode mismatch for " + f.float_labels[k]);
    sigma[k] = args[i];
  }
  if (f.syntax) {
    if (!f.hyps.empty()) return fail("syntax assertion with hypotheses");
    return f.axiom ? syn(frame, args) : instantiate(f.concl_pat, sigma);
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto [fl, k] = f.order[i];
    if (fl) continue;
    const Node& n = nodes_[args[i]];
    if (n.kind != NodeKind::Hyp && n.kind != NodeKind::App) return fail("hypothesis is not provable");
    if (!match(f.hyp_pats[k], n.concl, sigma)) return fail("hypothesis " + f.hyp_labels[k] + " does not match");
  }
  std::uint32_t concl = instantiate(f.concl_pat, sigma);
  return intern(NodeKind::App, db().turnstile(), frame, concl, args);
}

std::uint32_t ProofStore::instantiate(const Pattern& p, std::span<const std::uint32_t> sigma) {
  std::size_t pos = 0;
  auto rec = [&](auto&& self) -> std::uint32_t {
    std::int32_t c = p.code[pos++];
    if (c < 0) {
      std::uint32_t v = sigma[static_cast<std::size_t>(-c - 1)];
      if (v == kNone) throw MMError("unbound variable during instantiation");
      return v;
    }
    const Frame& f = (*ft_)[c];
    std::uint32_t kb[8];
    std::vector<std::uint32_t> kv;
    std::uint32_t* kids = kb;
    if (f.vars.size() > 8) {
      kv.resize(f.vars.size());
      kids = kv.data();
    }
    for (std::size_t i = 0; i < f.vars.size(); ++i) kids[i] = self(self);
    return syn(c, {kids, f.vars.size()});
  };
  return rec(rec);
}

std::uint32_t ProofStore::find_instance(const Pattern& p, std::span<const std::uint32_t> sigma) const {
  std::size_t pos = 0;
  auto rec = [&](auto&& self) -> std::uint32_t {
    std::int32_t c = p.code[pos++];
    if (c < 0) return sigma[static_cast<std::size_t>(-c - 1)];
    const Frame& f = (*ft_)[c];
    std::uint32_t kb[8];
    std::vector<std::uint32_t> kv;
    std::uint32_t* kids = kb;
    if (f.vars.size() > 8) {
      kv.resize(f.vars.size());
      kids = kv.data();
    }
    std::uint32_t bad = 0;
    for (std::size_t i = 0; i < f.vars.size(); ++i) {
      kids[i] = self(self);
      if (kids[i] == kNone) bad = 1;
    }
    if (bad) return kNone;
    return find(NodeKind::Syn, c, kNone, {kids, f.vars.size()});
  };
  return rec(rec);
}

std::uint32_t ProofStore::import(const ProofStore& from, std::uint32_t root) {
  if (&from == this) return root;
  std::unordered_map<std::uint32_t, std::uint32_t> memo;
  auto rec = [&](auto&& self, std::uint32_t id) -> std::uint32_t {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const Node n = from.node(id);
    std::uint32_t r;
    if (n.kind == NodeKind::Var) {
      r = var(n.label);
    } else if (n.kind == NodeKind::Hyp) {
      r = hyp(self(self, n.concl));
    } else {
      std::vector<std::uint32_t> kids;
      for (auto k : from.kids(id)) kids.push_back(self(self, k));
      if (n.kind == NodeKind::Syn) {
        r = syn(n.label, kids);
      } else {
        std::string why;
        r = apply(n.label, kids, &why);
        if (r == kNone) throw ProofError("import failed: " + why);
      }
    }
    memo.emplace(id, r);
    return r;
  };
  return rec(rec, root);
}

bool ProofStore::match(const Pattern& p, std::uint32_t body, std::vector<std::uint32_t>& sigma,
                       std::span<const Sym> slot_tc) const {
  std::size_t pos = 0;
  auto rec = [&](auto&& self, std::uint32_t nid) -> bool {
    std::int32_t c = p.code[pos++];
    if (c < 0) {
      auto slot = static_cast<std::size_t>(-c - 1);
      if (sigma[slot] == kNone) {
        if (!slot_tc.empty() && nodes_[nid].tc != slot_tc[slot]) return false;
        sigma[slot] = nid;
        return true;
      }
      return sigma[slot] == nid;
    }
    const Node& n = nodes_[nid];
    if (n.kind != NodeKind::Syn || n.label != c) return false;
    for (std::uint32_t i = 0; i < n.nkids; ++i)
      if (!self(self, kids_[n.kid_off + i])) return false;
    return true;
  };
  return rec(rec, body);
}

std::uint32_t ProofStore::from_tree(const Pattern& t) {
  std::size_t pos = 0;
  auto rec = [&](auto&& self) -> std::uint32_t {
    std::int32_t c = t.code.at(pos++);
    if (c < 0) return var(-c - 1);
    const Frame& f = (*ft_)[c];
    std::vector<std::uint32_t> kids(f.vars.size());
    for (auto& k : kids) k = self(self);
    return syn(c, kids);
  };
  return rec(rec);
}

std::uint32_t ProofStore::from_expr(const Expr& e) {
  auto it = expr_cache_.find(e);
  if (it != expr_cache_.end()) return it->second;
  std::uint32_t id = from_tree(db().parse_tree(e));
  expr_cache_.emplace(e, id);
  return id;
}

Pattern ProofStore::to_tree(std::uint32_t body) const {
  Pattern out;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.kind == NodeKind::Var) {
      out.code.push_back(-(n.label + 1));
      return;
    }
    out.code.push_back(n.label);
    for (std::uint32_t i = 0; i < n.nkids; ++i) self(self, kids_[n.kid_off + i]);
  };
  rec(rec, body);
  return out;
}

Expr ProofStore::render(std::uint32_t body) const {
  Expr out;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.kind == NodeKind::Var) {
      out.push_back(n.label);
      return;
    }
    if (n.kind != NodeKind::Syn) throw MMError("render of a non-syntax node");
    const Frame& f = (*ft_)[n.label];
    for (std::size_t i = 1; i < f.concl.size(); ++i) {
      Sym s = f.concl[i];
      int slot = db().is_var(s) ? f.slot_of(s) : -1;
      if (slot >= 0) self(self, kids_[n.kid_off + slot]);
      else out.push_back(s);
    }
  };
  rec(rec, body);
  return out;
}

Expr ProofStore::statement(std::uint32_t id) const {
  const Node& n = nodes_[id];
  Expr out{n.tc};
  Expr b = render(n.concl);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void ProofStore::vars_of(std::uint32_t body, std::vector<Sym>& out) const {
  std::vector<std::uint32_t> st{body};
  while (!st.empty()) {
    std::uint32_t id = st.back();
    st.pop_back();
    const Node& n = nodes_[id];
    if (n.kind == NodeKind::Var) {
      if (std::find(out.begin(), out.end(), n.label) == out.end()) out.push_back(n.label);
      continue;
    }
    for (std::uint32_t i = 0; i < n.nkids; ++i) st.push_back(kids_[n.kid_off + i]);
  }
}

std::vector<std::string> ProofStore::rpn(std::uint32_t root,
                                         const std::function<std::string(std::uint32_t)>& hyp_label) const {
  std::vector<std::string> out;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    const Node& n = nodes_[id];
    switch (n.kind) {
      case NodeKind::Var: out.push_back(db().var_float(n.label)); return;
      case NodeKind::Hyp: out.push_back(hyp_label(id)); return;
      default:
        for (std::uint32_t i = 0; i < n.nkids; ++i) self(self, kids_[n.kid_off + i]);
        out.push_back((*ft_)[n.label].label);
    }
  };
  rec(rec, root);
  return out;
}

// ---------------------------------------------------------------- verify

std::uint32_t verify_into(ProofStore& store, int id) {
  const Database& db = store.db();
  if (id < 0 || static_cast<std::size_t>(id) >= db.frames.size() || !db.provable[id])
    throw ProofError("not a provable statement");
  const Frame& f = db.frames[id];
  const CompressedProof& pr = db.proofs[id];
  const std::string& who = f.label;
  std::set<std::pair<Sym, Sym>> ctx(f.ctx_dv.begin(), f.ctx_dv.end());

  // Each label resolves to a pushed node or a frame to apply.
  struct Item {
    std::uint32_t node = kNone;
    int frame = -1;
  };
  std::unordered_map<std::string, Item> cache;
  auto resolve = [&](const std::string& l) -> Item {
    auto it = cache.find(l);
    if (it != cache.end()) return it->second;
    Item item;
    if (const HypDecl* h = db.find_hyp(l)) {
      if (h->floating) {
        Sym v = h->expr[1];
        bool ok = std::find(f.float_labels.begin(), f.float_labels.end(), l) != f.float_labels.end();
        for (auto& e : f.extra_floats) ok = ok || e.first == l;
        if (!ok) throw ProofError(who + ": inactive hypothesis " + l);
        item.node = store.var(v);
      } else {
        if (std::find(f.hyp_labels.begin(), f.hyp_labels.end(), l) == f.hyp_labels.end())
          throw ProofError(who + ": inactive hypothesis " + l);
        item.node = store.hyp(store.from_expr(h->expr));
      }
    } else if (auto fid = db.find_frame(l)) {
      if (*fid >= id) throw ProofError(who + ": label " + l + " referenced before declaration");
      item.frame = *fid;
    } else {
      throw ProofError(who + ": unknown label " + l);
    }
    cache.emplace(l, item);
    return item;
  };

  std::vector<std::uint32_t> stack;
  std::vector<Sym> vx, vy;
  auto step = [&](const Item& item, const std::string& l) {
    if (item.frame < 0) {
      stack.push_back(item.node);
      return;
    }
    const Frame& g = db.frames[item.frame];
    std::size_t k = g.arity();
    if (stack.size() < k) throw ProofError(who + ": stack underflow at " + l);
    std::span<const std::uint32_t> args(stack.data() + stack.size() - k, k);
    std::string why;
    std::uint32_t r = store.apply(item.frame, args, &why);
    if (r == kNone) throw ProofError(who + ": substitution mismatch at " + l + " (" + why + ")");
    if (!g.dv.empty()) {
      std::vector<std::uint32_t> sigma(g.vars.size());
      for (std::size_t i = 0; i < k; ++i)
        if (g.order[i].first) sigma[g.order[i].second] = args[i];
      for (auto [x, y] : g.dv) {
        vx.clear();
        vy.clear();
        store.vars_of(sigma[g.slot_of(x)], vx);
        store.vars_of(sigma[g.slot_of(y)], vy);
        for (Sym a : vx)
          for (Sym b : vy)
            if (a == b || !ctx.count({std::min(a, b), std::max(a, b)}))
              throw ProofError(who + ": disjoint variable violation at " + l);
      }
    }
    stack.resize(stack.size() - k);
    stack.push_back(r);
  };

  if (!pr.compressed) {
    for (auto& l : pr.refs) {
      if (l == "?") throw ProofError(who + ": incomplete proof");
      step(resolve(l), l);
    }
  } else {
    std::vector<std::string> labels;
    for (auto [fl, k] : f.order) labels.push_back(fl ? f.float_labels[k] : f.hyp_labels[k]);
    for (auto& r : pr.refs) {
      if (db.find_hyp(r) && std::find(labels.begin(), labels.end(), r) != labels.end())
        throw ProofError(who + ": mandatory hypothesis in reference list");
      labels.push_back(r);
    }
    std::vector<Item> items;
    for (auto& l : labels) items.push_back(resolve(l));
    std::vector<std::uint32_t> saved;
    std::vector<std::size_t> nums;
    try {
      nums = decode_letters(pr.letters);
    } catch (const MMError& e) {
      throw ProofError(who + ": " + e.what());
    }
    for (std::size_t num : nums) {
      if (num == 0) {
        if (stack.empty()) throw ProofError(who + ": dangling Z");
        saved.push_back(stack.back());
      } else if (num <= labels.size()) {
        step(items[num - 1], labels[num - 1]);
      } else {
        std::size_t idx = num - labels.size() - 1;
        if (idx >= saved.size()) throw ProofError(who + ": index out of range");
        stack.push_back(saved[idx]);
      }
    }
  }
  if (stack.empty()) throw ProofError(who + ": empty stack at end");
  if (stack.size() > 1) throw ProofError(who + ": residual stack elements (" + std::to_string(stack.size()) + ")");
  std::uint32_t root = stack[0];
  const Node& rn = store.node(root);
  if (rn.tc != f.concl[0] || rn.concl != store.from_expr(f.concl))
    throw ProofError(who + ": final statement mismatch");
  return root;
}

ProofTree verify_proof(const Database& db, std::string_view label) {
  auto table = std::make_shared<const FrameTable>(db);
  auto store = std::make_shared<ProofStore>(table);
  std::uint32_t root = verify_into(*store, db.frame_id(label));
  return ProofTree{store, root};
}

// ---------------------------------------------------------------- matching

std::optional<Substitution> match_assertion(const Database& db, const Frame& frame, const Expr& target,
                                            const std::vector<Expr>& pool) {
  FrameTable ft(db);
  ProofStore st(ft);
  if (target.empty() || target[0] != frame.concl[0]) return std::nullopt;
  std::vector<std::uint32_t> sigma(frame.vars.size(), kNone);
  std::uint32_t body;
  try {
    body = st.from_expr(target);
  } catch (const MMError&) {
    return std::nullopt;
  }
  if (!st.match(frame.concl_pat, body, sigma, frame.var_tc)) return std::nullopt;
  std::vector<Expr> sorted;
  for (auto& e : pool)
    if (!e.empty() && e[0] == db.turnstile()) sorted.push_back(e);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::uint32_t> nodes;
  for (auto& e : sorted) nodes.push_back(st.from_expr(e));
  std::optional<std::vector<std::uint32_t>> found;
  auto rec = [&](auto&& self, std::size_t i, const std::vector<std::uint32_t>& sg) -> bool {
    if (i == frame.hyps.size()) {
      found = sg;
      return true;
    }
    for (auto n : nodes) {
      auto s2 = sg;
      if (st.match(frame.hyp_pats[i], n, s2, frame.var_tc) && self(self, i + 1, s2)) return true;
    }
    return false;
  };
  if (!rec(rec, 0, sigma)) return std::nullopt;
  Substitution out;
  for (std::size_t k = 0; k < frame.vars.size(); ++k) {
    if ((*found)[k] == kNone) return std::nullopt;
    out[frame.vars[k]] = st.render((*found)[k]);
  }
  return out;
}

Frame make_frame(const Database& db, std::string label, const std::vector<Expr>& hyps, const Expr& concl) {
  Frame f;
  f.label = std::move(label);
  f.axiom = false;
  if (concl.empty()) throw MMError("empty conclusion for " + f.label);
  f.syntax = concl[0] != db.turnstile();
  if (f.syntax && !hyps.empty()) throw MMError("syntax statement with hypotheses: " + f.label);
  f.concl = concl;
  f.hyps = hyps;
  std::vector<Sym> vs;
  auto note = [&](const Expr& e) {
    for (std::size_t k = 1; k < e.size(); ++k)
      if (db.is_var(e[k]) && std::find(vs.begin(), vs.end(), e[k]) == vs.end()) vs.push_back(e[k]);
  };
  for (auto& h : hyps) note(h);
  note(concl);
  std::sort(vs.begin(), vs.end(), [&](Sym a, Sym b) { return db.var_rank(a) < db.var_rank(b); });
  for (Sym v : vs) {
    f.order.emplace_back(true, static_cast<int>(f.vars.size()));
    f.vars.push_back(v);
    f.var_tc.push_back(db.var_typecode(v));
    f.float_labels.push_back(db.var_float(v));
  }
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    f.order.emplace_back(false, static_cast<int>(i));
    f.hyp_labels.push_back(f.label + "." + std::to_string(i + 1));
  }
  db.finalize_frame(f);
  return f;
}

// ---------------------------------------------------------------- emit

std::string emit_theorem(const Frame& f, const ProofStore& store, std::uint32_t root) {
  const Database& db = store.db();
  if (root == kNone || store.provable(root) == f.syntax || store.statement(root) != f.concl)
    throw ProofError("unverifiable proof refused for " + f.label + ": conclusion differs");
  std::map<Expr, std::size_t> hyp_index;
  for (std::size_t i = 0; i < f.hyps.size(); ++i) hyp_index.emplace(f.hyps[i], i);

  std::vector<std::string> mand;
  for (auto [fl, k] : f.order) mand.push_back(fl ? f.float_labels[k] : f.hyp_labels[k]);

  // Pass 1: find repeated compound subproofs.
  std::unordered_map<std::uint32_t, int> seen;
  std::vector<std::uint32_t> st{root};
  while (!st.empty()) {
    std::uint32_t id = st.back();
    st.pop_back();
    if (seen[id]++) continue;
    for (auto k : store.kids(id)) st.push_back(k);
  }

  // Pass 2: step list of labels or saved references.
  struct Step {
    std::string label;
    int saved = -1;
    bool tag = false;
  };
  std::vector<Step> steps;
  std::unordered_map<std::uint32_t, int> saved_at;
  int nsaved = 0;
  auto rec = [&](auto&& self, std::uint32_t id) -> void {
    auto it = saved_at.find(id);
    if (it != saved_at.end()) {
      steps.push_back({"", it->second, false});
      return;
    }
    const Node& n = store.node(id);
    switch (n.kind) {
      case NodeKind::Var:
        steps.push_back({db.var_float(n.label)});
        return;
      case NodeKind::Hyp: {
        auto h = hyp_index.find(store.statement(id));
        if (h == hyp_index.end())
          throw ProofError("unverifiable proof refused for " + f.label + ": unknown hypothesis");
        steps.push_back({f.hyp_labels[h->second]});
        return;
      }
      default:
        for (auto k : store.kids(id)) self(self, k);
        steps.push_back({store.frames()[n.label].label});
        if (n.nkids > 0 && seen[id] > 1) {
          steps.back().tag = true;
          saved_at[id] = nsaved++;
        }
    }
  };
  rec(rec, root);

  std::vector<std::string> refs;
  std::unordered_map<std::string, std::size_t> num;
  for (std::size_t i = 0; i < mand.size(); ++i) num.emplace(mand[i], i + 1);
  for (auto& s : steps)
    if (s.saved < 0 && !num.count(s.label)) {
      refs.push_back(s.label);
      num.emplace(s.label, mand.size() + refs.size());
    }
  std::string letters;
  std::size_t base = mand.size() + refs.size();
  for (auto& s : steps) {
    letters += encode_number(s.saved >= 0 ? base + static_cast<std::size_t>(s.saved) + 1 : num.at(s.label));
    if (s.tag) letters += 'Z';
  }

  std::ostringstream out;
  out << "${\n";
  for (std::size_t i = 0; i < f.hyps.size(); ++i)
    out << "  " << f.hyp_labels[i] << " $e " << db.text(f.hyps[i]) << " $.\n";
  out << "  " << f.label << " $p " << db.text(f.concl) << " $=\n";
  const std::size_t width = 79, indent = 4;
  std::string line(indent, ' ');
  auto flush = [&] {
    out << line << "\n";
    line.assign(indent, ' ');
  };
  auto word = [&](const std::string& w) {
    if (line.size() > indent && line.size() + 1 + w.size() > width) flush();
    if (line.size() > indent) line += ' ';
    line += w;
  };
  word("(");
  for (auto& r : refs) word(r);
  word(")");
  std::size_t p = 0;
  while (p < letters.size()) {
    std::size_t gap = line.size() > indent ? 1 : 0;
    if (line.size() + gap >= width) {
      flush();
      continue;
    }
    std::size_t room = width - line.size() - gap;
    if (gap) line += ' ';
    line += letters.substr(p, room);
    p += room;
  }
  word("$.");
  flush();
  out << "$}\n";
  return out.str();
}

// ---------------------------------------------------------------- alpha

std::string alpha_key(const Database& db, const std::vector<Expr>& hyps, const Expr& concl) {
  std::vector<std::size_t> perm(hyps.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto encode = [&](const std::vector<std::size_t>& order) {
    std::unordered_map<Sym, int> ren;
    std::string s;
    auto put = [&](const Expr& e) {
      for (Sym t : e) {
        if (db.is_var(t)) {
          auto it = ren.find(t);
          int k = it == ren.end() ? ren.emplace(t, static_cast<int>(ren.size())).first->second : it->second;
          s += '$';
          s += db.name(db.var_typecode(t));
          s += std::to_string(k);
        } else {
          s += db.name(t);
        }
        s += ' ';
      }
    };
    put(concl);
    for (auto i : order) {
      s += "; ";
      put(hyps[i]);
    }
    return s;
  };
  if (hyps.size() > 7) {
    // Too many orders to enumerate: fix one by individually canonical forms.
    std::vector<std::string> single(hyps.size());
    for (std::size_t i = 0; i < hyps.size(); ++i) single[i] = alpha_key(db, {}, hyps[i]);
    std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return single[a] < single[b]; });
    return encode(perm);
  }
  std::string best;
  bool first = true;
  do {
    std::string s = encode(perm);
    if (first || s < best) best = std::move(s);
    first = false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace atg
