#include "atg/graph.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <set>

#include <json.hpp>

namespace atg {

int RefGraph::depth_of(const std::string& label) const {
  auto it = index.find(label);
  if (it == index.end()) throw MMError("not in graph: " + label);
  return depth[it->second];
}

std::size_t RefGraph::edge_count() const {
  std::size_t n = 0;
  for (auto& r : refs) n += r.size();
  return n;
}

namespace {

std::vector<int> referenced_frames(const Database& db, int id) {
  std::set<int> out;
  const CompressedProof& pr = db.proofs[id];
  for (auto& l : pr.refs) {
    auto f = db.find_frame(l);
    if (f && !db.frames[*f].syntax) out.insert(*f);
  }
  return {out.begin(), out.end()};
}

}  // namespace

RefGraph build_graph(const Database& db, const std::vector<std::string>& universe) {
  RefGraph g;
  std::set<int> want;
  for (std::size_t i = 0; i < db.frames.size(); ++i)
    if (!db.provable[i] && !db.frames[i].syntax) want.insert(static_cast<int>(i));
  std::vector<int> todo;
  for (auto& l : universe) todo.push_back(db.frame_id(l));
  while (!todo.empty()) {
    int id = todo.back();
    todo.pop_back();
    if (db.frames[id].syntax) throw MMError("syntax statement in universe: " + db.frames[id].label);
    if (!want.insert(id).second) continue;
    if (db.provable[id])
      for (int r : referenced_frames(db, id)) todo.push_back(r);
  }
  // Kahn's algorithm over the collected nodes; ties by declaration order.
  std::vector<int> ids(want.begin(), want.end());
  std::unordered_map<int, int> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> out_edges(ids.size()), in_refs(ids.size());
  std::vector<int> indeg(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!db.provable[ids[i]]) continue;
    for (int r : referenced_frames(db, ids[i])) {
      int j = pos.at(r);
      out_edges[j].push_back(static_cast<int>(i));
      in_refs[i].push_back(j);
      ++indeg[i];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> topo;
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    topo.push_back(i);
    for (int j : out_edges[i])
      if (--indeg[j] == 0) ready.push(j);
  }
  if (topo.size() != ids.size()) throw MMError("cycle detected in reference graph");
  std::vector<int> node_of(ids.size());
  for (std::size_t k = 0; k < topo.size(); ++k) {
    int i = topo[k];
    node_of[i] = static_cast<int>(k);
    g.labels.push_back(db.frames[ids[i]].label);
    g.frame.push_back(ids[i]);
    g.axiom.push_back(!db.provable[ids[i]]);
    g.index.emplace(g.labels.back(), static_cast<int>(k));
  }
  g.refs.resize(topo.size());
  g.depth.assign(topo.size(), 0);
  for (std::size_t k = 0; k < topo.size(); ++k) {
    int i = topo[k];
    for (int j : in_refs[i]) {
      g.refs[k].push_back(node_of[j]);
      g.depth[k] = std::max(g.depth[k], g.depth[node_of[j]] + 1);
    }
    std::sort(g.refs[k].begin(), g.refs[k].end());
  }
  return g;
}

std::vector<std::string> first_theorems(const Database& db, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < db.frames.size() && out.size() < n; ++i)
    if (db.provable[i] && !db.frames[i].syntax) out.push_back(db.frames[i].label);
  return out;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> p{
      {"wb", 272, 10, 20, 82, 32, 54, 21},
      {"wif", 1284, 33, 39, 518, 220, 211, 88},
      {"minimp", 2048, 36, 40, 754, 298, 441, 182},
  };
  return p;
}

const Preset& preset(const std::string& name) {
  for (auto& p : presets())
    if (p.name == name) return p;
  throw SplitError("unknown preset: " + name);
}

// ---------------------------------------------------------------- splits

std::string SplitManifest::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["split"] = split;
  j["k"] = k;
  j["seed"] = seed;
  j["axioms"] = axioms;
  j["library"] = library;
  j["problems"] = problems;
  return j.dump(2) + "\n";
}

SplitManifest SplitManifest::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  SplitManifest m;
  m.dataset = j.at("dataset").get<std::string>();
  m.split = j.at("split").get<std::string>();
  m.k = j.at("k").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.axioms = j.at("axioms").get<std::vector<std::string>>();
  m.library = j.at("library").get<std::vector<std::string>>();
  m.problems = j.at("problems").get<std::vector<std::string>>();
  return m;
}

std::pair<SplitManifest, SplitManifest> make_splits(const Database& db, const RefGraph& graph, const Preset& p,
                                                    std::uint64_t seed) {
  auto universe = first_theorems(db, p.count);
  if (p.count == 0 || universe.size() < p.count)
    throw SplitError("infeasible counts: " + std::to_string(p.count) + " theorems requested, " +
                     std::to_string(universe.size()) + " available");
  if (p.k_train >= p.k_test) throw SplitError("k_train must be below k_test");
  std::vector<int> nodes;
  for (auto& l : universe) {
    auto it = graph.index.find(l);
    if (it == graph.index.end()) throw SplitError("graph does not cover " + l);
    nodes.push_back(it->second);
  }
  // Seeded Fisher-Yates; independent of the standard library's shuffle.
  std::mt19937_64 rng(seed);
  for (std::size_t i = nodes.size(); i > 1; --i) std::swap(nodes[i - 1], nodes[rng() % i]);
  std::unordered_map<int, std::size_t> rank;
  for (std::size_t i = 0; i < nodes.size(); ++i) rank[nodes[i]] = i;

  // Roles within a split are disjoint; across splits items may be shared
  // only when a pool runs short, and shared items are taken last.
  std::set<int> taken_train, taken_test;
  auto eligible = [&](const std::set<int>& own, auto pred) {
    std::vector<int> out;
    for (int n : nodes)
      if (!own.count(n) && pred(graph.depth[n])) out.push_back(n);
    return out;
  };
  auto touched = [&](const std::set<int>& items) {
    std::set<int> t(items.begin(), items.end());
    for (int n : items)
      for (int r : graph.refs[n])
        if (!graph.axiom[r]) t.insert(r);
    return t;
  };
  auto pick = [&](std::vector<int> cand, std::size_t want, const std::set<int>& other_items,
                  const std::set<int>& other_touch, std::set<int>& own, const char* role) {
    if (cand.size() < want)
      throw SplitError(std::string("infeasible counts: ") + role + " needs " + std::to_string(want) + ", pool has " +
                       std::to_string(cand.size()));
    auto score = [&](int n) {
      std::size_t s = other_items.count(n) ? 1000000 : 0;
      s += other_touch.count(n) ? 1 : 0;
      for (int r : graph.refs[n]) s += other_touch.count(r);
      return s;
    };
    std::vector<std::pair<std::size_t, int>> keyed;
    for (int n : cand) keyed.emplace_back(score(n), n);
    std::sort(keyed.begin(), keyed.end(), [&](auto& a, auto& b) {
      return a.first != b.first ? a.first < b.first : rank[a.second] < rank[b.second];
    });
    std::vector<int> out;
    for (std::size_t i = 0; i < want; ++i) out.push_back(keyed[i].second);
    own.insert(out.begin(), out.end());
    return out;
  };

  auto deep_test = eligible(taken_test, [&](int d) { return d > p.k_test; });
  if (deep_test.empty()) throw SplitError("empty problem set at k=" + std::to_string(p.k_test));
  std::size_t n_test_prob = p.test_problems ? p.test_problems : std::max<std::size_t>(1, deep_test.size() / 2);
  auto test_prob = pick(deep_test, n_test_prob, {}, {}, taken_test, "test problems");
  auto test_touch = touched(taken_test);

  auto deep_train = eligible(taken_train, [&](int d) { return d > p.k_train; });
  if (deep_train.empty()) throw SplitError("empty problem set at k=" + std::to_string(p.k_train));
  std::size_t n_train_prob =
      p.train_problems ? p.train_problems : std::max<std::size_t>(1, (deep_train.size() - test_prob.size()) / 2);
  auto train_prob = pick(deep_train, n_train_prob, taken_test, test_touch, taken_train, "train problems");

  auto shallow_train = eligible(taken_train, [&](int d) { return d <= p.k_train; });
  std::size_t n_train_lib = p.train_library ? p.train_library : shallow_train.size() / 2;
  auto train_lib = pick(shallow_train, n_train_lib, taken_test, test_touch, taken_train, "train library");

  auto train_touch = touched(taken_train);
  auto shallow_test = eligible(taken_test, [&](int d) { return d <= p.k_test; });
  std::size_t n_test_lib = p.test_library ? p.test_library : shallow_test.size() / 2;
  auto test_lib = pick(shallow_test, n_test_lib, taken_train, train_touch, taken_test, "test library");

  int last = 0;
  for (auto& l : universe) last = std::max(last, db.frame_id(l));
  std::vector<std::string> axioms;
  for (int i = 0; i < last; ++i)
    if (!db.provable[i] && !db.frames[i].syntax) axioms.push_back(db.frames[i].label);

  auto labels = [&](std::vector<int> v) {
    std::sort(v.begin(), v.end(), [&](int a, int b) { return graph.frame[a] < graph.frame[b]; });
    std::vector<std::string> out;
    for (int n : v) out.push_back(graph.labels[n]);
    return out;
  };
  SplitManifest train{p.name, "train", p.k_train, seed, axioms, labels(train_lib), labels(train_prob)};
  SplitManifest test{p.name, "test", p.k_test, seed, axioms, labels(test_lib), labels(test_prob)};
  return {train, test};
}

// ---------------------------------------------------------------- stats

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  double t = 0;
  for (double x : xs) t += x;
  s.avg = t / static_cast<double>(xs.size());
  return s;
}

SubsetStats subset_stats(const Database& db, const RefGraph& graph, const std::vector<std::string>& labels) {
  std::vector<double> d, t, r;
  for (auto& l : labels) {
    int n = graph.index.at(l);
    d.push_back(graph.depth[n]);
    t.push_back(static_cast<double>(db.frames[graph.frame[n]].concl.size()));
    r.push_back(static_cast<double>(graph.refs[n].size()));
  }
  return {labels.size(), summarize(d), summarize(t), summarize(r)};
}

SplitStats split_stats(const SplitManifest& m, const Database& db, const RefGraph& graph) {
  SplitStats s;
  s.dataset = m.dataset;
  s.split = m.split;
  std::set<std::string> hyps;
  for (auto* v : {&m.library, &m.problems})
    for (auto& l : *v)
      for (auto& h : db.frames[db.frame_id(l)].hyp_labels) hyps.insert(h);
  s.axioms_and_hyps = m.axioms.size() + hyps.size();
  s.library = subset_stats(db, graph, m.library);
  s.problems = subset_stats(db, graph, m.problems);
  return s;
}

SplitStats split_stats(const SplitManifest& m, const Database& db) {
  std::vector<std::string> u = m.library;
  u.insert(u.end(), m.problems.begin(), m.problems.end());
  return split_stats(m, db, build_graph(db, u));
}

namespace {

nlohmann::ordered_json summary_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["min"] = s.min;
  j["avg"] = s.avg;
  j["max"] = s.max;
  return j;
}

nlohmann::ordered_json subset_json(const SubsetStats& s) {
  nlohmann::ordered_json j;
  j["size"] = s.size;
  j["depth"] = summary_json(s.depth);
  j["tokens"] = summary_json(s.tokens);
  j["refs"] = summary_json(s.refs);
  return j;
}

}  // namespace

std::string SplitStats::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["split"] = split;
  j["axioms_and_hyps"] = axioms_and_hyps;
  j["library"] = subset_json(library);
  j["problems"] = subset_json(problems);
  return j.dump(2) + "\n";
}

std::string SplitStats::to_csv_rows() const {
  std::string out;
  auto row = [&](const char* subset, const SubsetStats& s) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%zu,%g,%.2f,%g,%g,%.2f,%g,%g,%.2f,%g\n", dataset.c_str(), split.c_str(),
                  subset, s.size, s.depth.min, s.depth.avg, s.depth.max, s.tokens.min, s.tokens.avg, s.tokens.max,
                  s.refs.min, s.refs.avg, s.refs.max);
    out += buf;
  };
  row("library", library);
  row("problems", problems);
  return out;
}

}  // namespace atg
