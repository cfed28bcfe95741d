// Theorem reference DAG, depth split and dataset statistics.
#pragma once

#include <atg/mm.hpp>

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace atg {

struct RefGraph {
  std::vector<std::string> labels;  // nodes in topological order
  std::vector<int> frame;           // database frame id per node
  std::vector<bool> axiom;
  std::vector<std::vector<int>> refs;  // node -> referenced nodes
  std::vector<int> depth;
  std::unordered_map<std::string, int> index;

  std::size_t size() const { return labels.size(); }
  int depth_of(const std::string& label) const;
  std::size_t edge_count() const;
};

// Nodes are provable-typecode assertions: every axiom plus the universe
// theorems and anything they reference. Throws on a reference cycle.
RefGraph build_graph(const Database& db, const std::vector<std::string>& universe);

// First n provable statements in declaration order.
std::vector<std::string> first_theorems(const Database& db, std::size_t n);

struct Preset {
  std::string name;
  std::size_t count = 0;
  int k_train = 0, k_test = 0;
  // Role sizes; zero means "derive from the pool".
  std::size_t train_library = 0, train_problems = 0, test_library = 0, test_problems = 0;
};

const Preset& preset(const std::string& name);  // wb, wif, minimp
const std::vector<Preset>& presets();

struct SplitManifest {
  std::string dataset;
  std::string split;  // train | test
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> axioms;
  std::vector<std::string> library;
  std::vector<std::string> problems;

  std::string to_json() const;
  static SplitManifest from_json(const std::string& text);
};

struct SplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<SplitManifest, SplitManifest> make_splits(const Database& db, const RefGraph& graph, const Preset& preset,
                                                    std::uint64_t seed);

struct Summary {
  double min = 0, avg = 0, max = 0;
};

struct SubsetStats {
  std::size_t size = 0;
  Summary depth, tokens, refs;
};

struct SplitStats {
  std::string dataset, split;
  std::size_t axioms_and_hyps = 0;
  SubsetStats library, problems;
  std::string to_json() const;
  std::string to_csv_rows() const;
};

Summary summarize(const std::vector<double>& xs);
SubsetStats subset_stats(const Database& db, const RefGraph& graph, const std::vector<std::string>& labels);
SplitStats split_stats(const SplitManifest& m, const Database& db, const RefGraph& graph);
SplitStats split_stats(const SplitManifest& m, const Database& db);

}  // namespace atg
