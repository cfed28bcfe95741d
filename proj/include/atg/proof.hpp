// Hash-consed proof DAGs, the verifying stack machine, assertion matching
// and the Metamath emitter.
#pragma once

#include <atg/mm.hpp>

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>

namespace atg {

// Database frames followed by frames added at run time (generated theorems).
class FrameTable {
 public:
  explicit FrameTable(const Database& db) : db_(&db) {}
  const Database& db() const { return *db_; }
  std::size_t size() const { return db_->frames.size() + extra_.size(); }
  const Frame& operator[](std::size_t id) const {
    return id < db_->frames.size() ? db_->frames[id] : extra_[id - db_->frames.size()];
  }
  bool is_db(std::size_t id) const { return id < db_->frames.size(); }
  int add(Frame f);  // assigns decl and returns the new id
  std::optional<int> find(std::string_view label) const;

 private:
  const Database* db_;
  std::deque<Frame> extra_;
  std::unordered_map<std::string, int> extra_ids_;
};

enum class NodeKind : std::uint8_t { Var, Syn, Hyp, App };

struct Node {
  NodeKind kind;
  Sym tc;
  std::int32_t label;   // variable symbol for Var, frame id for Syn/App
  std::uint32_t concl;  // body tree for Hyp/App, the node itself otherwise
  std::uint32_t kid_off;
  std::uint32_t nkids;
  std::uint64_t size;   // provable steps, saturating
};

constexpr std::uint32_t kNone = 0xffffffffu;

struct ProofError : MMError {
  using MMError::MMError;
};

class ProofStore {
 public:
  explicit ProofStore(const FrameTable& ft);
  explicit ProofStore(std::shared_ptr<const FrameTable> ft);
  ProofStore(const ProofStore&) = delete;
  ProofStore& operator=(const ProofStore&) = delete;

  const FrameTable& frames() const { return *ft_; }
  const Database& db() const { return ft_->db(); }

  std::uint32_t var(Sym v);
  std::uint32_t syn(int frame, std::span<const std::uint32_t> kids);
  std::uint32_t hyp(std::uint32_t concl);
  // Applies an assertion to operand nodes; returns kNone (and a reason) on
  // any mismatch. Syntax axioms yield Syn nodes, syntax theorems the
  // instantiated expression.
  std::uint32_t apply(int frame, std::span<const std::uint32_t> args, std::string* why = nullptr);

  std::uint32_t instantiate(const Pattern& p, std::span<const std::uint32_t> sigma);
  // Like instantiate but never creates nodes; kNone if the tree is absent.
  std::uint32_t find_instance(const Pattern& p, std::span<const std::uint32_t> sigma) const;
  // Copies a proof from another store over the same frame ids.
  std::uint32_t import(const ProofStore& from, std::uint32_t root);
  // Binds unbound slots (kNone) and checks bound ones.
  bool match(const Pattern& p, std::uint32_t body, std::vector<std::uint32_t>& sigma,
             std::span<const Sym> slot_tc = {}) const;
  std::uint32_t from_tree(const Pattern& free_tree);  // leaves are symbols
  std::uint32_t from_expr(const Expr& e);             // parse, returns the body tree
  Pattern to_tree(std::uint32_t body) const;           // free tree

  Expr render(std::uint32_t body) const;     // body tokens
  Expr statement(std::uint32_t node) const;  // typecode + body for any node
  void vars_of(std::uint32_t body, std::vector<Sym>& out) const;

  const Node& node(std::uint32_t id) const { return nodes_[id]; }
  std::span<const std::uint32_t> kids(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return {kids_.data() + n.kid_off, n.nkids};
  }
  std::uint64_t size(std::uint32_t id) const { return nodes_[id].size; }
  bool provable(std::uint32_t id) const {
    auto k = nodes_[id].kind;
    return k == NodeKind::Hyp || k == NodeKind::App;
  }
  std::size_t node_count() const { return nodes_.size(); }

  // Reverse Polish label sequence of a proof, labels resolved by the callback
  // for hypothesis leaves.
  std::vector<std::string> rpn(std::uint32_t root,
                               const std::function<std::string(std::uint32_t)>& hyp_label) const;

 private:
  std::uint32_t intern(NodeKind kind, Sym tc, std::int32_t label, std::uint32_t concl,
                       std::span<const std::uint32_t> kids);
  std::uint32_t find(NodeKind kind, std::int32_t label, std::uint32_t concl,
                     std::span<const std::uint32_t> kids) const;
  bool same(std::uint32_t id, NodeKind kind, std::int32_t label, std::uint32_t concl,
            std::span<const std::uint32_t> kids) const;
  static std::uint64_t hash_key(NodeKind kind, std::int32_t label, std::uint32_t concl,
                                std::span<const std::uint32_t> kids);
  void grow();

  std::shared_ptr<const FrameTable> owned_;
  const FrameTable* ft_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> kids_;
  std::vector<std::uint32_t> table_;  // open addressing, kNone = empty
  std::vector<std::uint64_t> hashes_;
  std::unordered_map<Expr, std::uint32_t, VecHash> expr_cache_;
};

struct ProofTree {
  std::shared_ptr<ProofStore> store;
  std::uint32_t root = kNone;
  std::uint64_t steps() const { return store->size(root); }
  Expr conclusion() const { return store->statement(root); }
};

// Verifies a database assertion's proof into the given store.
std::uint32_t verify_into(ProofStore& store, int frame);
ProofTree verify_proof(const Database& db, std::string_view label);

using Substitution = std::map<Sym, Expr>;  // variable to body tokens

std::optional<Substitution> match_assertion(const Database& db, const Frame& frame, const Expr& target,
                                            const std::vector<Expr>& pool);

// Builds a frame for (hyps, concl) with mandatory variables in float order.
Frame make_frame(const Database& db, std::string label, const std::vector<Expr>& hyps, const Expr& concl);

// Emits a ${ ... $} block whose compressed proof re-verifies. Throws if the
// proof does not establish the frame.
std::string emit_theorem(const Frame& frame, const ProofStore& store, std::uint32_t root);

// Canonical form up to variable renaming and hypothesis order.
std::string alpha_key(const Database& db, const std::vector<Expr>& hyps, const Expr& concl);

}  // namespace atg
