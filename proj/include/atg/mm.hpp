// Metamath database model, parser and compressed-proof decoder.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace atg {

using Sym = std::int32_t;
// Typecode first, then the body.
using Expr = std::vector<Sym>;

struct VecHash {
  std::size_t operator()(const std::vector<std::int32_t>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto x : v) {
      h ^= static_cast<std::uint32_t>(x);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

class MMError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntax tree in prefix order. Entries >= 0 are syntax frame ids; a negative
// entry -(k+1) is a leaf: variable slot k of the owning frame for frame
// patterns, variable symbol k for free-standing trees.
struct Pattern {
  std::vector<std::int32_t> code;
  bool operator==(const Pattern&) const = default;
};

struct Frame {
  std::string label;
  bool axiom = false;
  bool syntax = false;  // typecode is not the provable one
  std::vector<Sym> vars;  // mandatory variables in hypothesis order
  std::vector<Sym> var_tc;
  std::vector<std::string> float_labels;
  std::vector<Expr> hyps;  // essential hypotheses
  std::vector<std::string> hyp_labels;
  Expr concl;
  // Mandatory hypotheses in order: (true, var slot) or (false, hyp index).
  std::vector<std::pair<bool, int>> order;
  std::vector<std::pair<Sym, Sym>> dv;      // mandatory disjoint pairs
  std::vector<std::pair<Sym, Sym>> ctx_dv;  // all pairs active at declaration
  // Floats active at declaration but not mandatory (usable as dummies).
  std::vector<std::pair<std::string, Sym>> extra_floats;
  Pattern concl_pat;
  std::vector<Pattern> hyp_pats;
  int decl = -1;  // position among assertions of the database

  std::size_t arity() const { return order.size(); }
  int slot_of(Sym v) const;
};

struct CompressedProof {
  bool compressed = false;
  std::vector<std::string> refs;  // referenced labels, or the full list if normal
  std::string letters;
};

struct HypDecl {
  bool floating = false;
  Expr expr;  // [tc, var] for floats
  int scope_id = 0;
};

class Database {
 public:
  // symbols
  Sym intern_constant(const std::string& tok);
  Sym intern_variable(const std::string& tok);
  std::optional<Sym> find_sym(std::string_view tok) const;
  Sym sym(std::string_view tok) const;  // throws if unknown
  const std::string& name(Sym s) const { return sym_names_[s]; }
  bool is_var(Sym s) const { return sym_var_[s]; }
  std::size_t symbol_count() const { return sym_names_.size(); }
  const std::vector<Sym>& variables() const { return variables_; }
  const std::vector<Sym>& constants() const { return constants_; }
  Sym turnstile() const { return turnstile_; }
  Sym wff() const { return wff_; }
  // Global float of a variable (the latest top-level or active declaration).
  Sym var_typecode(Sym v) const;
  const std::string& var_float(Sym v) const;
  int var_rank(Sym v) const;  // declaration rank of the float, -1 if none

  // assertions
  std::vector<Frame> frames;
  std::vector<CompressedProof> proofs;  // parallel to frames
  std::vector<bool> provable;           // parallel to frames
  std::optional<int> find_frame(std::string_view label) const;
  int frame_id(std::string_view label) const;  // throws if unknown
  const HypDecl* find_hyp(std::string_view label) const;
  std::vector<int> provable_ids() const;

  // grammar
  Pattern parse_tree(const Expr& e) const;  // leaves are -(sym+1)
  Sym body_typecode(Sym tc) const;          // typecode used to parse a body
  Expr render_tree(const Pattern& p) const;  // body tokens of a free tree
  const std::vector<int>& syntax_frames() const { return syntax_frames_; }

  std::string text(const Expr& e) const;  // space separated tokens
  Expr expr(std::string_view text) const;  // inverse of text()

  std::string source;  // original text

  // parser internals
  friend class DbReader;
  void finalize_frame(Frame& f) const;

 private:
  std::vector<std::string> sym_names_;
  std::vector<bool> sym_var_;
  std::unordered_map<std::string, Sym> sym_ids_;
  std::vector<Sym> variables_, constants_;
  Sym turnstile_ = -1, wff_ = -1;
  std::unordered_map<Sym, std::pair<std::string, Sym>> var_float_;
  std::unordered_map<Sym, int> var_rank_;
  std::unordered_map<std::string, int> frame_ids_;
  std::unordered_map<std::string, HypDecl> hyps_;
  std::vector<int> syntax_frames_;
};

Database parse_database(std::istream& in);
Database parse_database_text(std::string_view text);
Database load_database(const std::string& path);

// Letter stream to proof step numbers (1-based); 0 marks a Z tag.
std::vector<std::size_t> decode_letters(std::string_view letters);
std::string encode_number(std::size_t n);

std::vector<std::string> decompress_proof(const Database& db, std::string_view label);

}  // namespace atg
