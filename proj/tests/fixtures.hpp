#pragma once

#include <atg/metrics.hpp>

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "micro.hpp"

namespace fixtures {

using namespace atg;

inline const Database& mini() {
  static const Database db = parse_database_text(testdata::kMini);
  return db;
}

// Library holding the axiom-level proof of pm2.21i.
inline GeneratedLibrary example_library() {
  GeneratedLibrary lib(mini());
  ProofStore& st = lib.store();
  Expander ex(st);
  lib.add(st, ex.theorem(mini().frame_id("pm2.21i")));
  return lib;
}

inline const char* kChain = R"(
  ax1 $a |- a $.
  ax2 $a |- ( a -> b ) $.
  ax3 $a |- ( b -> c ) $.
  ax4 $a |- ( c -> d ) $.
  ax5 $a |- e $.
  ax6 $a |- ( e -> ( c -> d ) ) $.
  ax7 $a |- ( b -> ( b -> c ) ) $.
)";

inline const Database& chain() {
  static const Database db = parse_database_text(std::string(micro::kHeader) + kChain);
  return db;
}

// Builds a proof from "axN" leaves and "mp(x,y)" applications.
inline std::uint32_t build(ProofStore& st, const std::string& text) {
  std::size_t pos = 0;
  const Database& db = st.db();
  int wi = db.frame_id("wi"), mp = db.frame_id("ax-mp");
  auto rec = [&](auto&& self) -> std::uint32_t {
    if (text.compare(pos, 3, "mp(") == 0) {
      pos += 3;
      std::uint32_t a = self(self);
      ++pos;  // ','
      std::uint32_t b = self(self);
      ++pos;  // ')'
      std::uint32_t imp = st.node(b).concl;
      if (st.node(imp).label != wi) throw std::runtime_error("major premise is not an implication");
      auto k = st.kids(imp);
      std::vector<std::uint32_t> args{k[0], k[1], a, b};
      std::uint32_t r = st.apply(mp, args);
      if (r == kNone) throw std::runtime_error("ill-formed proof text");
      return r;
    }
    std::size_t end = pos;
    while (end < text.size() && std::isalnum(static_cast<unsigned char>(text[end]))) ++end;
    std::string lab = text.substr(pos, end - pos);
    pos = end;
    return st.apply(db.frame_id(lab), {});
  };
  return rec(rec);
}

inline std::string formula(const ProofStore& st, std::uint32_t id) {
  Expr e = st.render(st.node(id).concl);
  return st.db().text(e);
}

inline micro::Tree to_tree(const ProofStore& st, std::uint32_t id) {
  const Node n = st.node(id);
  micro::Tree t{n.kind == NodeKind::Hyp ? "hyp" : st.frames()[n.label].label, formula(st, id), {}};
  for (auto k : st.kids(id))
    if (st.provable(k)) t.kids.push_back(to_tree(st, k));
  return t;
}

inline int add_rule(FrameTable& ft, const std::string& name, const std::vector<std::string>& hyps, const std::string& concl) {
  const Database& db = ft.db();
  std::vector<Expr> hs;
  for (auto& h : hyps) hs.push_back(db.expr("|- " + h));
  return ft.add(make_frame(db, name, hs, db.expr("|- " + concl)));
}

struct Case {
  const char* proof;
  std::vector<micro::Rule> rules;
  int expected;
};

// Hand-built reduction instances with their exhaustive optimum.
inline std::vector<Case> hand_cases() {
  return {
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {}, 7},
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {{"R1", {}, "c"}}, 3},
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {{"R1", {"a"}, "c"}}, 4},
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {{"R1", {"b", "( c -> d )"}, "d"}}, 5},
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {{"R1", {}, "b"}, {"R2", {"b"}, "d"}}, 2},
      {"mp(mp(mp(ax1,ax2),ax3),ax4)", {{"R1", {"a"}, "d"}}, 2},
      {"mp(mp(mp(ax1,ax2),ax3),mp(ax5,ax6))", {{"R1", {"e"}, "( c -> d )"}}, 8},
      {"mp(mp(mp(ax1,ax2),ax3),mp(ax5,ax6))", {{"R1", {}, "c"}, {"R2", {}, "( c -> d )"}}, 3},
      {"mp(mp(mp(ax1,ax2),ax3),mp(ax5,ax6))", {{"R1", {}, "e"}, {"R2", {"d"}, "a"}}, 9},
      {"mp(mp(ax1,ax2),mp(mp(ax1,ax2),ax7))", {{"R1", {}, "b"}}, 5},
  };
}

}  // namespace fixtures
