#include "atg/mm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace atg {

int Frame::slot_of(Sym v) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == v) return static_cast<int>(i);
  return -1;
}

Sym Database::intern_constant(const std::string& tok) {
  auto it = sym_ids_.find(tok);
  if (it != sym_ids_.end()) {
    if (sym_var_[it->second]) throw MMError("symbol redeclared as constant: " + tok);
    throw MMError("constant declared twice: " + tok);
  }
  Sym s = static_cast<Sym>(sym_names_.size());
  sym_names_.push_back(tok);
  sym_var_.push_back(false);
  sym_ids_.emplace(tok, s);
  constants_.push_back(s);
  if (tok == "|-") turnstile_ = s;
  if (tok == "wff") wff_ = s;
  return s;
}

Sym Database::intern_variable(const std::string& tok) {
  auto it = sym_ids_.find(tok);
  if (it != sym_ids_.end()) {
    if (!sym_var_[it->second]) throw MMError("symbol redeclared as variable: " + tok);
    return it->second;
  }
  Sym s = static_cast<Sym>(sym_names_.size());
  sym_names_.push_back(tok);
  sym_var_.push_back(true);
  sym_ids_.emplace(tok, s);
  variables_.push_back(s);
  return s;
}

std::optional<Sym> Database::find_sym(std::string_view tok) const {
  auto it = sym_ids_.find(std::string(tok));
  if (it == sym_ids_.end()) return std::nullopt;
  return it->second;
}

Sym Database::sym(std::string_view tok) const {
  auto s = find_sym(tok);
  if (!s) throw MMError("unknown symbol: " + std::string(tok));
  return *s;
}

Sym Database::var_typecode(Sym v) const {
  auto it = var_float_.find(v);
  if (it == var_float_.end()) throw MMError("variable without float: " + name(v));
  return it->second.second;
}

const std::string& Database::var_float(Sym v) const {
  auto it = var_float_.find(v);
  if (it == var_float_.end()) throw MMError("variable without float: " + name(v));
  return it->second.first;
}

int Database::var_rank(Sym v) const {
  auto it = var_rank_.find(v);
  return it == var_rank_.end() ? -1 : it->second;
}

std::optional<int> Database::find_frame(std::string_view label) const {
  auto it = frame_ids_.find(std::string(label));
  if (it == frame_ids_.end()) return std::nullopt;
  return it->second;
}

int Database::frame_id(std::string_view label) const {
  auto f = find_frame(label);
  if (!f) throw MMError("unknown assertion label: " + std::string(label));
  return *f;
}

const HypDecl* Database::find_hyp(std::string_view label) const {
  auto it = hyps_.find(std::string(label));
  return it == hyps_.end() ? nullptr : &it->second;
}

std::vector<int> Database::provable_ids() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (provable[i]) out.push_back(static_cast<int>(i));
  return out;
}

Sym Database::body_typecode(Sym tc) const {
  if (tc == turnstile_ && wff_ >= 0) return wff_;
  return tc;
}

std::string Database::text(const Expr& e) const {
  std::string out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i) out += ' ';
    out += name(e[i]);
  }
  return out;
}

Expr Database::expr(std::string_view text) const {
  Expr out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(sym(tok));
  return out;
}

// ---------------------------------------------------------------- grammar

namespace {

struct Alt {
  int end;
  std::vector<std::int32_t> code;
};

class GrammarParser {
 public:
  GrammarParser(const Database& db, const Sym* toks, int n) : db_(db), t_(toks), n_(n) {}

  const std::vector<Alt>& parse(int pos, Sym tc) {
    auto key = std::make_pair(pos, tc);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    if (busy_.count(key)) return empty_;
    busy_.insert(key);
    std::vector<Alt> out;
    if (pos < n_ && db_.is_var(t_[pos]) && db_.var_typecode(t_[pos]) == tc)
      out.push_back({pos + 1, {-(t_[pos] + 1)}});
    for (int fid : db_.syntax_frames()) {
      const Frame& f = db_.frames[fid];
      if (f.concl[0] != tc) continue;
      std::vector<std::vector<std::int32_t>> kids(f.vars.size());
      expand(f, fid, 1, pos, kids, out);
    }
    busy_.erase(key);
    return memo_[key] = std::move(out);
  }

 private:
  void expand(const Frame& f, int fid, std::size_t i, int pos,
              std::vector<std::vector<std::int32_t>>& kids, std::vector<Alt>& out) {
    if (i == f.concl.size()) {
      Alt a{pos, {fid}};
      for (auto& k : kids) a.code.insert(a.code.end(), k.begin(), k.end());
      out.push_back(std::move(a));
      return;
    }
    Sym s = f.concl[i];
    if (!db_.is_var(s)) {
      if (pos < n_ && t_[pos] == s) expand(f, fid, i + 1, pos + 1, kids, out);
      return;
    }
    int slot = f.slot_of(s);
    auto subs = parse(pos, f.var_tc[slot]);  // copy: memo may rehash
    for (auto& a : subs) {
      kids[slot] = a.code;
      expand(f, fid, i + 1, a.end, kids, out);
    }
    kids[slot].clear();
  }

  const Database& db_;
  const Sym* t_;
  int n_;
  std::map<std::pair<int, Sym>, std::vector<Alt>> memo_;
  std::set<std::pair<int, Sym>> busy_;
  std::vector<Alt> empty_;
};

}  // namespace

Pattern Database::parse_tree(const Expr& e) const {
  if (e.empty()) throw MMError("empty expression");
  Sym tc = body_typecode(e[0]);
  int n = static_cast<int>(e.size()) - 1;
  GrammarParser p(*this, e.data() + 1, n);
  std::vector<std::vector<std::int32_t>> full;
  for (auto& a : p.parse(0, tc))
    if (a.end == n && std::find(full.begin(), full.end(), a.code) == full.end()) full.push_back(a.code);
  if (full.empty()) throw MMError("unparsable expression: " + text(e));
  if (full.size() > 1) throw MMError("ambiguous expression: " + text(e));
  return Pattern{std::move(full[0])};
}

Expr Database::render_tree(const Pattern& p) const {
  Expr out;
  std::size_t pos = 0;
  auto rec = [&](auto&& self) -> void {
    std::int32_t c = p.code.at(pos++);
    if (c < 0) {
      out.push_back(-c - 1);
      return;
    }
    const Frame& f = frames[c];
    std::vector<Expr> kids(f.vars.size());
    for (auto& k : kids) {
      std::swap(out, k);
      self(self);
      std::swap(out, k);
    }
    for (std::size_t i = 1; i < f.concl.size(); ++i) {
      Sym s = f.concl[i];
      if (is_var(s)) {
        auto& k = kids[f.slot_of(s)];
        out.insert(out.end(), k.begin(), k.end());
      } else {
        out.push_back(s);
      }
    }
  };
  rec(rec);
  return out;
}

void Database::finalize_frame(Frame& f) const {
  auto to_slots = [&](Pattern p) {
    for (auto& c : p.code)
      if (c < 0) {
        int slot = f.slot_of(-c - 1);
        if (slot < 0) throw MMError("variable not mandatory in " + f.label);
        c = -(slot + 1);
      }
    return p;
  };
  if (f.syntax && f.axiom) {
    f.concl_pat.code.clear();
    f.concl_pat.code.push_back(f.decl);
    for (std::size_t i = 0; i < f.vars.size(); ++i) f.concl_pat.code.push_back(-static_cast<int>(i) - 1);
    return;
  }
  f.concl_pat = to_slots(parse_tree(f.concl));
  f.hyp_pats.clear();
  for (auto& h : f.hyps) f.hyp_pats.push_back(to_slots(parse_tree(h)));
}

// ---------------------------------------------------------------- reader

namespace {

struct Token {
  std::string text;
  int line;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0, n = src.size();
  bool in_comment = false;
  int comment_line = 0;
  while (i < n) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
      ++i;
      continue;
    }
    if (static_cast<unsigned char>(c) < 32 || static_cast<unsigned char>(c) > 126)
      throw MMError("lexical error: invalid character at line " + std::to_string(line));
    std::size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(src[j]))) ++j;
    std::string tok(src.substr(i, j - i));
    i = j;
    if (in_comment) {
      if (tok == "$)") in_comment = false;
      else if (tok.find("$(") != std::string::npos || tok.find("$)") != std::string::npos)
        throw MMError("lexical error: nested comment at line " + std::to_string(line));
      continue;
    }
    if (tok == "$(") {
      in_comment = true;
      comment_line = line;
      continue;
    }
    out.push_back({std::move(tok), line});
  }
  if (in_comment) throw MMError("lexical error: unterminated comment from line " + std::to_string(comment_line));
  return out;
}

bool is_keyword(const std::string& t) {
  return t.size() == 2 && t[0] == '$';
}

void check_label(const Token& t) {
  for (char c : t.text)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      throw MMError("lexical error: bad label '" + t.text + "' at line " + std::to_string(t.line));
}

}  // namespace

class DbReader {
 public:
  explicit DbReader(Database& db) : db_(db) {}

  void read(const std::vector<Token>& toks) {
    scopes_.push_back(Scope{});
    std::size_t i = 0;
    std::string label;
    int label_line = 0;
    while (i < toks.size()) {
      const Token& t = toks[i++];
      if (!is_keyword(t.text)) {
        if (t.text.find('$') != std::string::npos)
          throw MMError("lexical error: unexpected '" + t.text + "' at line " + std::to_string(t.line));
        if (!label.empty()) throw MMError("label without statement: " + label);
        check_label(t);
        label = t.text;
        label_line = t.line;
        if (db_.frame_ids_.count(label) || db_.hyps_.count(label))
          throw MMError("duplicate label " + label + " at line " + std::to_string(t.line));
        continue;
      }
      const std::string& kw = t.text;
      auto need_label = [&](bool want) {
        if (want && label.empty()) throw MMError(kw + " without label at line " + std::to_string(t.line));
        if (!want && !label.empty())
          throw MMError("unexpected label " + label + " at line " + std::to_string(label_line));
      };
      if (kw == "${") {
        need_label(false);
        Scope s;
        s.id = ++scope_counter_;
        scopes_.push_back(std::move(s));
      } else if (kw == "$}") {
        need_label(false);
        if (scopes_.size() == 1) throw MMError("malformed scoping: unmatched $} at line " + std::to_string(t.line));
        for (Sym v : scopes_.back().vars) active_vars_.erase(v);
        for (auto& fl : scopes_.back().floats) active_float_.erase(fl.second);
        scopes_.pop_back();
      } else if (kw == "$c") {
        need_label(false);
        for (auto& s : body(toks, i, "$.")) {
          if (scopes_.size() > 1) throw MMError("malformed scoping: $c inside block at line " + std::to_string(s.line));
          check_math(s);
          db_.intern_constant(s.text);
        }
      } else if (kw == "$v") {
        need_label(false);
        for (auto& s : body(toks, i, "$.")) {
          check_math(s);
          Sym v = db_.intern_variable(s.text);
          if (active_vars_.count(v)) throw MMError("variable declared twice: " + s.text);
          active_vars_.insert(v);
          scopes_.back().vars.push_back(v);
        }
      } else if (kw == "$d") {
        need_label(false);
        std::vector<Sym> vs;
        for (auto& s : body(toks, i, "$.")) {
          Sym v = math(s);
          if (!db_.is_var(v)) throw MMError("$d on constant at line " + std::to_string(s.line));
          vs.push_back(v);
        }
        for (std::size_t a = 0; a < vs.size(); ++a)
          for (std::size_t b = a + 1; b < vs.size(); ++b) {
            if (vs[a] == vs[b]) throw MMError("$d repeats a variable at line " + std::to_string(t.line));
            scopes_.back().dv.emplace_back(std::min(vs[a], vs[b]), std::max(vs[a], vs[b]));
          }
      } else if (kw == "$f") {
        need_label(true);
        auto b = body(toks, i, "$.");
        if (b.size() != 2) throw MMError("malformed $f at line " + std::to_string(t.line));
        Sym tc = math(b[0]), v = math(b[1]);
        if (db_.is_var(tc) || !db_.is_var(v)) throw MMError("malformed $f at line " + std::to_string(t.line));
        if (active_float_.count(v)) throw MMError("variable has two floats: " + b[1].text);
        HypDecl h{true, {tc, v}, scopes_.back().id};
        db_.hyps_.emplace(label, h);
        scopes_.back().floats.emplace_back(label, v);
        scopes_.back().hyp_order.push_back(label);
        active_float_[v] = label;
        db_.var_float_[v] = {label, tc};
        if (!db_.var_rank_.count(v)) db_.var_rank_[v] = static_cast<int>(db_.var_rank_.size());
        label.clear();
      } else if (kw == "$e") {
        need_label(true);
        Expr e = expr_body(toks, i, "$.", t.line);
        db_.hyps_.emplace(label, HypDecl{false, e, scopes_.back().id});
        scopes_.back().ess.push_back(label);
        scopes_.back().hyp_order.push_back(label);
        label.clear();
      } else if (kw == "$a" || kw == "$p") {
        need_label(true);
        bool prov = kw == "$p";
        Expr e = expr_body(toks, i, prov ? "$=" : "$.", t.line);
        Frame f = make_frame(label, e, !prov);
        CompressedProof pr;
        if (prov) pr = read_proof(toks, i, t.line);
        int id = static_cast<int>(db_.frames.size());
        f.decl = id;
        if (f.syntax && f.hyps.empty() && !prov) {
          db_.syntax_frames_.push_back(id);
        }
        db_.finalize_frame(f);
        db_.frames.push_back(std::move(f));
        db_.proofs.push_back(std::move(pr));
        db_.provable.push_back(prov);
        db_.frame_ids_.emplace(label, id);
        label.clear();
      } else if (kw == "$[") {
        throw MMError("file inclusion is not supported (line " + std::to_string(t.line) + ")");
      } else {
        throw MMError("lexical error: unexpected " + kw + " at line " + std::to_string(t.line));
      }
    }
    if (!label.empty()) throw MMError("label without statement: " + label);
    if (scopes_.size() != 1) throw MMError("malformed scoping: unclosed ${");
  }

 private:
  struct Scope {
    int id = 0;
    std::vector<Sym> vars;
    std::vector<std::pair<std::string, Sym>> floats;
    std::vector<std::string> ess;
    std::vector<std::string> hyp_order;
    std::vector<std::pair<Sym, Sym>> dv;
  };

  std::vector<Token> body(const std::vector<Token>& toks, std::size_t& i, const char* end) {
    std::vector<Token> out;
    while (true) {
      if (i >= toks.size()) throw MMError(std::string("unterminated statement, expected ") + end);
      const Token& t = toks[i++];
      if (t.text == end) return out;
      if (is_keyword(t.text)) throw MMError("unexpected " + t.text + " at line " + std::to_string(t.line));
      out.push_back(t);
    }
  }

  void check_math(const Token& t) {
    if (t.text.find('$') != std::string::npos)
      throw MMError("lexical error: bad math symbol '" + t.text + "' at line " + std::to_string(t.line));
  }

  Sym math(const Token& t) {
    auto s = db_.find_sym(t.text);
    if (!s) throw MMError("undeclared symbol '" + t.text + "' at line " + std::to_string(t.line));
    if (db_.is_var(*s) && !active_vars_.count(*s))
      throw MMError("inactive variable '" + t.text + "' at line " + std::to_string(t.line));
    return *s;
  }

  Expr expr_body(const std::vector<Token>& toks, std::size_t& i, const char* end, int line) {
    Expr e;
    for (auto& t : body(toks, i, end)) e.push_back(math(t));
    if (e.empty() || db_.is_var(e[0])) throw MMError("missing typecode at line " + std::to_string(line));
    for (std::size_t k = 1; k < e.size(); ++k)
      if (db_.is_var(e[k]) && !active_float_.count(e[k]))
        throw MMError("variable without float '" + db_.name(e[k]) + "' at line " + std::to_string(line));
    return e;
  }

  Frame make_frame(const std::string& label, const Expr& concl, bool axiom) {
    Frame f;
    f.label = label;
    f.axiom = axiom;
    f.syntax = concl[0] != db_.turnstile_;
    f.concl = concl;
    std::set<Sym> mand;
    auto note = [&](const Expr& e) {
      for (std::size_t k = 1; k < e.size(); ++k)
        if (db_.is_var(e[k])) mand.insert(e[k]);
    };
    note(concl);
    for (auto& sc : scopes_)
      for (auto& l : sc.ess) note(db_.hyps_.at(l).expr);
    for (auto& sc : scopes_)
      for (auto& l : sc.hyp_order) {
        const HypDecl& h = db_.hyps_.at(l);
        if (h.floating) {
          Sym v = h.expr[1];
          if (!mand.count(v)) {
            f.extra_floats.emplace_back(l, v);
            continue;
          }
          f.order.emplace_back(true, static_cast<int>(f.vars.size()));
          f.vars.push_back(v);
          f.var_tc.push_back(h.expr[0]);
          f.float_labels.push_back(l);
        } else {
          f.order.emplace_back(false, static_cast<int>(f.hyps.size()));
          f.hyps.push_back(h.expr);
          f.hyp_labels.push_back(l);
        }
      }
    for (auto& sc : scopes_)
      for (auto& p : sc.dv) {
        f.ctx_dv.push_back(p);
        if (mand.count(p.first) && mand.count(p.second)) f.dv.push_back(p);
      }
    std::sort(f.ctx_dv.begin(), f.ctx_dv.end());
    f.ctx_dv.erase(std::unique(f.ctx_dv.begin(), f.ctx_dv.end()), f.ctx_dv.end());
    std::sort(f.dv.begin(), f.dv.end());
    f.dv.erase(std::unique(f.dv.begin(), f.dv.end()), f.dv.end());
    return f;
  }

  CompressedProof read_proof(const std::vector<Token>& toks, std::size_t& i, int line) {
    CompressedProof pr;
    auto b = body(toks, i, "$.");
    if (b.empty()) throw MMError("empty proof at line " + std::to_string(line));
    if (b[0].text == "(") {
      pr.compressed = true;
      std::size_t k = 1;
      for (; k < b.size() && b[k].text != ")"; ++k) pr.refs.push_back(b[k].text);
      if (k == b.size()) throw MMError("unterminated reference list at line " + std::to_string(line));
      for (++k; k < b.size(); ++k) {
        for (char c : b[k].text)
          if (!(c >= 'A' && c <= 'Z') && c != '?')
            throw MMError("lexical error: bad proof letter at line " + std::to_string(b[k].line));
        pr.letters += b[k].text;
      }
    } else {
      for (auto& t : b) pr.refs.push_back(t.text);
    }
    return pr;
  }

  Database& db_;
  std::vector<Scope> scopes_;
  int scope_counter_ = 0;
  std::set<Sym> active_vars_;
  std::unordered_map<Sym, std::string> active_float_;
};

Database parse_database_text(std::string_view text) {
  Database db;
  db.source = std::string(text);
  DbReader r(db);
  r.read(tokenize(text));
  return db;
}

Database parse_database(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_database_text(ss.str());
}

Database load_database(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MMError("cannot open " + path);
  return parse_database(in);
}

// ---------------------------------------------------------------- proofs

std::vector<std::size_t> decode_letters(std::string_view letters) {
  std::vector<std::size_t> out;
  std::size_t cur = 0;
  bool pending = false;
  for (char ch : letters) {
    if (ch >= 'A' && ch <= 'T') {
      out.push_back(20 * cur + static_cast<std::size_t>(ch - 'A' + 1));
      cur = 0;
      pending = false;
    } else if (ch >= 'U' && ch <= 'Y') {
      cur = 5 * cur + static_cast<std::size_t>(ch - 'U' + 1);
      pending = true;
    } else if (ch == 'Z') {
      if (pending) throw MMError("Z inside a number");
      out.push_back(0);
    } else if (ch == '?') {
      throw MMError("incomplete proof");
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      throw MMError(std::string("bad proof letter ") + ch);
    }
  }
  if (pending) throw MMError("truncated number in letter stream");
  return out;
}

std::string encode_number(std::size_t n) {
  if (n == 0) throw MMError("cannot encode 0");
  std::string s(1, static_cast<char>('A' + (n - 1) % 20));
  n = (n - 1) / 20;
  while (n > 0) {
    s.insert(s.begin(), static_cast<char>('U' + (n - 1) % 5));
    n = (n - 1) / 5;
  }
  return s;
}

std::vector<std::string> decompress_proof(const Database& db, std::string_view label) {
  int id = db.frame_id(label);
  if (!db.provable[id]) throw MMError(std::string(label) + " is not a provable statement");
  const Frame& f = db.frames[id];
  const CompressedProof& pr = db.proofs[id];
  if (!pr.compressed) return pr.refs;
  std::vector<std::string> labels;
  for (auto [fl, k] : f.order) labels.push_back(fl ? f.float_labels[k] : f.hyp_labels[k]);
  std::size_t nmand = labels.size();
  for (auto& r : pr.refs) labels.push_back(r);
  auto arity = [&](const std::string& l) -> std::size_t {
    if (db.find_hyp(l)) return 0;
    auto fid = db.find_frame(l);
    if (!fid) throw MMError("unknown label " + l);
    return db.frames[*fid].arity();
  };
  (void)nmand;
  std::vector<std::string> out;
  std::vector<std::vector<std::string>> saved;
  std::vector<std::size_t> starts;  // start index in out of each stack entry
  for (std::size_t num : decode_letters(pr.letters)) {
    if (num == 0) {
      if (starts.empty()) throw MMError("dangling Z");
      saved.emplace_back(out.begin() + static_cast<std::ptrdiff_t>(starts.back()), out.end());
      continue;
    }
    if (num <= labels.size()) {
      const std::string& l = labels[num - 1];
      std::size_t start = out.size();
      std::size_t k = arity(l);
      if (starts.size() < k) throw MMError("stack underflow at " + l);
      for (std::size_t j = 0; j < k; ++j) {
        start = starts.back();
        starts.pop_back();
      }
      out.push_back(l);
      starts.push_back(start);
    } else {
      std::size_t idx = num - labels.size() - 1;
      if (idx >= saved.size()) throw MMError("index out of range");
      starts.push_back(out.size());
      out.insert(out.end(), saved[idx].begin(), saved[idx].end());
    }
  }
  return out;
}

}  // namespace atg
