#include <atg/generation.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace atg {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const noexcept {
    return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32) ^
                                      static_cast<std::uint32_t>(p.second));
  }
};

// Token vocabulary: each token is a sequence of base symbols.
class Vocab {
 public:
  int intern(std::vector<int> labels) {
    auto [it, fresh] = ids_.try_emplace(labels, static_cast<int>(tokens_.size()));
    if (fresh) tokens_.push_back(std::move(labels));
    return it->second;
  }
  const std::vector<int>& operator[](int t) const { return tokens_[static_cast<std::size_t>(t)]; }

 private:
  std::vector<std::vector<int>> tokens_;
  std::map<std::vector<int>, int> ids_;
};

}  // namespace

std::vector<MinedSegment> bpe_segments(const Database& db, const std::vector<std::string>& corpus) {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> name_id;
  std::vector<int> arity;
  std::vector<bool> assertion;
  auto base = [&](const std::string& l) {
    auto [it, fresh] = name_id.try_emplace(l, static_cast<int>(names.size()));
    if (fresh) {
      names.push_back(l);
      bool hyp = db.find_hyp(l) != nullptr;
      arity.push_back(hyp ? 0 : static_cast<int>(db.frames[static_cast<std::size_t>(db.frame_id(l))].arity()));
      assertion.push_back(!hyp);
    }
    return it->second;
  };

  Vocab vocab;
  std::vector<std::vector<int>> raw, seqs;
  std::vector<int> sources;
  for (auto& label : corpus) {
    verify_proof(db, label);
    std::vector<int> r, s;
    for (auto& l : decompress_proof(db, label)) {
      r.push_back(base(l));
      s.push_back(vocab.intern({r.back()}));
    }
    raw.push_back(std::move(r));
    seqs.push_back(std::move(s));
    sources.push_back(db.frame_id(label));
  }

  std::set<std::vector<int>> found;
  std::vector<MinedSegment> result;
  for (;;) {
    // Most frequent adjacent pair; ties by first appearance.
    std::unordered_map<std::pair<int, int>, std::pair<std::size_t, std::size_t>, PairHash> freq;
    std::size_t pos = 0;
    for (auto& s : seqs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i, ++pos) {
        auto it = freq.try_emplace({s[i], s[i + 1]}, 0, pos).first;
        ++it->second.first;
      }
    std::pair<int, int> best{-1, -1};
    std::size_t best_n = 1, best_first = 0;
    for (auto& [p, cf] : freq)
      if (cf.first > best_n || (cf.first == best_n && best.first >= 0 && cf.second < best_first)) {
        best = p;
        best_n = cf.first;
        best_first = cf.second;
      }
    if (best.first < 0) break;

    for (std::size_t si = 0; si < seqs.size(); ++si) {
      auto& s = seqs[si];
      std::vector<int> out;
      out.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 >= s.size() || s[i] != best.first || s[i + 1] != best.second) {
          out.push_back(s[i]);
          continue;
        }
        std::vector<int> span = vocab[s[i]];
        const auto& second = vocab[s[i + 1]];
        span.insert(span.end(), second.begin(), second.end());
        ++i;
        if (assertion[static_cast<std::size_t>(span.back())]) {
          // Stack items the span still needs to yield exactly one.
          long need = 1;
          bool over = false;
          auto absorb = [&](const std::vector<int>& t) {
            for (auto it = t.rbegin(); it != t.rend(); ++it) {
              if (need == 0) over = true;
              need += arity[static_cast<std::size_t>(*it)] - 1;
            }
          };
          absorb(span);
          std::size_t take = 0;
          for (; !over && need > 0 && take < out.size(); ++take) absorb(vocab[out[out.size() - 1 - take]]);
          if (!over && need == 0) {
            std::vector<int> seg;
            for (std::size_t j = out.size() - take; j < out.size(); ++j)
              seg.insert(seg.end(), vocab[out[j]].begin(), vocab[out[j]].end());
            seg.insert(seg.end(), span.begin(), span.end());
            out.resize(out.size() - take);
            span = seg;
            if (found.insert(seg).second) {
              MinedSegment m;
              m.source = sources[si];
              for (int b : seg) m.labels.push_back(names[static_cast<std::size_t>(b)]);
              for (auto& r : raw) {
                std::size_t before = m.occurrences;
                for (auto it = r.begin(); (it = std::search(it, r.end(), seg.begin(), seg.end())) != r.end(); ++it)
                  ++m.occurrences;
                if (m.occurrences > before) ++m.proofs;
              }
              if (m.proofs >= 2) result.push_back(std::move(m));
            }
          }
        }
        out.push_back(vocab.intern(std::move(span)));
      }
      s = std::move(out);
    }
  }
  return result;
}

std::uint32_t replay(ProofStore& store, const std::vector<std::string>& labels) {
  const Database& db = store.db();
  std::vector<std::uint32_t> stack;
  for (auto& l : labels) {
    if (const HypDecl* h = db.find_hyp(l)) {
      stack.push_back(h->floating ? store.var(h->expr[1]) : store.hyp(store.from_expr(h->expr)));
      continue;
    }
    auto f = db.find_frame(l);
    if (!f) throw ProofError("unknown label " + l);
    std::size_t k = db.frames[static_cast<std::size_t>(*f)].arity();
    if (stack.size() < k) throw ProofError("stack underflow at " + l);
    std::string why;
    std::uint32_t r = store.apply(*f, {stack.data() + stack.size() - k, k}, &why);
    if (r == kNone) throw ProofError("substitution mismatch at " + l + " (" + why + ")");
    stack.resize(stack.size() - k);
    stack.push_back(r);
  }
  if (stack.size() != 1) throw ProofError("label sequence leaves " + std::to_string(stack.size()) + " items");
  return stack[0];
}

std::size_t bpe_mine(const Database& db, const std::vector<std::string>& corpus, GeneratedLibrary& out) {
  for (auto& k : assertion_keys(db, true, false)) out.reserve(k);
  for (int f : db.syntax_frames()) out.reserve(alpha_key(db, {}, db.frames[static_cast<std::size_t>(f)].concl));
  ProofStore store(out.frames());
  std::size_t added = 0;
  for (auto& seg : bpe_segments(db, corpus))
    if (out.add(store, replay(store, seg.labels))) ++added;
  return added;
}

}  // namespace atg
