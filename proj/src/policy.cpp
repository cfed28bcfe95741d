#include <atg/policy.hpp>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>
#include <unistd.h>

namespace atg {

// ---------------------------------------------------------------- features

namespace {

constexpr std::size_t kItems = 3;
constexpr std::size_t kKinds = 4;

std::uint32_t fnv(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::uint32_t body_of(const ProofStore& st, std::uint32_t n) {
  return st.provable(n) ? st.node(n).concl : n;
}

}  // namespace

FeatureEncoder::FeatureEncoder(const Database& db, int max_steps)
    : db_(&db), max_steps_(std::max(max_steps, 1)), constants_(db.constants()) {
  std::sort(constants_.begin(), constants_.end());
  item_size_ = 6 + constants_.size();
  state_size_ = 4 + kItems * item_size_ + kKinds + 1;
  action_size_ = kKinds + 7 + kBuckets + 1;
}

void FeatureEncoder::encode_item(const ProofStore& st, std::uint32_t n, double* out) const {
  const Node& node = st.node(n);
  Expr body = st.render(body_of(st, n));
  out[0] = 1;
  out[1] = st.provable(n) ? 1 : 0;
  out[2] = node.kind == NodeKind::Var ? 1 : 0;
  out[3] = std::log1p(static_cast<double>(node.size)) / 4;
  out[4] = static_cast<double>(body.size()) / 20;
  std::set<Sym> vars;
  for (std::size_t c = 0; c < constants_.size(); ++c) out[6 + c] = 0;
  for (Sym s : body) {
    if (db_->is_var(s)) {
      vars.insert(s);
      continue;
    }
    auto it = std::lower_bound(constants_.begin(), constants_.end(), s);
    if (it != constants_.end() && *it == s) out[6 + static_cast<std::size_t>(it - constants_.begin())] += 0.2;
  }
  out[5] = static_cast<double>(vars.size()) / 5;
}

void FeatureEncoder::encode_state(const ProofStore& st, const ActionSpace& space, const State& s, double* out) const {
  std::fill(out, out + state_size_, 0.0);
  std::size_t provable = 0;
  for (auto n : s.stack) provable += st.provable(n) ? 1 : 0;
  out[0] = static_cast<double>(s.stack.size()) / 8;
  out[1] = static_cast<double>(s.history.size()) / max_steps_;
  out[2] = static_cast<double>(provable) / 8;
  out[3] = s.stack.empty() ? 1 : 0;
  for (std::size_t i = 0; i < kItems && i < s.stack.size(); ++i)
    encode_item(st, s.stack[s.stack.size() - 1 - i], out + 4 + i * item_size_);
  double* last = out + 4 + kItems * item_size_;
  if (s.history.empty())
    last[kKinds] = 1;
  else
    last[static_cast<std::size_t>(space[static_cast<std::size_t>(s.history.back())].kind)] = 1;
}

bool applicable(const ProofStore& st, const ActionSpace& space, const State& s, int action) {
  if (action < 0 || static_cast<std::size_t>(action) >= space.size()) return false;
  const Action& a = space[static_cast<std::size_t>(action)];
  if (a.kind == ActionKind::Push || a.kind == ActionKind::Hyp) return true;
  const Frame& f = st.frames()[static_cast<std::size_t>(a.frame)];
  std::size_t k = f.arity();
  if (s.stack.size() < k) return false;
  const std::uint32_t* args = s.stack.data() + s.stack.size() - k;
  std::vector<std::uint32_t> sigma(f.vars.size(), kNone);
  for (std::size_t i = 0; i < k; ++i) {
    auto [fl, slot] = f.order[i];
    if (!fl) continue;
    const Node& n = st.node(args[i]);
    if ((n.kind != NodeKind::Var && n.kind != NodeKind::Syn) || n.tc != f.var_tc[static_cast<std::size_t>(slot)])
      return false;
    sigma[static_cast<std::size_t>(slot)] = args[i];
  }
  if (f.syntax) return f.hyps.empty();
  for (std::size_t i = 0; i < k; ++i) {
    auto [fl, slot] = f.order[i];
    if (fl) continue;
    if (!st.provable(args[i])) return false;
    if (!st.match(f.hyp_pats[static_cast<std::size_t>(slot)], st.node(args[i]).concl, sigma)) return false;
  }
  return true;
}

void FeatureEncoder::encode_action(const ProofStore& st, const ActionSpace& space, const State& s, int action,
                                   double* out) const {
  std::fill(out, out + action_size_, 0.0);
  if (action < 0) {
    out[action_size_ - 1] = 1;
    return;
  }
  const Action& a = space[static_cast<std::size_t>(action)];
  out[static_cast<std::size_t>(a.kind)] = 1;
  double* f = out + kKinds;
  f[0] = a.arity / 4.0;
  f[1] = a.ref_depth / 5.0;
  bool ok = applicable(st, space, s, action);
  f[2] = ok ? 1 : 0;
  if (ok) {
    std::size_t depth = s.stack.size() - static_cast<std::size_t>(a.arity) + 1;
    bool proves = a.kind == ActionKind::Hyp ||
                  ((a.kind == ActionKind::Axiom || a.kind == ActionKind::Theorem) &&
                   !st.frames()[static_cast<std::size_t>(a.frame)].syntax);
    f[3] = depth == 1 && proves && a.kind != ActionKind::Hyp ? 1 : 0;
    f[4] = static_cast<double>(depth) / 8;
    f[5] = proves ? 1 : 0;
  }
  f[6] = a.kind == ActionKind::Hyp ? static_cast<double>(a.hyp.size()) / 20 : 0;
  out[kKinds + 7 + fnv(a.label) % kBuckets] = 1;
}

std::vector<double> FeatureEncoder::encode(const ProofStore& st, const ActionSpace& space, const State& s,
                                           int action) const {
  std::vector<double> x(size());
  encode_state(st, space, s, x.data());
  encode_action(st, space, s, action, x.data() + state_size_);
  return x;
}

// ---------------------------------------------------------------- samples

std::vector<TrainingSample> collect(const FeatureEncoder& enc, const std::vector<Path>& paths, double gamma) {
  std::vector<TrainingSample> out;
  for (auto& p : paths) {
    if (p.steps.empty()) continue;
    const std::size_t n = p.steps.size();
    for (auto& step : p.steps) {
      if (step.actions.size() != step.visits.size()) throw std::invalid_argument("trace step with mismatched targets");
      double total = std::accumulate(step.visits.begin(), step.visits.end(), 0.0);
      if (step.actions.size() < 2 || !(total > 0)) continue;
      TrainingSample t;
      t.kind = TrainingSample::Policy;
      for (std::size_t i = 0; i < step.actions.size(); ++i) {
        t.features.push_back(enc.encode(*p.store, *p.space, step.state, step.actions[i]));
        t.target.push_back(step.visits[i] / total);
      }
      out.push_back(std::move(t));
    }
    TrainingSample root;
    root.kind = TrainingSample::Value;
    root.features.push_back(enc.encode(*p.store, *p.space, p.steps.front().state, -1));
    root.target.push_back(std::pow(gamma, static_cast<double>(n)) * p.reward);
    out.push_back(std::move(root));
    for (std::size_t i = 0; i < n; ++i) {
      TrainingSample t;
      t.kind = TrainingSample::Value;
      t.features.push_back(enc.encode(*p.store, *p.space, p.steps[i].state, p.steps[i].chosen));
      t.target.push_back(std::pow(gamma, static_cast<double>(n - 1 - i)) * p.reward);
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<Path> library_paths(const TheoremLibrary& lib, const std::vector<std::string>& labels) {
  const Database& db = lib.db();
  auto frames = lib.generated().frames();
  ActionSpace base;
  for (int f : lib.axioms())
    base.push_back({ActionKind::Axiom, db.frames[static_cast<std::size_t>(f)].label, f, -1, {},
                    static_cast<int>(db.frames[static_cast<std::size_t>(f)].arity()), 0});
  for (int f : lib.grammar())
    base.push_back({ActionKind::Axiom, db.frames[static_cast<std::size_t>(f)].label, f, -1, {},
                    static_cast<int>(db.frames[static_cast<std::size_t>(f)].arity()), 0});
  for (Sym v : lib.wff_vars()) base.push_back({ActionKind::Push, db.var_float(v), -1, v, {}, 0, 0});

  std::vector<Path> out;
  for (auto& label : labels) {
    auto space = std::make_shared<ActionSpace>(base);
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < space->size(); ++i) index.emplace((*space)[i].label, static_cast<int>(i));
    std::vector<int> seq;
    for (auto& l : decompress_proof(db, label)) {
      auto it = index.find(l);
      if (it == index.end()) {
        Action a;
        if (const HypDecl* h = db.find_hyp(l)) {
          if (h->floating) {
            a = {ActionKind::Push, l, -1, h->expr[1], {}, 0, 0};
          } else {
            a = {ActionKind::Hyp, db.text(h->expr), -1, -1, h->expr, 0, 0};
          }
        } else {
          int f = db.frame_id(l);
          const Frame& fr = db.frames[static_cast<std::size_t>(f)];
          a = {fr.axiom ? ActionKind::Axiom : ActionKind::Theorem, l, f, -1, {}, static_cast<int>(fr.arity()), 0};
        }
        space->push_back(std::move(a));
        it = index.emplace(l, static_cast<int>(space->size() - 1)).first;
      }
      seq.push_back(it->second);
    }
    Path p;
    p.store = std::make_shared<ProofStore>(frames);
    p.space = space;
    State s;
    for (int a : seq) {
      TraceStep step;
      step.state = s;
      for (int b = 0; b < static_cast<int>(space->size()); ++b)
        if (applicable(*p.store, *space, s, b)) {
          step.actions.push_back(b);
          step.visits.push_back(b == a ? 1.0 : 0.0);
        }
      step.chosen = a;
      auto next = apply_action(*p.store, s, *space, a);
      if (!next) throw ProofError("proof of " + label + " does not replay");
      p.steps.push_back(std::move(step));
      s = std::move(*next);
    }
    if (!is_terminal(*p.store, s)) throw ProofError("proof of " + label + " does not end in one theorem");
    p.reward = 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------- model

struct MlpPolicy::Cache {
  const double* x = nullptr;
  std::vector<double> h1, h2;
  double logit = 0, value = 0;
};

MlpPolicy::MlpPolicy(FeatureEncoder enc, int hidden, std::uint64_t seed)
    : enc_(std::move(enc)), in_(enc_.size()), hidden_(hidden) {
  if (hidden <= 0) throw std::invalid_argument("hidden width must be positive");
  auto h = static_cast<std::size_t>(hidden);
  w1_ = 0;
  b1_ = w1_ + h * in_;
  w2_ = b1_ + h;
  b2_ = w2_ + h * h;
  wp_ = b2_ + h;
  bp_ = wp_ + h;
  wv_ = bp_ + 1;
  bv_ = wv_ + h;
  p_.assign(bv_ + 1, 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < n; ++i) p_[off + i] = u(rng);
  };
  fill(w1_, h * in_, std::sqrt(6.0 / static_cast<double>(in_ + h)));
  fill(w2_, h * h, std::sqrt(6.0 / static_cast<double>(2 * h)));
  fill(wp_, h, 0.01);
  fill(wv_, h, 0.01);
}

double MlpPolicy::row(const double* x, Cache& c) const {
  auto h = static_cast<std::size_t>(hidden_);
  c.x = x;
  c.h1.resize(h);
  c.h2.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    const double* w = p_.data() + w1_ + j * in_;
    double a = p_[b1_ + j];
#pragma omp simd reduction(+ : a)
    for (std::size_t i = 0; i < in_; ++i) a += w[i] * x[i];
    c.h1[j] = std::tanh(a);
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double* w = p_.data() + w2_ + j * h;
    double a = p_[b2_ + j];
    const double* h1 = c.h1.data();
#pragma omp simd reduction(+ : a)
    for (std::size_t i = 0; i < h; ++i) a += w[i] * h1[i];
    c.h2[j] = std::tanh(a);
  }
  double lp = p_[bp_], lv = p_[bv_];
#pragma omp simd reduction(+ : lp, lv)
  for (std::size_t j = 0; j < h; ++j) {
    lp += p_[wp_ + j] * c.h2[j];
    lv += p_[wv_ + j] * c.h2[j];
  }
  c.logit = lp;
  c.value = 1.0 / (1.0 + std::exp(-lv));
  return lp;
}

void MlpPolicy::backward(const Cache& c, double dlogit, double dvalue, std::vector<double>& g) const {
  auto h = static_cast<std::size_t>(hidden_);
  double dz = dvalue * c.value * (1 - c.value);
  std::vector<double> d2(h), d1(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    g[wp_ + j] += dlogit * c.h2[j];
    g[wv_ + j] += dz * c.h2[j];
    d2[j] = (dlogit * p_[wp_ + j] + dz * p_[wv_ + j]) * (1 - c.h2[j] * c.h2[j]);
  }
  g[bp_] += dlogit;
  g[bv_] += dz;
  for (std::size_t j = 0; j < h; ++j) {
    if (d2[j] == 0) continue;
    double* gw = g.data() + w2_ + j * h;
    const double* w = p_.data() + w2_ + j * h;
    const double* h1 = c.h1.data();
    double* dd = d1.data();
    double dj = d2[j];
#pragma omp simd
    for (std::size_t i = 0; i < h; ++i) {
      gw[i] += dj * h1[i];
      dd[i] += dj * w[i];
    }
    g[b2_ + j] += d2[j];
  }
  for (std::size_t j = 0; j < h; ++j) {
    double d = d1[j] * (1 - c.h1[j] * c.h1[j]);
    if (d == 0) continue;
    double* gw = g.data() + w1_ + j * in_;
    const double* x = c.x;
#pragma omp simd
    for (std::size_t i = 0; i < in_; ++i) gw[i] += d * x[i];
    g[b1_ + j] += d;
  }
}

void MlpPolicy::forward(const std::vector<std::vector<double>>& rows, std::vector<double>& logits,
                        std::vector<double>& values) const {
  logits.resize(rows.size());
  values.resize(rows.size());
  Cache c;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != in_) throw std::invalid_argument("feature row has the wrong width");
    logits[r] = row(rows[r].data(), c);
    values[r] = c.value;
  }
}

namespace {

void softmax(std::vector<double>& z) {
  if (z.empty()) return;
  double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (auto& v : z) s += (v = std::exp(v - m));
  for (auto& v : z) v /= s;
}

}  // namespace

Prediction MlpPolicy::predict(const ProofStore& store, const ActionSpace& space, const State& s,
                              const std::vector<int>& actions) const {
  Prediction p;
  if (actions.empty()) return p;
  std::vector<double> x(in_);
  enc_.encode_state(store, space, s, x.data());
  Cache c;
  for (int a : actions) {
    enc_.encode_action(store, space, s, a, x.data() + enc_.state_size());
    p.pi.push_back(row(x.data(), c));
    p.v.push_back(c.value);
  }
  softmax(p.pi);
  for (std::size_t i = 0; i < actions.size(); ++i) p.value += p.pi[i] * p.v[i];
  return p;
}

double MlpPolicy::policy_loss(const std::vector<TrainingSample>& batch, std::vector<double>* grad) const {
  double loss = 0;
  std::size_t n = 0;
  for (auto& t : batch)
    if (t.kind == TrainingSample::Policy) ++n;
  if (n == 0) return 0;
  std::vector<Cache> caches;
  for (auto& t : batch) {
    if (t.kind != TrainingSample::Policy) continue;
    caches.resize(t.features.size());
    std::vector<double> z(t.features.size());
    for (std::size_t r = 0; r < z.size(); ++r) z[r] = row(t.features[r].data(), caches[r]);
    softmax(z);
    for (std::size_t r = 0; r < z.size(); ++r)
      if (t.target[r] > 0) loss += t.target[r] * (std::log(t.target[r]) - std::log(std::max(z[r], 1e-300)));
    if (grad)
      for (std::size_t r = 0; r < z.size(); ++r)
        backward(caches[r], (z[r] - t.target[r]) / static_cast<double>(n), 0.0, *grad);
  }
  return loss / static_cast<double>(n);
}

double MlpPolicy::value_loss(const std::vector<TrainingSample>& batch, std::vector<double>* grad) const {
  double loss = 0;
  std::size_t n = 0;
  for (auto& t : batch)
    if (t.kind == TrainingSample::Value) ++n;
  if (n == 0) return 0;
  Cache c;
  for (auto& t : batch) {
    if (t.kind != TrainingSample::Value) continue;
    row(t.features[0].data(), c);
    double e = c.value - t.target[0];
    loss += e * e;
    if (grad) backward(c, 0.0, 2 * e / static_cast<double>(n), *grad);
  }
  return loss / static_cast<double>(n);
}

std::string MlpPolicy::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "atg-mlp";
  j["version"] = 1;
  j["input"] = in_;
  j["hidden"] = hidden_;
  j["layers"] = 2;
  j["max_steps"] = enc_.max_steps();
  j["params"] = p_;
  return j.dump();
}

void MlpPolicy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json() << '\n';
  if (!out) throw std::runtime_error("cannot write " + path);
}

MlpPolicy MlpPolicy::from_json(const std::string& text, const Database& db) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "atg-mlp" || j.value("version", 0) != 1)
    throw std::runtime_error("not a policy checkpoint");
  FeatureEncoder enc(db, j.value("max_steps", 32));
  if (j.at("input").get<std::size_t>() != enc.size())
    throw std::runtime_error("checkpoint input width does not match this database");
  MlpPolicy m(enc, j.at("hidden").get<int>());
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != m.p_.size()) throw std::runtime_error("checkpoint has the wrong parameter count");
  m.p_ = std::move(params);
  return m;
}

MlpPolicy MlpPolicy::load(const std::string& path, const Database& db) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), db);
}

// ---------------------------------------------------------------- training

std::string TrainCurve::to_csv() const {
  std::ostringstream out;
  out << "epoch,kl,mse\n0," << kl_initial << ',' << mse_initial << '\n';
  for (std::size_t i = 0; i < kl.size(); ++i) out << i + 1 << ',' << kl[i] << ',' << mse[i] << '\n';
  return out.str();
}

TrainCurve train(MlpPolicy& model, const std::vector<TrainingSample>& samples, const TrainerConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("no training samples");
  if (cfg.epochs <= 0 || cfg.batch <= 0 || !(cfg.lr > 0)) throw std::invalid_argument("invalid trainer settings");
  auto& p = model.params();
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0), g(p.size());
  TrainCurve curve;
  curve.kl_initial = model.policy_loss(samples);
  curve.mse_initial = model.value_loss(samples);
  std::vector<double> best = p;
  double best_kl = curve.kl_initial;
  int since = 0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      std::vector<TrainingSample> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch)); ++i)
        batch.push_back(samples[order[i]]);
      std::fill(g.begin(), g.end(), 0.0);
      double loss = model.policy_loss(batch, &g) + model.value_loss(batch, &g);
      if (!std::isfinite(loss)) throw std::runtime_error("training loss is not finite");
      ++step;
      double c1 = 1 - std::pow(cfg.beta1, static_cast<double>(step));
      double c2 = 1 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * g[k];
        v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * g[k] * g[k];
        p[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
      }
    }
    double kl = model.policy_loss(samples), mse = model.value_loss(samples);
    if (!std::isfinite(kl) || !std::isfinite(mse)) throw std::runtime_error("training loss is not finite");
    curve.kl.push_back(kl);
    curve.mse.push_back(mse);
    if (kl < best_kl) {
      best_kl = kl;
      best = p;
      curve.best_epoch = epoch;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
  }
  p = best;
  return curve;
}

GradCheck gradient_check(const MlpPolicy& model, const std::vector<TrainingSample>& samples, double h,
                         std::size_t max_params) {
  MlpPolicy probe = model;
  auto& p = probe.params();
  std::vector<double> gp(p.size(), 0.0), gv(p.size(), 0.0);
  probe.policy_loss(samples, &gp);
  probe.value_loss(samples, &gv);
  std::size_t stride = std::max<std::size_t>(1, p.size() / std::max<std::size_t>(1, max_params));
  GradCheck out;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
  for (std::size_t k = 0; k < p.size(); k += stride) {
    double keep = p[k];
    p[k] = keep + h;
    double pp = probe.policy_loss(samples), vp = probe.value_loss(samples);
    p[k] = keep - h;
    double pm = probe.policy_loss(samples), vm = probe.value_loss(samples);
    p[k] = keep;
    out.policy_error = std::max(out.policy_error, rel(gp[k], (pp - pm) / (2 * h)));
    out.value_error = std::max(out.value_error, rel(gv[k], (vp - vm) / (2 * h)));
  }
  return out;
}

// ---------------------------------------------------------------- external model

ExternalPolicy::ExternalPolicy(const std::string& command, const FeatureEncoder& enc) : enc_(enc) {
  std::signal(SIGPIPE, SIG_IGN);
  int in[2], out[2];
  if (pipe(in) != 0) throw std::runtime_error("pipe failed");
  if (pipe(out) != 0) {
    close(in[0]);
    close(in[1]);
    throw std::runtime_error("pipe failed");
  }
  pid_ = fork();
  if (pid_ < 0) throw std::runtime_error("fork failed");
  if (pid_ == 0) {
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    close(in[0]);
    close(in[1]);
    close(out[0]);
    close(out[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in[0]);
  close(out[1]);
  to_ = in[1];
  from_ = out[0];
}

ExternalPolicy::~ExternalPolicy() {
  if (to_ >= 0) close(to_);
  if (from_ >= 0) close(from_);
  if (pid_ > 0) waitpid(pid_, nullptr, 0);
}

Prediction ExternalPolicy::predict(const ProofStore& store, const ActionSpace& space, const State& s,
                                   const std::vector<int>& actions) const {
  nlohmann::ordered_json req;
  nlohmann::json stack = nlohmann::json::array(), history = nlohmann::json::array();
  for (auto n : s.stack) stack.push_back(store.db().text(store.statement(n)));
  for (int a : s.history) history.push_back(space[static_cast<std::size_t>(a)].label);
  req["state"] = {{"stack", stack}, {"history", history}};
  nlohmann::json feats = nlohmann::json::array(), acts = nlohmann::json::array();
  for (int a : actions) {
    feats.push_back(enc_.encode(store, space, s, a));
    const Action& act = space[static_cast<std::size_t>(a)];
    acts.push_back({{"kind", kind_name(act.kind)}, {"label", act.label}, {"arity", act.arity}});
  }
  req["features"] = std::move(feats);
  req["actions"] = std::move(acts);
  std::string line = req.dump() + "\n";

  std::lock_guard<std::mutex> lock(mu_);
  for (std::size_t off = 0; off < line.size();) {
    ssize_t w = write(to_, line.data() + off, line.size() - off);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw std::runtime_error("external model closed its input");
    off += static_cast<std::size_t>(w);
  }
  std::size_t nl;
  while ((nl = buffer_.find('\n')) == std::string::npos) {
    char buf[4096];
    ssize_t r = read(from_, buf, sizeof buf);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw std::runtime_error("external model exited without a response");
    buffer_.append(buf, static_cast<std::size_t>(r));
  }
  std::string resp = buffer_.substr(0, nl);
  buffer_.erase(0, nl + 1);

  Prediction p;
  try {
    auto j = nlohmann::json::parse(resp);
    p.pi = j.at("pi").get<std::vector<double>>();
    const auto& v = j.at("v");
    if (v.is_array())
      p.v = v.get<std::vector<double>>();
    else
      p.v.assign(actions.size(), v.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed external model response: ") + e.what());
  }
  if (p.pi.size() != actions.size() || p.v.size() != actions.size())
    throw std::runtime_error("external model response has the wrong length");
  double total = 0;
  for (double x : p.pi) {
    if (!(x >= 0) || !std::isfinite(x)) throw std::runtime_error("external model returned an invalid probability");
    total += x;
  }
  if (!actions.empty() && !(total > 0)) throw std::runtime_error("external model returned an all-zero policy");
  for (auto& x : p.pi) x /= total;
  for (double x : p.v)
    if (!(x >= 0 && x <= 1)) throw std::runtime_error("external model returned a value outside [0, 1]");
  for (std::size_t i = 0; i < actions.size(); ++i) p.value += p.pi[i] * p.v[i];
  return p;
}

// ---------------------------------------------------------------- self-play

SelfPlayResult self_play(MlpPolicy& model, TheoremLibrary& lib, const SplitManifest& train_split,
                         const GenerationConfig& cfg, const TrainerConfig& tcfg) {
  SelfPlayResult out;
  auto library = collect(model.encoder(), library_paths(lib, train_split.library), tcfg.gamma);
  out.run = run_episodes(Method::MctsPvn, lib, train_split, cfg, &model, [&](int ep, RunResult& r) {
    auto samples = collect(model.encoder(), r.traces, tcfg.gamma);
    samples.insert(samples.end(), library.begin(), library.end());
    TrainerConfig t = tcfg;
    t.seed = tcfg.seed + static_cast<std::uint64_t>(ep);
    out.curves.push_back(train(model, samples, t));
  });
  return out;
}

}  // namespace atg
