// Learned policy/value model: hand-crafted state/action features, a
// two-layer perceptron with softmax policy and sigmoid value heads,
// self-play sample collection, Adam training, checkpoints and an external
// subprocess model.
#pragma once

#include <atg/generation.hpp>

#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace atg {

// Fixed-length encoding of (state, action) pairs for one database.
class FeatureEncoder {
 public:
  FeatureEncoder(const Database& db, int max_steps);
  std::size_t size() const { return state_size_ + action_size_; }
  std::size_t state_size() const { return state_size_; }
  int max_steps() const { return max_steps_; }
  // Action -1 encodes the state alone.
  std::vector<double> encode(const ProofStore& store, const ActionSpace& space, const State& s, int action) const;
  void encode_state(const ProofStore& store, const ActionSpace& space, const State& s, double* out) const;
  void encode_action(const ProofStore& store, const ActionSpace& space, const State& s, int action,
                     double* out) const;

  static constexpr int kBuckets = 16;

 private:
  const Database* db_;
  int max_steps_;
  std::vector<Sym> constants_;
  std::size_t item_size_ = 0, state_size_ = 0, action_size_ = 0;
  void encode_item(const ProofStore& store, std::uint32_t node, double* out) const;
};

// Whether an assertion action applies to the stack, without touching the
// store.
bool applicable(const ProofStore& store, const ActionSpace& space, const State& s, int action);

struct TrainingSample {
  enum Kind { Policy, Value } kind = Policy;
  std::vector<std::vector<double>> features;  // Policy: one row per action; Value: one row
  std::vector<double> target;                 // Policy: distribution; Value: single value
};

// A traveled path: each step's state, candidate moves with their target
// probabilities and the move taken.
using Path = SearchTrace;

// Policy samples from every step and value targets gamma^d * reward for the
// state d moves before the end, root to leaf. A state's value is learned on
// the move that reaches it; the root is a sample without a move.
std::vector<TrainingSample> collect(const FeatureEncoder& enc, const std::vector<Path>& paths, double gamma);

// Replays database proofs as successful searches: each step's target is
// the action the proof takes among the applicable pushes, grammar, axioms,
// the proof's hypotheses and the theorems it cites.
std::vector<Path> library_paths(const TheoremLibrary& lib, const std::vector<std::string>& labels);

struct TrainerConfig {
  int epochs = 10;
  int batch = 128;
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double gamma = 0.95;
  int patience = 2;  // epochs without a new minimum KL before stopping
  std::uint64_t seed = 0;
};

struct TrainCurve {
  std::vector<double> kl, mse;  // per epoch, over the whole sample set
  double kl_initial = 0, mse_initial = 0;
  int best_epoch = 0;  // parameters kept; 0 means the initial ones
  std::string to_csv() const;
};

class MlpPolicy : public PolicyValue {
 public:
  MlpPolicy(FeatureEncoder enc, int hidden = 128, std::uint64_t seed = 0);

  Prediction predict(const ProofStore& store, const ActionSpace& space, const State& s,
                     const std::vector<int>& actions) const override;
  // Raw outputs for encoded rows: logits and values.
  void forward(const std::vector<std::vector<double>>& rows, std::vector<double>& logits,
               std::vector<double>& values) const;

  const FeatureEncoder& encoder() const { return enc_; }
  std::size_t input_size() const { return in_; }
  int hidden() const { return hidden_; }
  std::vector<double>& params() { return p_; }
  const std::vector<double>& params() const { return p_; }

  // Mean KL(target || pi) over policy samples and mean squared value error
  // over value samples.
  double policy_loss(const std::vector<TrainingSample>& batch, std::vector<double>* grad = nullptr) const;
  double value_loss(const std::vector<TrainingSample>& batch, std::vector<double>* grad = nullptr) const;

  std::string to_json() const;
  void save(const std::string& path) const;
  static MlpPolicy from_json(const std::string& text, const Database& db);
  static MlpPolicy load(const std::string& path, const Database& db);

 private:
  struct Cache;
  double row(const double* x, Cache& c) const;
  void backward(const Cache& c, double dlogit, double dvalue, std::vector<double>& g) const;

  FeatureEncoder enc_;
  std::size_t in_;
  int hidden_;
  std::vector<double> p_;
  // Offsets into p_.
  std::size_t w1_, b1_, w2_, b2_, wp_, bp_, wv_, bv_;
};

// Adam on the sum of both losses; keeps the parameters of the epoch with the
// lowest policy KL and stops after `patience` epochs without improvement.
// Throws std::invalid_argument on an empty sample set and std::runtime_error
// on a non-finite loss.
TrainCurve train(MlpPolicy& model, const std::vector<TrainingSample>& samples, const TrainerConfig& cfg);

struct GradCheck {
  double policy_error = 0, value_error = 0;  // max relative error
};
// Central finite differences against the analytic gradient.
GradCheck gradient_check(const MlpPolicy& model, const std::vector<TrainingSample>& samples, double h = 1e-5,
                         std::size_t max_params = 400);

// Policy served by a subprocess speaking line-delimited JSON: request
// {"state":{"stack":[...],"history":[...]},"features":[[...]],"actions":[{"kind","label","arity"}]},
// response {"pi":[...],"v":number or [...]}.
class ExternalPolicy : public PolicyValue {
 public:
  ExternalPolicy(const std::string& command, const FeatureEncoder& enc);
  ~ExternalPolicy() override;
  ExternalPolicy(const ExternalPolicy&) = delete;
  ExternalPolicy& operator=(const ExternalPolicy&) = delete;
  Prediction predict(const ProofStore& store, const ActionSpace& space, const State& s,
                     const std::vector<int>& actions) const override;

 private:
  FeatureEncoder enc_;
  int pid_ = -1;
  int to_ = -1, from_ = -1;
  mutable std::string buffer_;
  mutable std::mutex mu_;
};

struct SelfPlayResult {
  RunResult run;
  std::vector<TrainCurve> curves;  // one per training round
};

// MCTS with the model as policy/value; after every episode the model is
// trained on that episode's searches plus the library replays.
SelfPlayResult self_play(MlpPolicy& model, TheoremLibrary& lib, const SplitManifest& train,
                         const GenerationConfig& cfg, const TrainerConfig& tcfg);

}  // namespace atg
