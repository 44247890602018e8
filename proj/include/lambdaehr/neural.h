#ifndef LAMBDAEHR_NEURAL_H_
#define LAMBDAEHR_NEURAL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lambdaehr/autodiff.h"
#include "lambdaehr/dataset.h"
#include "lambdaehr/forge.h"
#include "lambdaehr/grammar.h"
#include "lambdaehr/parser.h"

namespace lambdaehr {

class EmptyInput : public DataError {
 public:
  EmptyInput() : DataError("empty input token sequence") {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t step)
      : Error("non-finite loss at training step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class MalformedLine : public DataError {
 public:
  explicit MalformedLine(std::size_t line)
      : DataError("malformed embedding line " + std::to_string(line)), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public DataError {
 public:
  DimensionMismatch(std::size_t line, std::size_t got, std::size_t want)
      : DataError("embedding line " + std::to_string(line) + " has " + std::to_string(got) +
                  " values, expected " + std::to_string(want)),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class DecodeMode { kDirect, kSketch, kGrammar };
std::string_view DecodeModeName(DecodeMode m);
DecodeMode ParseDecodeMode(std::string_view name);

struct TrainingConfig {
  DecodeMode mode = DecodeMode::kGrammar;
  std::size_t hidden = 256;
  std::size_t embed = 128;
  double learning_rate = 0.0025;
  double lr_decay = 0.985;
  double dropout = 0.5;
  std::size_t max_epochs = 100;
  // Dev is evaluated every `validate_every` epochs; training stops after
  // `patience` evaluations without improvement (0 disables) or at a perfect
  // dev score.
  std::size_t patience = 5;
  std::size_t validate_every = 1;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  std::size_t beam = 5;
  bool copy = true;
  std::string embeddings;  // optional word-vector file

  // Reference settings for each family.
  static TrainingConfig Defaults(DecodeMode mode);
  // Throws DataError on a broken invariant.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep the values of Defaults(mode).
  static TrainingConfig FromJson(const nlohmann::json &j);
};

class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  Vocabulary();  // holds "<unk>" only
  explicit Vocabulary(const std::vector<std::string> &tokens);

  int Add(const std::string &token);
  int Index(const std::string &token) const;  // kUnk when absent
  bool Contains(const std::string &token) const { return index_.count(token) > 0; }
  const std::string &Token(int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string> &tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

struct EmbeddingTable {
  Matrix vectors;  // dim x vocab size
  double coverage = 0;
};

// Plain-text word vectors, one "token v1 ... vd" per line. Tokens absent
// from the file get seeded uniform(-0.1, 0.1) vectors. A missing file is an
// error unless `allow_missing`, which yields a fully random table.
EmbeddingTable LoadEmbeddings(const std::string &path, const Vocabulary &vocab, std::size_t dim,
                              std::uint64_t seed, bool allow_missing = false);

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean per example
  std::vector<std::pair<std::size_t, double>> dev_evals;  // (epoch, exact match)
  std::size_t best_epoch = 0;
  double best_dev = -1;
  bool early_stopped = false;
};

struct GradientCheckResult {
  double max_relative_error = 0;
  std::size_t checked = 0;
};

class NeuralParser : public Parser {
 public:
  // `pairs` are extra source/target sequences (direct mode only).
  static std::unique_ptr<NeuralParser> Train(const Dataset &train, const Dataset &dev,
                                             const TrainingConfig &cfg,
                                             const PredicateRegistry &registry,
                                             const std::vector<SequencePair> &pairs = {},
                                             TrainingLog *log = nullptr);
  // An untrained model with vocabularies drawn from `data`.
  static std::unique_ptr<NeuralParser> Initialize(const Dataset &data, const TrainingConfig &cfg,
                                                  const PredicateRegistry &registry,
                                                  const std::vector<SequencePair> &pairs = {});
  static std::unique_ptr<NeuralParser> FromCheckpoint(const Checkpoint &ckpt);

  std::string mode() const override;
  ParseResult Parse(const AbstractedQuestion &q) const override;
  ParseResult ParseWithBeam(const AbstractedQuestion &q, std::size_t beam) const;
  void Save(const std::string &path) const override;
  Checkpoint ToCheckpoint() const;
  const PredicateRegistry &registry() const override { return system_.registry(); }

  const TrainingConfig &config() const { return cfg_; }
  ParameterSet &parameters() { return params_; }
  double best_dev() const { return best_dev_; }

  // Context states, hidden x tokens.
  Matrix Encode(const std::vector<std::string> &tokens) const;
  // Negative log-likelihood of the example's abstract gold, no dropout.
  double Loss(const Example &e) const;
  // Analytic gradient of Loss against central differences (step 1e-5).
  // `corrupt` perturbs the analytic gradient, as a control.
  GradientCheckResult GradientCheck(const Example &e, std::size_t samples, std::uint64_t seed,
                                    bool corrupt = false);

  // Per-step distributions seen while greedily decoding `q`, for checks on
  // normalization and masking. Grammar mode also reports the valid indices.
  struct StepTrace {
    Eigen::VectorXd probs;
    std::vector<int> valid;
    Eigen::VectorXd attention;
  };
  std::vector<StepTrace> TraceGreedy(const AbstractedQuestion &q) const;
  const Vocabulary &target_vocabulary() const { return tgt_vocab_; }

  struct Item;  // one training sequence in model terms

 private:
  NeuralParser(TrainingConfig cfg, PredicateRegistry registry);
  void BuildVocabularies(const Dataset &data, const std::vector<SequencePair> &pairs);
  void InitParameters();
  Item MakeItem(const Example &e) const;
  Item MakePairItem(const SequencePair &p) const;
  Graph::Id ItemLoss(Graph *g, const Item &item) const;

  struct Encoded;
  struct DecState;
  Encoded EncodeGraph(Graph *g, const std::vector<std::string> &tokens) const;
  DecState DecoderStep(Graph *g, const Encoded &enc, const DecState &prev, Graph::Id input) const;
  DecState InitialState(Graph *g, const Encoded &enc) const;
  Graph::Id BiLstm(Graph *g, const std::vector<Graph::Id> &inputs, const std::string &prefix,
                   std::vector<Graph::Id> *states) const;

  ParseResult DecodeDirect(const AbstractedQuestion &q, std::size_t beam) const;
  ParseResult DecodeSketch(const AbstractedQuestion &q, std::size_t beam) const;
  ParseResult DecodeGrammar(const AbstractedQuestion &q, std::size_t beam) const;
  std::vector<int> ValidIndices(const Derivation &d) const;

  struct Weights {
    Parameter *src_emb = nullptr, *tgt_emb = nullptr, *field_emb = nullptr;
    Parameter *init_w = nullptr, *init_b = nullptr;
    Parameter *dec_w = nullptr, *dec_b = nullptr, *att_w = nullptr;
    Parameter *comb_w = nullptr, *comb_b = nullptr, *out_w = nullptr, *out_b = nullptr;
    Parameter *gen_w = nullptr, *gen_b = nullptr;
    Parameter *fatt_w = nullptr, *fcomb_w = nullptr, *fcomb_b = nullptr;
    Parameter *fout_w = nullptr, *fout_b = nullptr;
  };

  TrainingConfig cfg_;
  TransitionSystem system_;
  Weights w_;
  ParameterSet params_;
  Vocabulary src_vocab_;
  Vocabulary tgt_vocab_;    // tokens, actions or sketch tokens
  Vocabulary field_vocab_;  // grammar mode
  Vocabulary fine_vocab_;   // sketch mode
  std::size_t max_target_ = 0;
  double best_dev_ = -1;
};

}  // namespace lambdaehr

#endif  // LAMBDAEHR_NEURAL_H_
