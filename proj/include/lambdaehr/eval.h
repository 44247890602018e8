#ifndef LAMBDAEHR_EVAL_H_
#define LAMBDAEHR_EVAL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lambdaehr/dataset.h"
#include "lambdaehr/parser.h"

namespace lambdaehr {

class TooFewExamples : public DataError {
 public:
  using DataError::DataError;
};

class MismatchedDatasets : public DataError {
 public:
  using DataError::DataError;
};

// A training or evaluation failure inside one fold.
class FoldFailure : public Error {
 public:
  FoldFailure(std::size_t fold, const std::string &what, bool data_error)
      : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold), data_error_(data_error) {}
  std::size_t fold() const { return fold_; }
  bool data_error() const { return data_error_; }

 private:
  std::size_t fold_;
  bool data_error_;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;

  struct Run {
    std::size_t test;
    std::size_t dev;
    std::vector<std::size_t> train;  // fold indices
  };
  // Test fold i, dev fold (i + 1) mod k, the rest for training.
  Run run(std::size_t i) const;
  std::size_t size() const;
};

// Seeded shuffle of 0..n-1 dealt round-robin into k folds. Throws
// TooFewExamples unless n >= k >= 2.
FoldPlan SplitFolds(std::size_t n, std::size_t k, std::uint64_t seed);

// Trains a parser for one run. `run` is the fold or held-out index.
using ModelFactory = std::function<std::unique_ptr<Parser>(const Dataset &train, const Dataset &dev,
                                                           std::size_t run)>;

struct Prediction {
  std::string id;
  std::string question;
  std::string gold;
  std::string pred;  // empty when the parser produced nothing
  bool correct = false;
  std::size_t fold = 0;
  std::string variant;  // grouped outermost label of the gold form
  std::string error;
};

struct VariantRow {
  std::string label;
  std::size_t total = 0;
  std::size_t errors = 0;
  bool unseen = false;  // no example's outermost predicate occurred in training

  double error_rate() const { return total ? static_cast<double>(errors) / total : 0; }
};

struct EvalReport {
  std::string model;
  std::string dataset;
  std::string scheme;  // CV, LOOV or CD
  double accuracy = 0;        // pooled over every prediction
  double macro_accuracy = 0;  // mean of per-fold accuracies
  std::vector<double> fold_accuracies;
  std::size_t iterations = 0;
  std::size_t training_runs = 0;
  std::vector<VariantRow> variants;
  std::vector<Prediction> predictions;
  std::vector<std::string> notes;
  std::vector<std::string> vocabulary_gap;  // CD: target tokens unseen in training
};

// Parses one example and scores it against the gold form.
Prediction Evaluate(const Parser &parser, const Example &e);

// Variant rows sorted by label. `seen` lists training predicates; rows are
// flagged unseen only when it is non-null.
std::vector<VariantRow> VariantTable(const std::vector<Prediction> &predictions,
                                     const Dataset &data, const std::set<std::string> *seen);

EvalReport RunCv(const ModelFactory &factory, const Dataset &data, const FoldPlan &plan,
                 const std::string &model, const std::string &dataset, std::size_t jobs = 1);
EvalReport RunLoov(const ModelFactory &factory, const Dataset &data, const std::string &model,
                   const std::string &dataset, std::size_t jobs = 1);
// Throws EmptyDataset on an empty target.
EvalReport RunCrossDataset(const Parser &parser, const Dataset &target, const std::string &model,
                           const std::string &dataset);

// Questions counted by which models got them right, keyed by one flag per
// report. Throws MismatchedDatasets unless every report covers the same ids.
struct AgreementTable {
  std::vector<std::string> models;
  std::map<std::vector<bool>, std::size_t> cells;
};
AgreementTable Agreement(const std::vector<EvalReport> &reports);

nlohmann::json ReportToJson(const EvalReport &r);
EvalReport ReportFromJson(const nlohmann::json &j);
std::string PredictionsJsonl(const EvalReport &r);
std::string RenderReport(const EvalReport &r);
std::string RenderAgreement(const AgreementTable &t);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_EVAL_H_
