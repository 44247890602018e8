#ifndef LAMBDAEHR_LEXICON_H_
#define LAMBDAEHR_LEXICON_H_

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lambdaehr/dataset.h"
#include "lambdaehr/logical_form.h"
#include "lambdaehr/parser.h"
#include "lambdaehr/preprocess.h"
#include "lambdaehr/registry.h"

namespace lambdaehr {

// Which placeholder (if any) an entry consumes: operators take the form they
// wrap, `var` entries add a conjunct over x, the others consume the next
// placeholder of that kind.
enum class ArgTemplate { kForm, kVar, kConcept, kTemporalRef, kMeasurement };

std::string_view ArgTemplateName(ArgTemplate t);
ArgTemplate ParseArgTemplate(std::string_view s);

struct LexiconEntry {
  std::vector<std::string> phrase;  // PP tokens
  std::string predicate;
  ArgTemplate arg = ArgTemplate::kForm;

  bool operator==(const LexiconEntry &) const = default;
};

// Phrase -> predicate map. File format: phrase<TAB>predicate<TAB>arg_template,
// '#' comments, phrases in PP (stemmed) form.
class Lexicon {
 public:
  // The two placeholder entries every lexicon starts with:
  // concept -> has_concept, temporal_ref -> time_within.
  static Lexicon WithDefaults();
  static Lexicon Parse(std::string_view text, const PredicateRegistry &registry);
  static Lexicon LoadFile(const std::string &path, const PredicateRegistry &registry);

  // Ignores exact duplicates. Throws UnknownPredicate / DataError.
  void Add(LexiconEntry entry, const PredicateRegistry &registry);

  // Entries whose phrase is the longest one matching at `start`.
  std::vector<const LexiconEntry *> LongestMatch(const std::vector<std::string> &tokens,
                                                 std::size_t start) const;

  const std::vector<LexiconEntry> &entries() const { return entries_; }
  std::string ToText() const;

 private:
  std::vector<LexiconEntry> entries_;
  std::size_t max_phrase_ = 0;
};

struct FiredEntry {
  LexiconEntry entry;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct Candidate {
  LogicalForm lf;              // abstract: placeholder arguments, variable x
  std::vector<std::size_t> used;  // indices into CandidateSet::fired
  std::size_t depth = 0;       // operator nesting
};

struct CandidateSet {
  std::vector<FiredEntry> fired;
  std::vector<Candidate> candidates;
  std::size_t token_count = 0;
  std::array<std::size_t, 4> placeholders{};  // per EntityKind

  bool no_candidates() const { return candidates.empty(); }
};

CandidateSet GenerateCandidates(const AbstractedQuestion &q, const Lexicon &lexicon,
                                const PredicateRegistry &registry,
                                std::size_t depth_limit = 3);

// Fixed-order features for one candidate of a set.
class FeatureSpace {
 public:
  explicit FeatureSpace(const PredicateRegistry &registry);
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string> &names() const { return names_; }
  std::vector<double> Extract(const CandidateSet &set, const Candidate &c) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> names_;
};

double Score(const std::vector<double> &features, const std::vector<double> &weights);

// Argmax of the linear score; ties go to fewer predicates, then to the
// lexicographically smaller canonical text. Throws NoCandidates.
const Candidate &Select(const CandidateSet &set, const FeatureSpace &space,
                        const std::vector<double> &weights);

class NoCandidates : public DataError {
 public:
  using DataError::DataError;
};

struct RankerOptions {
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  double margin = 1.0;
  unsigned long long seed = 1;
  std::size_t depth_limit = 3;
};

struct RankerResult {
  std::vector<double> weights;
  double oracle_coverage = 0;  // fraction of questions whose candidates hold gold
  double train_accuracy = 0;
};

// Pairwise hinge loss by subgradient descent. Throws EmptyDataset.
RankerResult TrainRanker(const Dataset &data, const Lexicon &lexicon,
                         const PredicateRegistry &registry, const RankerOptions &options);

class LexiconParser : public Parser {
 public:
  LexiconParser(PredicateRegistry registry, Lexicon lexicon, std::vector<double> weights,
                std::size_t depth_limit);

  std::string mode() const override { return "lexicon"; }
  ParseResult Parse(const AbstractedQuestion &q) const override;
  void Save(const std::string &path) const override;
  const PredicateRegistry &registry() const override { return registry_; }

  static std::unique_ptr<LexiconParser> FromCheckpoint(const Checkpoint &ckpt);

  const Lexicon &lexicon() const { return lexicon_; }
  const std::vector<double> &weights() const { return weights_; }

 private:
  PredicateRegistry registry_;
  Lexicon lexicon_;
  std::vector<double> weights_;
  std::size_t depth_limit_;
  FeatureSpace space_;
};

}  // namespace lambdaehr

#endif  // LAMBDAEHR_LEXICON_H_
