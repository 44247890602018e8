#ifndef LAMBDAEHR_FORGE_H_
#define LAMBDAEHR_FORGE_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lambdaehr/dataset.h"
#include "lambdaehr/lexicon.h"
#include "lambdaehr/registry.h"

namespace lambdaehr {

class SpecExhausted : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientMaterial : public DataError {
 public:
  using DataError::DataError;
};

// A piece of a question template: literal text, an alternation group
// "(a|b|)" optionally tagged "=predicate" as a lexical cue, or an entity
// slot such as "{concept}".
struct TemplatePart {
  enum class Kind { kText, kGroup, kSlot };
  Kind kind = Kind::kText;
  std::string text;
  std::vector<std::string> alternatives;
  std::string predicate;  // cue groups only
  EntityKind slot = EntityKind::kConcept;
};

struct QuestionTemplate {
  std::vector<TemplatePart> question;
  std::string lf;  // with the same slots, e.g. count(λx.has_concept(x, {concept}))
  double weight = 1.0;
  std::string source;  // the question pattern as written
};

struct ConceptValue {
  std::string text;
  std::string cui;
};

// JSON corpus description:
//   {"name", "seed", "count", "predicates": [...],
//    "pools": {"concept": [{"text", "cui"}], "person": [...],
//              "temporal_ref": [...], "measurement": [...]},
//    "templates": [{"question", "lf", "weight"}]}
struct CorpusSpec {
  std::string name;
  std::uint64_t seed = 1;
  std::size_t count = 0;
  std::vector<std::string> predicates;
  std::vector<ConceptValue> concepts;
  std::vector<std::string> persons;
  std::vector<std::string> temporal_refs;
  std::vector<std::string> measurements;
  std::vector<QuestionTemplate> templates;

  // Distinct questions the templates can produce (an upper bound).
  double Capacity() const;
};

std::vector<TemplatePart> ParseQuestionTemplate(std::string_view pattern);

// Validates every template against the registry and the inventory.
CorpusSpec ParseCorpusSpec(std::string_view json_text, const PredicateRegistry &registry);
CorpusSpec LoadCorpusSpec(const std::string &path, const PredicateRegistry &registry);

// Deterministic per seed; no duplicate (question, LF) pairs. Throws
// SpecExhausted when the templates cannot yield `count` distinct examples.
Dataset GenerateCorpus(const CorpusSpec &spec, const PredicateRegistry &registry);

struct CorpusStats {
  std::size_t queries = 0;
  std::size_t unique_tokens = 0;
  std::size_t unique_predicates = 0;
  double mean_tokens = 0;
  double mean_predicates = 0;
};

// Over PP tokens and predicate occurrences of the stripped gold forms.
CorpusStats AuditStats(const Dataset &data);
std::string StatsToJson(const CorpusStats &s);

// Lexicon read off the cue groups, on top of Lexicon::WithDefaults().
Lexicon DeriveLexicon(const CorpusSpec &spec, const PredicateRegistry &registry);

// Surface phrases that cue the same predicate.
struct PhraseGroup {
  std::string predicate;
  std::vector<std::string> phrases;
};
using PhraseTable = std::vector<PhraseGroup>;

PhraseTable DerivePhraseTable(const CorpusSpec &spec);
// One group per line: predicate<TAB>phrase|phrase|...
std::string PhraseTableToText(const PhraseTable &table);
PhraseTable ParsePhraseTable(std::string_view text);

enum class Strategy { kEntity, kPhrase, kConcat };
std::string_view StrategyName(Strategy s);
Strategy ParseStrategy(std::string_view s);

inline constexpr std::string_view kSeparatorToken = "<sep>";

// A concatenated training pair for the direct decoder.
struct SequencePair {
  std::string id;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

struct Augmentation {
  Dataset examples;                 // entity and phrase strategies
  std::vector<SequencePair> pairs;  // concat strategy
};

// Exactly `count` new items, distinct from each other and from the input.
// Throws InsufficientMaterial.
Augmentation Recombine(const Dataset &data, Strategy strategy, std::size_t count,
                       std::uint64_t seed, const PredicateRegistry &registry,
                       const PhraseTable &phrases = {});

std::string WriteAugmentation(const Augmentation &a);
std::vector<SequencePair> ReadSequencePairs(std::string_view jsonl);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_FORGE_H_
