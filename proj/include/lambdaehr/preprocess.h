#ifndef LAMBDAEHR_PREPROCESS_H_
#define LAMBDAEHR_PREPROCESS_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lambdaehr/errors.h"
#include "lambdaehr/logical_form.h"

namespace lambdaehr {

enum class EntityKind { kPerson, kTemporalRef, kMeasurement, kConcept };

// "person", "temporal_ref", "measurement", "concept".
std::string_view EntityKindName(EntityKind kind);
EntityKind ParseEntityKind(std::string_view name);

// The token an entity of this kind leaves behind after preprocessing:
// "patient", "temporal_ref", "measur" (the stem of "measurement"), "concept".
std::string_view PlaceholderToken(EntityKind kind);
std::optional<EntityKind> PlaceholderKind(std::string_view token);

// A pre-annotated entity. Offsets count Unicode code points; end is
// exclusive. `value` is the CUI for concepts and the verbatim surface text
// otherwise.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityKind kind = EntityKind::kConcept;
  std::string value;

  bool operator==(const EntitySpan &) const = default;
};

class OverlappingSpans : public DataError {
 public:
  using DataError::DataError;
};

class SpanOutOfRange : public DataError {
 public:
  using DataError::DataError;
};

struct Substitution {
  std::string text;                   // ES form
  std::vector<EntitySpan> entities;   // sorted by start offset
};

// Replaces every span by its identifier: persons by `patient`, concepts by
// `concept(<cui>)`, measurements and temporal references by
// `measurement('<v>')` / `temporal_ref('<v>')`. Replacements are kept
// whitespace-delimited, so "38C?" becomes "measurement('38C') ?".
Substitution AbstractEntities(std::string_view question,
                              std::vector<EntitySpan> spans);

// Classic Porter (1980) stemmer, steps 1a through 5b. Words of one or two
// letters are returned unchanged, as in the reference implementation.
std::string PorterStem(std::string_view word);

// ES text -> PP tokens: lowercase, drop entity payloads, split on whitespace,
// strip punctuation, stem. Stemming runs to a fixpoint so normalizing
// normalized text changes nothing; the placeholder tokens are all fixpoints.
std::vector<std::string> Normalize(std::string_view substituted);

struct AbstractedQuestion {
  std::string original;
  std::string substituted;
  std::vector<std::string> tokens;
  std::vector<EntitySpan> entities;
};

AbstractedQuestion Preprocess(std::string_view question,
                              std::vector<EntitySpan> spans);

// Logical-form side of entity abstraction. Walking arguments left to right,
// a concept identifier or literal equal to the next unused entity of the
// matching kind is replaced by that kind's placeholder argument
// (`concept`, 'measurement', 'temporal_ref'). Anything else is kept verbatim.
LogicalForm AbstractLfEntities(const LogicalForm &lf,
                               const std::vector<EntitySpan> &entities);

// Inverse of AbstractLfEntities: placeholder arguments take the values of
// the question's entities of that kind, in order. Placeholders without a
// matching entity are left as they are.
LogicalForm AttachLfEntities(const LogicalForm &lf,
                             const std::vector<EntitySpan> &entities);

// The argument form a placeholder token takes inside a logical form:
// ConceptRef("concept"), Literal("measurement"), Literal("temporal_ref").
LogicalForm PlaceholderArgument(EntityKind kind);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_PREPROCESS_H_
