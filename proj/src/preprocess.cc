#include "lambdaehr/preprocess.h"

#include <algorithm>
#include <array>
#include <optional>

#include "lambdaehr/text.h"

namespace lambdaehr {

std::string_view EntityKindName(EntityKind kind) {
  switch (kind) {
    case EntityKind::kPerson: return "person";
    case EntityKind::kTemporalRef: return "temporal_ref";
    case EntityKind::kMeasurement: return "measurement";
    case EntityKind::kConcept: return "concept";
  }
  return "?";
}

EntityKind ParseEntityKind(std::string_view name) {
  if (name == "person") return EntityKind::kPerson;
  if (name == "temporal_ref") return EntityKind::kTemporalRef;
  if (name == "measurement") return EntityKind::kMeasurement;
  if (name == "concept") return EntityKind::kConcept;
  throw DataError("unknown entity kind: " + std::string(name));
}

std::string_view PlaceholderToken(EntityKind kind) {
  switch (kind) {
    case EntityKind::kPerson: return "patient";
    case EntityKind::kTemporalRef: return "temporal_ref";
    case EntityKind::kMeasurement: return "measur";
    case EntityKind::kConcept: return "concept";
  }
  return "?";
}

std::optional<EntityKind> PlaceholderKind(std::string_view token) {
  for (EntityKind k : {EntityKind::kPerson, EntityKind::kTemporalRef,
                       EntityKind::kMeasurement, EntityKind::kConcept}) {
    if (PlaceholderToken(k) == token) return k;
  }
  return std::nullopt;
}

namespace {

std::string Replacement(const EntitySpan &span) {
  switch (span.kind) {
    case EntityKind::kPerson:
      return "patient";
    case EntityKind::kConcept:
      return "concept(" + span.value + ")";
    case EntityKind::kMeasurement:
      return "measurement('" + span.value + "')";
    case EntityKind::kTemporalRef:
      return "temporal_ref('" + span.value + "')";
  }
  return {};
}

}  // namespace

Substitution AbstractEntities(std::string_view question,
                              std::vector<EntitySpan> spans) {
  const std::size_t length = Utf8Length(question);
  std::stable_sort(spans.begin(), spans.end(),
                   [](const EntitySpan &a, const EntitySpan &b) {
                     return a.start < b.start;
                   });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const EntitySpan &s = spans[i];
    if (s.start >= s.end || s.end > length) {
      throw SpanOutOfRange("entity span [" + std::to_string(s.start) + ", " +
                           std::to_string(s.end) + ") outside question of " +
                           std::to_string(length) + " characters");
    }
    if (i > 0 && spans[i - 1].end > s.start) {
      throw OverlappingSpans("entity spans [" +
                             std::to_string(spans[i - 1].start) + ", " +
                             std::to_string(spans[i - 1].end) + ") and [" +
                             std::to_string(s.start) + ", " +
                             std::to_string(s.end) + ") overlap");
    }
  }

  // Work on code points so offsets line up with the annotation.
  std::vector<char32_t> cps;
  cps.reserve(length);
  for (std::size_t pos = 0; pos < question.size();) {
    cps.push_back(DecodeUtf8(question, &pos));
  }

  Substitution out;
  std::size_t next = 0;
  for (const EntitySpan &s : spans) {
    for (std::size_t i = next; i < s.start; ++i) AppendUtf8(cps[i], &out.text);
    if (s.start > 0 && !IsSpace(cps[s.start - 1])) out.text.push_back(' ');
    out.text.append(Replacement(s));
    if (s.end < cps.size() && !IsSpace(cps[s.end])) out.text.push_back(' ');
    next = s.end;
  }
  for (std::size_t i = next; i < cps.size(); ++i) AppendUtf8(cps[i], &out.text);
  out.entities = std::move(spans);
  return out;
}

namespace {

// Collapses `kind(...)` payloads to the bare kind token. Input is lowercase.
std::string DropPayloads(std::string_view text) {
  static constexpr std::array<std::string_view, 3> kKinds = {
      "concept(", "measurement(", "temporal_ref("};
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    bool at_boundary = i == 0 || !IsIdentChar(text[i - 1]);
    std::string_view matched;
    if (at_boundary) {
      for (std::string_view k : kKinds) {
        if (text.substr(i, k.size()) == k) {
          matched = k;
          break;
        }
      }
    }
    if (matched.empty()) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i + matched.size();
    if (j < text.size() && text[j] == '\'') {
      std::size_t close = text.find('\'', j + 1);
      j = close == std::string_view::npos ? text.size() : close + 1;
    }
    std::size_t paren = text.find(')', j);
    if (paren == std::string_view::npos) {
      // Not a payload after all; keep the text.
      out.push_back(text[i++]);
      continue;
    }
    out.push_back(' ');
    out.append(matched.substr(0, matched.size() - 1));
    out.push_back(' ');
    i = paren + 1;
  }
  return out;
}

std::string StripPunctuation(std::string_view token) {
  std::string out;
  for (std::size_t pos = 0; pos < token.size();) {
    std::size_t start = pos;
    char32_t cp = DecodeUtf8(token, &pos);
    if (!IsPunctuation(cp)) out.append(token.substr(start, pos - start));
  }
  return out;
}

// Stems to a fixpoint so that normalizing normalized text is a no-op.
std::string StemToFixpoint(std::string word) {
  for (;;) {
    std::string next = PorterStem(word);
    if (next == word) return word;
    word = std::move(next);
  }
}

}  // namespace

std::vector<std::string> Normalize(std::string_view substituted) {
  std::string lowered = DropPayloads(ToLowerAscii(substituted));
  std::vector<std::string> tokens;
  for (const std::string &raw : SplitWhitespace(lowered)) {
    std::string token = StripPunctuation(raw);
    if (token.empty()) continue;
    tokens.push_back(StemToFixpoint(std::move(token)));
  }
  return tokens;
}

AbstractedQuestion Preprocess(std::string_view question,
                              std::vector<EntitySpan> spans) {
  Substitution sub = AbstractEntities(question, std::move(spans));
  AbstractedQuestion q;
  q.original = std::string(question);
  q.tokens = Normalize(sub.text);
  q.substituted = std::move(sub.text);
  q.entities = std::move(sub.entities);
  return q;
}

LogicalForm PlaceholderArgument(EntityKind kind) {
  switch (kind) {
    case EntityKind::kConcept:
      return LogicalForm::ConceptRef("concept");
    case EntityKind::kMeasurement:
      return LogicalForm::Literal("measurement");
    case EntityKind::kTemporalRef:
      return LogicalForm::Literal("temporal_ref");
    case EntityKind::kPerson:
      break;
  }
  throw DataError("person entities have no logical-form argument");
}

namespace {

// Per-kind cursor over a question's entities.
class EntityCursor {
 public:
  explicit EntityCursor(const std::vector<EntitySpan> &entities)
      : entities_(entities) {}

  const EntitySpan *Peek(EntityKind kind) const {
    std::size_t skip = used_[Index(kind)];
    for (const EntitySpan &e : entities_) {
      if (e.kind != kind) continue;
      if (skip == 0) return &e;
      --skip;
    }
    return nullptr;
  }
  void Advance(EntityKind kind) { ++used_[Index(kind)]; }

 private:
  static std::size_t Index(EntityKind k) { return static_cast<std::size_t>(k); }
  const std::vector<EntitySpan> &entities_;
  std::array<std::size_t, 4> used_{};
};

template <typename LeafFn>
LogicalForm MapArguments(const LogicalForm &lf, LeafFn &&leaf) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      return LogicalForm::Lambda(lf.text(), MapArguments(lf.body(), leaf));
    case NodeKind::kAnd: {
      std::vector<LogicalForm> kids;
      for (const auto &c : lf.children()) kids.push_back(MapArguments(c, leaf));
      return LogicalForm::And(std::move(kids));
    }
    case NodeKind::kApply: {
      std::vector<LogicalForm> kids;
      for (const auto &c : lf.children()) kids.push_back(MapArguments(c, leaf));
      return LogicalForm::Apply(lf.text(), std::move(kids));
    }
    default:
      return leaf(lf);
  }
}

}  // namespace

LogicalForm AbstractLfEntities(const LogicalForm &lf,
                               const std::vector<EntitySpan> &entities) {
  EntityCursor cursor(entities);
  return MapArguments(lf, [&](const LogicalForm &leaf) {
    if (leaf.Is(NodeKind::kConceptRef)) {
      const EntitySpan *e = cursor.Peek(EntityKind::kConcept);
      if (e != nullptr && e->value == leaf.text()) {
        cursor.Advance(EntityKind::kConcept);
        return PlaceholderArgument(EntityKind::kConcept);
      }
    } else if (leaf.Is(NodeKind::kLiteral)) {
      for (EntityKind k : {EntityKind::kMeasurement, EntityKind::kTemporalRef}) {
        const EntitySpan *e = cursor.Peek(k);
        if (e != nullptr && e->value == leaf.text()) {
          cursor.Advance(k);
          return PlaceholderArgument(k);
        }
      }
    }
    return leaf;
  });
}

LogicalForm AttachLfEntities(const LogicalForm &lf,
                             const std::vector<EntitySpan> &entities) {
  EntityCursor cursor(entities);
  return MapArguments(lf, [&](const LogicalForm &leaf) {
    std::optional<EntityKind> kind;
    if (leaf.Is(NodeKind::kConceptRef) && leaf.text() == "concept") {
      kind = EntityKind::kConcept;
    } else if (leaf.Is(NodeKind::kLiteral) && leaf.text() == "measurement") {
      kind = EntityKind::kMeasurement;
    } else if (leaf.Is(NodeKind::kLiteral) && leaf.text() == "temporal_ref") {
      kind = EntityKind::kTemporalRef;
    }
    if (!kind) return leaf;
    const EntitySpan *e = cursor.Peek(*kind);
    if (e == nullptr) return leaf;
    cursor.Advance(*kind);
    return *kind == EntityKind::kConcept ? LogicalForm::ConceptRef(e->value)
                                         : LogicalForm::Literal(e->value);
  });
}

}  // namespace lambdaehr
