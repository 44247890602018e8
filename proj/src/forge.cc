#include "lambdaehr/forge.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "lambdaehr/text.h"

namespace lambdaehr {

using nlohmann::json;

std::vector<TemplatePart> ParseQuestionTemplate(std::string_view pattern) {
  std::vector<TemplatePart> parts;
  std::string text;
  auto flush = [&] {
    if (!text.empty()) {
      TemplatePart p;
      p.text = std::move(text);
      parts.push_back(std::move(p));
      text.clear();
    }
  };
  std::size_t i = 0;
  while (i < pattern.size()) {
    char c = pattern[i];
    if (c == '(') {
      std::size_t close = pattern.find(')', i);
      if (close == std::string_view::npos) throw SyntaxError(i, "')' closing the group");
      flush();
      TemplatePart p;
      p.kind = TemplatePart::Kind::kGroup;
      for (const std::string &alt : Split(pattern.substr(i + 1, close - i - 1), '|')) {
        p.alternatives.emplace_back(Trim(alt));
      }
      i = close + 1;
      if (i < pattern.size() && pattern[i] == '=') {
        std::size_t start = ++i;
        while (i < pattern.size() && IsIdentChar(pattern[i])) ++i;
        p.predicate = std::string(pattern.substr(start, i - start));
        if (!IsIdentifier(p.predicate)) throw SyntaxError(start, "predicate after '='");
        for (const std::string &alt : p.alternatives) {
          if (alt.empty()) throw SyntaxError(start, "non-empty cue phrases");
        }
      }
      parts.push_back(std::move(p));
    } else if (c == '{') {
      std::size_t close = pattern.find('}', i);
      if (close == std::string_view::npos) throw SyntaxError(i, "'}' closing the slot");
      flush();
      TemplatePart p;
      p.kind = TemplatePart::Kind::kSlot;
      p.slot = ParseEntityKind(pattern.substr(i + 1, close - i - 1));
      parts.push_back(std::move(p));
      i = close + 1;
    } else {
      text.push_back(c);
      ++i;
    }
  }
  flush();
  return parts;
}

namespace {

std::size_t PoolSize(const CorpusSpec &spec, EntityKind kind) {
  switch (kind) {
    case EntityKind::kConcept: return spec.concepts.size();
    case EntityKind::kPerson: return spec.persons.size();
    case EntityKind::kTemporalRef: return spec.temporal_refs.size();
    case EntityKind::kMeasurement: return spec.measurements.size();
  }
  return 0;
}

std::string SlotName(EntityKind kind) { return "{" + std::string(EntityKindName(kind)) + "}"; }

// Replaces the i-th "{kind}" of the LF template by values[kind][i].
std::string InstantiateLf(const std::string &pattern,
                          const std::map<EntityKind, std::vector<std::string>> &values) {
  std::map<EntityKind, std::size_t> next;
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] != '{') {
      out.push_back(pattern[i++]);
      continue;
    }
    std::size_t close = pattern.find('}', i);
    if (close == std::string::npos) throw SyntaxError(i, "'}' in LF template");
    EntityKind kind = ParseEntityKind(std::string_view(pattern).substr(i + 1, close - i - 1));
    auto it = values.find(kind);
    std::size_t k = next[kind]++;
    if (it == values.end() || k >= it->second.size()) {
      throw DataError("LF template uses more " + SlotName(kind) +
                      " slots than its question: " + pattern);
    }
    const std::string &v = it->second[k];
    out += kind == EntityKind::kConcept ? v : "'" + v + "'";
    i = close + 1;
  }
  for (const auto &[kind, vals] : values) {
    if (kind != EntityKind::kPerson && next[kind] != vals.size()) {
      throw DataError("LF template leaves " + SlotName(kind) + " slots unused: " + pattern);
    }
  }
  return out;
}

// Appends with runs of spaces collapsed.
void AppendCollapsed(std::string_view text, std::string *out) {
  for (char c : text) {
    if (c == ' ' && (out->empty() || out->back() == ' ')) continue;
    out->push_back(c);
  }
}

struct Realized {
  std::string question;
  std::vector<EntitySpan> entities;
  std::string lf;
};

template <typename Choose>
Realized Realize(const CorpusSpec &spec, const QuestionTemplate &t, Choose &&choose) {
  Realized r;
  std::map<EntityKind, std::vector<std::string>> values;
  for (const TemplatePart &p : t.question) {
    switch (p.kind) {
      case TemplatePart::Kind::kText:
        AppendCollapsed(p.text, &r.question);
        break;
      case TemplatePart::Kind::kGroup:
        AppendCollapsed(p.alternatives[choose(p.alternatives.size())], &r.question);
        break;
      case TemplatePart::Kind::kSlot: {
        std::size_t k = choose(PoolSize(spec, p.slot));
        std::string surface, value;
        if (p.slot == EntityKind::kConcept) {
          surface = spec.concepts[k].text;
          value = spec.concepts[k].cui;
        } else {
          const auto &pool = p.slot == EntityKind::kPerson        ? spec.persons
                             : p.slot == EntityKind::kTemporalRef ? spec.temporal_refs
                                                                  : spec.measurements;
          surface = value = pool[k];
        }
        std::size_t start = Utf8Length(r.question);
        r.question += surface;
        r.entities.push_back({start, start + Utf8Length(surface), p.slot, value});
        values[p.slot].push_back(value);
        break;
      }
    }
  }
  while (!r.question.empty() && r.question.back() == ' ') r.question.pop_back();
  r.lf = InstantiateLf(t.lf, values);
  return r;
}

std::vector<std::string> StringList(const json &j, const char *key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  for (const json &v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace

double CorpusSpec::Capacity() const {
  double total = 0;
  for (const QuestionTemplate &t : templates) {
    double n = 1;
    for (const TemplatePart &p : t.question) {
      if (p.kind == TemplatePart::Kind::kGroup) n *= static_cast<double>(p.alternatives.size());
      if (p.kind == TemplatePart::Kind::kSlot) n *= static_cast<double>(PoolSize(*this, p.slot));
    }
    total += n;
  }
  return total;
}

CorpusSpec ParseCorpusSpec(std::string_view json_text, const PredicateRegistry &registry) {
  CorpusSpec spec;
  try {
    json j = json::parse(json_text);
    spec.name = j.value("name", std::string("corpus"));
    spec.seed = j.value("seed", std::uint64_t{1});
    spec.count = j.at("count").get<std::size_t>();
    spec.predicates = StringList(j, "predicates");
    const json &pools = j.at("pools");
    if (pools.contains("concept")) {
      for (const json &c : pools.at("concept")) {
        spec.concepts.push_back({c.at("text").get<std::string>(), c.at("cui").get<std::string>()});
      }
    }
    spec.persons = StringList(pools, "person");
    spec.temporal_refs = StringList(pools, "temporal_ref");
    spec.measurements = StringList(pools, "measurement");
    for (const json &t : j.at("templates")) {
      QuestionTemplate qt;
      qt.source = t.at("question").get<std::string>();
      qt.question = ParseQuestionTemplate(qt.source);
      qt.lf = t.at("lf").get<std::string>();
      qt.weight = t.value("weight", 1.0);
      spec.templates.push_back(std::move(qt));
    }
  } catch (const json::exception &e) {
    throw DataError(std::string("corpus spec: ") + e.what());
  }

  if (spec.count < 1) throw DataError("corpus spec: count must be at least 1");
  if (spec.templates.empty()) throw DataError("corpus spec: no templates");
  std::set<std::string> inventory(spec.predicates.begin(), spec.predicates.end());
  for (const std::string &p : inventory) {
    if (!registry.Contains(p)) throw UnknownPredicate(p);
  }
  auto check_predicate = [&](const std::string &p, const std::string &where) {
    if (!inventory.empty() && !inventory.count(p)) {
      throw DataError("corpus spec: predicate " + p + " in " + where +
                      " is outside the inventory");
    }
  };
  for (const QuestionTemplate &t : spec.templates) {
    if (t.weight <= 0) throw DataError("corpus spec: template weight must be positive");
    for (const TemplatePart &p : t.question) {
      if (p.kind == TemplatePart::Kind::kSlot && PoolSize(spec, p.slot) == 0) {
        throw DataError("corpus spec: empty pool for " + SlotName(p.slot));
      }
      if (p.kind == TemplatePart::Kind::kGroup && !p.predicate.empty()) {
        if (!registry.Contains(p.predicate)) throw UnknownPredicate(p.predicate);
        check_predicate(p.predicate, t.source);
      }
    }
    Realized r = Realize(spec, t, [](std::size_t) { return std::size_t{0}; });
    LogicalForm lf = LogicalForm::Placeholder();
    try {
      lf = ParseLf(r.lf, registry);
    } catch (const DataError &e) {
      throw DataError("corpus spec: template LF " + t.lf + ": " + e.what());
    }
    std::vector<std::string> preds;
    CollectPredicates(lf, &preds);
    for (const std::string &p : preds) check_predicate(p, t.lf);
  }
  return spec;
}

CorpusSpec LoadCorpusSpec(const std::string &path, const PredicateRegistry &registry) {
  return ParseCorpusSpec(ReadFile(path), registry);
}

Dataset GenerateCorpus(const CorpusSpec &spec, const PredicateRegistry &registry) {
  if (static_cast<double>(spec.count) > spec.Capacity()) {
    throw SpecExhausted("templates can produce at most " +
                        std::to_string(static_cast<long long>(spec.Capacity())) +
                        " distinct questions, " + std::to_string(spec.count) + " requested");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<double> weights;
  for (const QuestionTemplate &t : spec.templates) weights.push_back(t.weight);
  std::discrete_distribution<std::size_t> pick_template(weights.begin(), weights.end());
  auto choose = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  Dataset out;
  std::unordered_set<std::string> seen;
  const std::size_t max_attempts = std::max<std::size_t>(1000, 200 * spec.count);
  for (std::size_t attempt = 0; out.size() < spec.count; ++attempt) {
    if (attempt >= max_attempts) {
      throw SpecExhausted("only " + std::to_string(out.size()) + " distinct examples after " +
                          std::to_string(attempt) + " draws, " + std::to_string(spec.count) +
                          " requested");
    }
    Realized r = Realize(spec, spec.templates[pick_template(rng)], choose);
    if (!seen.insert(r.question + '\t' + r.lf).second) continue;
    char id[32];
    std::snprintf(id, sizeof id, "-%05zu", out.size());
    out.push_back(MakeExample(spec.name + id, std::move(r.question), std::move(r.entities),
                              std::move(r.lf), registry));
  }
  return out;
}

CorpusStats AuditStats(const Dataset &data) {
  CorpusStats s;
  s.queries = data.size();
  if (data.empty()) return s;
  std::set<std::string> tokens, preds;
  std::size_t token_total = 0, pred_total = 0;
  for (const Example &e : data) {
    tokens.insert(e.input.tokens.begin(), e.input.tokens.end());
    token_total += e.input.tokens.size();
    std::vector<std::string> p;
    CollectPredicates(e.gold, &p);
    preds.insert(p.begin(), p.end());
    pred_total += p.size();
  }
  s.unique_tokens = tokens.size();
  s.unique_predicates = preds.size();
  s.mean_tokens = static_cast<double>(token_total) / static_cast<double>(data.size());
  s.mean_predicates = static_cast<double>(pred_total) / static_cast<double>(data.size());
  return s;
}

std::string StatsToJson(const CorpusStats &s) {
  json j = {{"queries", s.queries},
            {"unique_tokens", s.unique_tokens},
            {"unique_predicates", s.unique_predicates},
            {"mean_tokens_per_query", s.mean_tokens},
            {"mean_predicates_per_query", s.mean_predicates}};
  return j.dump(2);
}

Lexicon DeriveLexicon(const CorpusSpec &spec, const PredicateRegistry &registry) {
  Lexicon lex = Lexicon::WithDefaults();
  for (const QuestionTemplate &t : spec.templates) {
    for (const TemplatePart &p : t.question) {
      if (p.kind != TemplatePart::Kind::kGroup || p.predicate.empty()) continue;
      const PredicateSignature *sig = registry.Find(p.predicate);
      ArgTemplate arg;
      if (sig->arg_kinds == std::vector<ArgKind>{ArgKind::kVar}) {
        arg = ArgTemplate::kVar;
      } else if (sig->arg_kinds == std::vector<ArgKind>{ArgKind::kVar, ArgKind::kLiteral}) {
        arg = ArgTemplate::kMeasurement;
      } else if (sig->arg_kinds == std::vector<ArgKind>{ArgKind::kVar, ArgKind::kCui}) {
        arg = ArgTemplate::kConcept;
      } else {
        arg = ArgTemplate::kForm;
      }
      for (const std::string &alt : p.alternatives) {
        lex.Add({Normalize(alt), p.predicate, arg}, registry);
      }
    }
  }
  return lex;
}

PhraseTable DerivePhraseTable(const CorpusSpec &spec) {
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> order;
  for (const QuestionTemplate &t : spec.templates) {
    for (const TemplatePart &p : t.question) {
      if (p.kind != TemplatePart::Kind::kGroup || p.predicate.empty()) continue;
      if (!groups.count(p.predicate)) order.push_back(p.predicate);
      auto &phrases = groups[p.predicate];
      for (const std::string &alt : p.alternatives) {
        std::string lower = ToLowerAscii(alt);
        if (std::find(phrases.begin(), phrases.end(), lower) == phrases.end()) {
          phrases.push_back(lower);
        }
      }
    }
  }
  PhraseTable table;
  for (const std::string &pred : order) {
    if (groups[pred].size() >= 2) table.push_back({pred, groups[pred]});
  }
  return table;
}

std::string PhraseTableToText(const PhraseTable &table) {
  std::string out;
  for (const PhraseGroup &g : table) out += g.predicate + "\t" + Join(g.phrases, "|") + "\n";
  return out;
}

PhraseTable ParsePhraseTable(std::string_view text) {
  PhraseTable table;
  for (const std::string &line : Split(text, '\n')) {
    std::string_view t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> cols = Split(t, '\t');
    if (cols.size() != 2) throw DataError("phrase table: expected predicate<TAB>phrases");
    PhraseGroup g{std::string(Trim(cols[0])), {}};
    for (const std::string &p : Split(cols[1], '|')) {
      if (!Trim(p).empty()) g.phrases.push_back(ToLowerAscii(Trim(p)));
    }
    table.push_back(std::move(g));
  }
  return table;
}

std::string_view StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kEntity: return "entity";
    case Strategy::kPhrase: return "phrase";
    case Strategy::kConcat: return "concat";
  }
  return "?";
}

Strategy ParseStrategy(std::string_view s) {
  if (s == "entity") return Strategy::kEntity;
  if (s == "phrase") return Strategy::kPhrase;
  if (s == "concat") return Strategy::kConcat;
  throw DataError("unknown augmentation strategy: " + std::string(s));
}

namespace {

struct PoolValue {
  EntityKind kind;
  std::string surface;
  std::string value;
  bool operator<(const PoolValue &o) const {
    return std::tie(kind, value, surface) < std::tie(o.kind, o.value, o.surface);
  }
};

std::string SubstringCp(const std::string &s, std::size_t start, std::size_t end) {
  std::size_t b = Utf8ByteOffset(s, start);
  return s.substr(b, Utf8ByteOffset(s, end) - b);
}

// Replaces code points [start, end) and shifts the spans after it.
void ReplaceCp(std::string *question, std::vector<EntitySpan> *spans, std::size_t start,
               std::size_t end, const std::string &replacement) {
  std::size_t b = Utf8ByteOffset(*question, start);
  std::size_t e = Utf8ByteOffset(*question, end);
  question->replace(b, e - b, replacement);
  long delta = static_cast<long>(Utf8Length(replacement)) - static_cast<long>(end - start);
  for (EntitySpan &s : *spans) {
    if (s.start >= end) {
      s.start = static_cast<std::size_t>(static_cast<long>(s.start) + delta);
      s.end = static_cast<std::size_t>(static_cast<long>(s.end) + delta);
    }
  }
}

bool IsWordByte(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct PhraseHit {
  std::size_t group;
  std::size_t phrase;
  std::size_t start;  // code points
  std::size_t end;
};

std::vector<PhraseHit> FindPhrases(const Example &e, const PhraseTable &table) {
  std::vector<PhraseHit> hits;
  std::string lower = ToLowerAscii(e.question);
  for (std::size_t g = 0; g < table.size(); ++g) {
    for (std::size_t p = 0; p < table[g].phrases.size(); ++p) {
      const std::string &phrase = table[g].phrases[p];
      for (std::size_t pos = lower.find(phrase); pos != std::string::npos;
           pos = lower.find(phrase, pos + 1)) {
        std::size_t after = pos + phrase.size();
        if ((pos > 0 && IsWordByte(lower[pos - 1])) ||
            (after < lower.size() && IsWordByte(lower[after]))) {
          continue;
        }
        std::size_t s = Utf8Length(std::string_view(lower).substr(0, pos));
        std::size_t t = s + Utf8Length(phrase);
        bool inside_entity = std::any_of(e.entities.begin(), e.entities.end(),
                                         [&](const EntitySpan &x) { return s < x.end && x.start < t; });
        if (!inside_entity) hits.push_back({g, p, s, t});
      }
    }
  }
  return hits;
}

}  // namespace

Augmentation Recombine(const Dataset &data, Strategy strategy, std::size_t count,
                       std::uint64_t seed, const PredicateRegistry &registry,
                       const PhraseTable &phrases) {
  Augmentation out;
  if (count == 0) return out;
  if (data.empty()) throw InsufficientMaterial("cannot augment an empty dataset");
  std::mt19937_64 rng(seed);
  auto choose = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  std::unordered_set<std::string> seen;
  for (const Example &e : data) seen.insert(e.question + '\t' + e.lf_text);

  // Entity pools in a fixed order.
  std::set<PoolValue> pool_set;
  for (const Example &e : data) {
    for (const EntitySpan &s : e.entities) {
      if (s.kind == EntityKind::kPerson) continue;
      pool_set.insert({s.kind, SubstringCp(e.question, s.start, s.end), s.value});
    }
  }
  std::map<EntityKind, std::vector<PoolValue>> pools;
  for (const PoolValue &v : pool_set) pools[v.kind].push_back(v);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (strategy == Strategy::kEntity) {
      for (const EntitySpan &s : data[i].entities) {
        if (s.kind != EntityKind::kPerson && pools[s.kind].size() >= 2) {
          eligible.push_back(i);
          break;
        }
      }
    } else if (strategy == Strategy::kPhrase) {
      if (!FindPhrases(data[i], phrases).empty()) eligible.push_back(i);
    } else {
      eligible.push_back(i);
    }
  }
  if (eligible.empty() || (strategy == Strategy::kConcat && data.size() < 2)) {
    throw InsufficientMaterial(std::string(StrategyName(strategy)) +
                               " augmentation has no usable examples");
  }

  const std::size_t max_attempts = std::max<std::size_t>(1000, 100 * count);
  std::size_t produced = 0;
  for (std::size_t attempt = 0; produced < count; ++attempt) {
    if (attempt >= max_attempts) {
      throw InsufficientMaterial("only " + std::to_string(produced) + " distinct " +
                                 std::string(StrategyName(strategy)) +
                                 " examples could be made, " + std::to_string(count) +
                                 " requested");
    }
    char id[48];
    std::snprintf(id, sizeof id, "%s-%05zu", std::string(StrategyName(strategy)).c_str(),
                  produced);
    const Example &base = data[eligible[choose(eligible.size())]];

    if (strategy == Strategy::kConcat) {
      const Example &other = data[choose(data.size())];
      if (&other == &base) continue;
      SequencePair pair{id, base.input.tokens, LfTokens(base.abstract_gold)};
      pair.source.emplace_back(kSeparatorToken);
      pair.source.insert(pair.source.end(), other.input.tokens.begin(), other.input.tokens.end());
      pair.target.emplace_back(kSeparatorToken);
      std::vector<std::string> tail = LfTokens(other.abstract_gold);
      pair.target.insert(pair.target.end(), tail.begin(), tail.end());
      if (!seen.insert(Join(pair.source, " ") + '\t' + Join(pair.target, " ")).second) continue;
      out.pairs.push_back(std::move(pair));
      ++produced;
      continue;
    }

    std::string question = base.question;
    std::vector<EntitySpan> spans = base.entities;
    LogicalForm lf = base.gold;
    if (strategy == Strategy::kEntity) {
      std::vector<std::size_t> swappable;
      for (std::size_t k = 0; k < spans.size(); ++k) {
        if (spans[k].kind != EntityKind::kPerson && pools[spans[k].kind].size() >= 2) {
          swappable.push_back(k);
        }
      }
      std::size_t k = swappable[choose(swappable.size())];
      const std::vector<PoolValue> &pool = pools[spans[k].kind];
      const PoolValue &repl = pool[choose(pool.size())];
      if (repl.value == spans[k].value) continue;
      EntitySpan old = spans[k];
      ReplaceCp(&question, &spans, old.start, old.end, repl.surface);
      spans[k].end = old.start + Utf8Length(repl.surface);
      spans[k].value = repl.value;
      lf = AttachLfEntities(base.abstract_gold, spans);
    } else {
      std::vector<PhraseHit> hits = FindPhrases(base, phrases);
      const PhraseHit &hit = hits[choose(hits.size())];
      const PhraseGroup &group = phrases[hit.group];
      std::size_t p = choose(group.phrases.size());
      if (p == hit.phrase) continue;
      std::string repl = group.phrases[p];
      std::string original = SubstringCp(question, hit.start, hit.end);
      if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0]))) {
        repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
      }
      ReplaceCp(&question, &spans, hit.start, hit.end, repl);
    }
    std::string lf_text = PrintLf(lf);
    if (!seen.insert(question + '\t' + lf_text).second) continue;
    out.examples.push_back(MakeExample(id, question, spans, lf_text, registry));
    ++produced;
  }
  return out;
}

std::string WriteAugmentation(const Augmentation &a) {
  std::string out = WriteDataset(a.examples);
  for (const SequencePair &p : a.pairs) {
    json j = {{"id", p.id}, {"strategy", "concat"}, {"source", p.source}, {"target", p.target}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<SequencePair> ReadSequencePairs(std::string_view jsonl) {
  std::vector<SequencePair> out;
  for (const std::string &line : Split(jsonl, '\n')) {
    if (Trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      if (!j.contains("source")) continue;
      out.push_back({j.at("id").get<std::string>(),
                     j.at("source").get<std::vector<std::string>>(),
                     j.at("target").get<std::vector<std::string>>()});
    } catch (const json::exception &e) {
      throw DataError(std::string("sequence pairs: ") + e.what());
    }
  }
  return out;
}

}  // namespace lambdaehr
