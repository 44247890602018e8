#include <set>

#include "doctest.h"
#include "lambdaehr/forge.h"
#include "lambdaehr/grammar.h"
#include "lambdaehr/text.h"

namespace lambdaehr {
namespace {

const PredicateRegistry &Reg() {
  static const PredicateRegistry r =
      PredicateRegistry::LoadFile(std::string(LAMBDAEHR_DATA_DIR) + "/clinical_registry.tsv");
  return r;
}

const CorpusSpec &Fhir() {
  static const CorpusSpec s =
      LoadCorpusSpec(std::string(LAMBDAEHR_DATA_DIR) + "/fhir_like.json", Reg());
  return s;
}

const Dataset &FhirData() {
  static const Dataset d = GenerateCorpus(Fhir(), Reg());
  return d;
}

const char *kTinySpec = R"js({
  "name": "tiny", "seed": 3, "count": 1,
  "pools": {"concept": [{"text": "influenza shots", "cui": "C0234422"}],
            "person": ["her"], "temporal_ref": ["in the past 3 years"]},
  "templates": [{"question": "(How many times)=count were the {concept} given to {person} {temporal_ref}?",
                 "lf": "count(λx.has_concept(x, {concept}) ∧ time_within(x, {temporal_ref}))"}]
})js";

TEST_CASE("question template syntax") {
  std::vector<TemplatePart> parts = ParseQuestionTemplate("(how many|number of)=count {concept} (a|)?");
  REQUIRE(parts.size() == 6);
  CHECK(parts[0].kind == TemplatePart::Kind::kGroup);
  CHECK(parts[0].predicate == "count");
  CHECK(parts[0].alternatives == std::vector<std::string>{"how many", "number of"});
  CHECK(parts[2].kind == TemplatePart::Kind::kSlot);
  CHECK(parts[2].slot == EntityKind::kConcept);
  CHECK(parts[4].alternatives == std::vector<std::string>{"a", ""});
  CHECK(parts[5].text == "?");
  CHECK_THROWS_AS(ParseQuestionTemplate("(open"), SyntaxError);
  CHECK_THROWS_AS(ParseQuestionTemplate("{concept"), SyntaxError);
  CHECK_THROWS_AS(ParseQuestionTemplate("(a|)=count"), SyntaxError);
  CHECK_THROWS_AS(ParseQuestionTemplate("{drug}"), DataError);
}

TEST_CASE("single template, count one") {
  CorpusSpec spec = ParseCorpusSpec(kTinySpec, Reg());
  CHECK(spec.Capacity() == 1);
  Dataset d = GenerateCorpus(spec, Reg());
  REQUIRE(d.size() == 1);
  CHECK(d[0].id == "tiny-00000");
  CHECK(d[0].question == "How many times were the influenza shots given to her in the past 3 years?");
  CHECK(Join(d[0].input.tokens, " ") == "how mani time were the concept given to patient temporal_ref");
  CHECK(d[0].lf_text ==
        "count(λx.has_concept(x, C0234422) ∧ time_within(x, 'in the past 3 years'))");
  REQUIRE(d[0].entities.size() == 3);
  CHECK(d[0].entities[0].start == 24);
  CHECK(d[0].entities[0].end == 39);
}

TEST_CASE("count beyond capacity") {
  std::string text = kTinySpec;
  text.replace(text.find("\"count\": 1"), 10, "\"count\": 2");
  CorpusSpec spec = ParseCorpusSpec(text, Reg());
  CHECK_THROWS_AS(GenerateCorpus(spec, Reg()), SpecExhausted);
}

TEST_CASE("invalid specs") {
  std::string bad_lf = kTinySpec;
  bad_lf.replace(bad_lf.find("count(λx"), 5, "cnt(λ");
  CHECK_THROWS_AS(ParseCorpusSpec(bad_lf, Reg()), DataError);
  std::string outside = kTinySpec;
  outside.replace(outside.find("\"count\": 1,"), 11, "\"count\": 1, \"predicates\": [\"has_concept\"],");
  CHECK_THROWS_AS(ParseCorpusSpec(outside, Reg()), DataError);
  std::string missing_slot = kTinySpec;
  missing_slot.replace(missing_slot.find(" {temporal_ref}?"), 16, "?");
  CHECK_THROWS_AS(ParseCorpusSpec(missing_slot, Reg()), DataError);
  CHECK_THROWS_AS(ParseCorpusSpec("{", Reg()), DataError);
}

TEST_CASE("audit stats") {
  CorpusStats empty = AuditStats({});
  CHECK(empty.queries == 0);
  CHECK(empty.unique_tokens == 0);
  CHECK(empty.mean_tokens == 0);

  Example e = MakeExample(
      "icu-1", "Did her temperature fall below 38C?",
      {{4, 7, EntityKind::kPerson, "her"}, {8, 19, EntityKind::kConcept, "C0005903"},
       {31, 34, EntityKind::kMeasurement, "38C"}},
      "delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))", Reg());
  CorpusStats s = AuditStats({e});
  CHECK(s.queries == 1);
  CHECK(s.unique_tokens == 6);
  CHECK(s.unique_predicates == 3);
  CHECK(s.mean_tokens == 6.0);
  CHECK(s.mean_predicates == 3.0);
}

TEST_CASE("FHIR-like corpus matches its calibration targets") {
  CorpusStats s = AuditStats(FhirData());
  CHECK(s.queries == 980);
  CHECK(s.unique_predicates == 21);
  CHECK(s.unique_tokens >= 191);
  CHECK(std::abs(s.mean_tokens - 5.84) <= 1.0);
  CHECK(std::abs(s.mean_predicates - 3.73) <= 0.5);

  std::set<std::string> keys;
  for (const Example &e : FhirData()) keys.insert(e.question + "\t" + e.lf_text);
  CHECK(keys.size() == FhirData().size());
}

TEST_CASE("ICU-like corpus") {
  CorpusSpec spec = LoadCorpusSpec(std::string(LAMBDAEHR_DATA_DIR) + "/icu_like.json", Reg());
  Dataset d = GenerateCorpus(spec, Reg());
  CorpusStats s = AuditStats(d);
  CHECK(s.queries == 401);
  CHECK(s.unique_predicates == 53);
  std::set<std::string> fhir_preds, icu_preds;
  for (const Example &e : FhirData()) {
    std::vector<std::string> p;
    CollectPredicates(e.gold, &p);
    fhir_preds.insert(p.begin(), p.end());
  }
  for (const Example &e : d) {
    std::vector<std::string> p;
    CollectPredicates(e.gold, &p);
    icu_preds.insert(p.begin(), p.end());
  }
  CHECK(std::includes(icu_preds.begin(), icu_preds.end(), fhir_preds.begin(), fhir_preds.end()));
  CHECK(icu_preds.count("sum") == 1);
  CHECK(fhir_preds.count("sum") == 0);
}

TEST_CASE("generation is deterministic per seed") {
  std::string a = WriteDataset(GenerateCorpus(Fhir(), Reg()));
  CHECK(a == WriteDataset(FhirData()));
  CorpusSpec other = Fhir();
  other.seed += 1;
  CHECK(a != WriteDataset(GenerateCorpus(other, Reg())));
}

TEST_CASE("generated records survive the toolkit") {
  TransitionSystem ts(AsdlGrammar::Default(), Reg());
  Dataset reread = ReadDataset(WriteDataset(FhirData()), Reg());
  REQUIRE(reread.size() == FhirData().size());
  for (std::size_t i = 0; i < reread.size(); ++i) {
    const Example &e = reread[i];
    CHECK(e.input.tokens == FhirData()[i].input.tokens);
    CHECK(PrintLf(ts.ActionsToLf(ts.LfToActions(e.gold))) == PrintLf(e.gold));
    CHECK(AttachLfEntities(e.abstract_gold, e.entities) == e.gold);
  }
}

TEST_CASE("derived lexicon and phrase table") {
  Lexicon lex = DeriveLexicon(Fhir(), Reg());
  auto hit = lex.LongestMatch({"how", "mani", "time", "did"}, 0);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0]->predicate == "count");
  CHECK(hit[0]->phrase.size() == 3);
  auto below = lex.LongestMatch({"below"}, 0);
  REQUIRE(below.size() == 1);
  CHECK(below[0]->arg == ArgTemplate::kMeasurement);

  PhraseTable table = DerivePhraseTable(Fhir());
  CHECK(table.size() >= 15);
  CHECK(ParsePhraseTable(PhraseTableToText(table)).size() == table.size());
  CHECK(PhraseTableToText(ParsePhraseTable(PhraseTableToText(table))) == PhraseTableToText(table));
  CHECK_THROWS_AS(ParsePhraseTable("count only"), DataError);
}

TEST_CASE("entity swap changes one concept and no structure") {
  Example a = MakeExample("a", "How many times were the influenza shots given to her in the past 3 years?",
                          {{24, 39, EntityKind::kConcept, "C0234422"},
                           {49, 52, EntityKind::kPerson, "her"},
                           {53, 72, EntityKind::kTemporalRef, "in the past 3 years"}},
                          "count(λx.has_concept(x, C0234422) ∧ time_within(x, 'in the past 3 years'))",
                          Reg());
  Example b = MakeExample("b", "Did her temperature fall below 38C?",
                          {{4, 7, EntityKind::kPerson, "her"},
                           {8, 19, EntityKind::kConcept, "C0005903"},
                           {31, 34, EntityKind::kMeasurement, "38C"}},
                          "delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))", Reg());
  Augmentation aug = Recombine({a, b}, Strategy::kEntity, 2, 7, Reg());
  REQUIRE(aug.examples.size() == 2);
  bool saw_swap = false;
  for (const Example &e : aug.examples) {
    if (e.lf_text.rfind("count", 0) != 0) continue;
    saw_swap = true;
    CHECK(e.lf_text == "count(λx.has_concept(x, C0005903) ∧ time_within(x, 'in the past 3 years'))");
    CHECK(e.question == "How many times were the temperature given to her in the past 3 years?");
    CHECK(Coarsen(e.gold) == Coarsen(a.gold));
  }
  CHECK(saw_swap);
  CHECK_THROWS_AS(Recombine({a, b}, Strategy::kEntity, 50, 7, Reg()), InsufficientMaterial);
  CHECK_THROWS_AS(Recombine({}, Strategy::kConcat, 1, 7, Reg()), InsufficientMaterial);
}

TEST_CASE("recombination at the default counts") {
  PhraseTable table = DerivePhraseTable(Fhir());
  std::set<std::string> originals;
  for (const Example &e : FhirData()) originals.insert(e.question + "\t" + e.lf_text);

  for (Strategy s : {Strategy::kEntity, Strategy::kPhrase}) {
    for (std::size_t count : {std::size_t{1800}, std::size_t{300}}) {
      Augmentation aug = Recombine(FhirData(), s, count, 11, Reg(), table);
      REQUIRE(aug.examples.size() == count);
      std::string jsonl = WriteAugmentation(aug);
      Dataset back = ReadDataset(jsonl, Reg());
      CHECK(back.size() == count);
      std::set<std::string> keys;
      for (const Example &e : aug.examples) {
        std::string key = e.question + "\t" + e.lf_text;
        CHECK(originals.count(key) == 0);
        keys.insert(key);
        CHECK_NOTHROW(ValidateLf(ParseLf(e.lf_text, Reg()), Reg()));
      }
      CHECK(keys.size() == count);
      CHECK(jsonl == WriteAugmentation(Recombine(FhirData(), s, count, 11, Reg(), table)));
    }
  }
  Augmentation phrase = Recombine(FhirData(), Strategy::kPhrase, 300, 11, Reg(), table);
  for (const Example &e : phrase.examples) {
    bool same_lf = false;
    for (const Example &o : FhirData()) {
      if (o.lf_text == e.lf_text) {
        same_lf = true;
        break;
      }
    }
    CHECK(same_lf);
  }
}

TEST_CASE("concatenation pairs") {
  Augmentation aug = Recombine(FhirData(), Strategy::kConcat, 1800, 5, Reg());
  REQUIRE(aug.pairs.size() == 1800);
  CHECK(aug.examples.empty());
  for (const SequencePair &p : aug.pairs) {
    CHECK(std::count(p.source.begin(), p.source.end(), std::string(kSeparatorToken)) == 1);
    CHECK(std::count(p.target.begin(), p.target.end(), std::string(kSeparatorToken)) == 1);
  }
  std::string jsonl = WriteAugmentation(aug);
  std::vector<SequencePair> back = ReadSequencePairs(jsonl);
  REQUIRE(back.size() == 1800);
  CHECK(back[3].source == aug.pairs[3].source);
  CHECK(back[3].target == aug.pairs[3].target);
  CHECK(ReadDataset(jsonl, Reg()).empty());
}

TEST_CASE("strategy names") {
  for (Strategy s : {Strategy::kEntity, Strategy::kPhrase, Strategy::kConcat}) {
    CHECK(ParseStrategy(StrategyName(s)) == s);
  }
  CHECK_THROWS_AS(ParseStrategy("shuffle"), DataError);
}

}  // namespace
}  // namespace lambdaehr
