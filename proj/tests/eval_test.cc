#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "lambdaehr/eval.h"
#include "lambdaehr/forge.h"
#include "lambdaehr/text.h"

namespace lambdaehr {
namespace {

const PredicateRegistry &Reg() {
  static const PredicateRegistry r =
      PredicateRegistry::LoadFile(std::string(LAMBDAEHR_DATA_DIR) + "/clinical_registry.tsv");
  return r;
}

const Dataset &Corpus(const std::string &name) {
  static std::map<std::string, Dataset> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    auto spec = LoadCorpusSpec(std::string(LAMBDAEHR_DATA_DIR) + "/" + name + "_like.json", Reg());
    it = cache.emplace(name, GenerateCorpus(spec, Reg())).first;
  }
  return it->second;
}

// Answers from a lookup table over the questions it was trained on.
class TableParser : public Parser {
 public:
  explicit TableParser(const Dataset &train) {
    for (const Example &e : train) {
      table_.emplace(Join(e.input.tokens, " "), e.abstract_gold);
      std::vector<std::string> preds;
      CollectPredicates(e.gold, &preds);
      training_predicates.insert(preds.begin(), preds.end());
      source_vocabulary.insert(e.input.tokens.begin(), e.input.tokens.end());
    }
  }
  std::string mode() const override { return "table"; }
  ParseResult Parse(const AbstractedQuestion &q) const override {
    ParseResult r;
    auto it = table_.find(Join(q.tokens, " "));
    if (it == table_.end()) {
      r.error = "NoCandidates";
    } else {
      r.lf = it->second;
    }
    return r;
  }
  void Save(const std::string &) const override {}
  const PredicateRegistry &registry() const override { return Reg(); }

 private:
  std::map<std::string, LogicalForm> table_;
};

class ConstantParser : public Parser {
 public:
  explicit ConstantParser(LogicalForm lf) : lf_(std::move(lf)) {}
  std::string mode() const override { return "constant"; }
  ParseResult Parse(const AbstractedQuestion &) const override { return {lf_, "", 0, ""}; }
  void Save(const std::string &) const override {}
  const PredicateRegistry &registry() const override { return Reg(); }

 private:
  LogicalForm lf_;
};

TEST_CASE("fold sizes for 401 examples") {
  FoldPlan plan = SplitFolds(401, 10, 3);
  std::multiset<std::size_t> sizes;
  for (const auto &f : plan.folds) sizes.insert(f.size());
  CHECK(sizes.count(41) == 1);
  CHECK(sizes.count(40) == 9);
  CHECK(plan.run(9).dev == 0);
  CHECK(plan.run(2).train.size() == 8);
}

TEST_CASE("fold partition laws over random triples") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t k = 2 + rng() % 20;
    std::size_t n = k + rng() % 500;
    std::uint64_t seed = rng();
    FoldPlan plan = SplitFolds(n, k, seed);
    REQUIRE(plan.folds.size() == k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto &f : plan.folds) {
      for (std::size_t i : f) ++seen[i];
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(hi - lo <= 1);
    for (std::size_t i = 0; i < k; ++i) CHECK(plan.run(i).dev != plan.run(i).test);
    CHECK(SplitFolds(n, k, seed).folds == plan.folds);
  }
  FoldPlan loov = SplitFolds(7, 7, 1);
  for (const auto &f : loov.folds) CHECK(f.size() == 1);
  CHECK_THROWS_AS(SplitFolds(5, 6, 1), TooFewExamples);
  CHECK_THROWS_AS(SplitFolds(5, 1, 1), TooFewExamples);
}

TEST_CASE("cross-validation with a memorizing model") {
  const Dataset &data = Corpus("icu");
  FoldPlan plan = SplitFolds(data.size(), 10, 5);
  std::size_t trained = 0;
  ModelFactory memorize = [&](const Dataset &, const Dataset &, std::size_t) {
    ++trained;
    return std::make_unique<TableParser>(data);
  };
  EvalReport r = RunCv(memorize, data, plan, "table", "icu");
  CHECK(trained == 10);
  CHECK(r.predictions.size() == 401);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_accuracy == 1.0);
  std::set<std::string> ids;
  for (const Prediction &p : r.predictions) ids.insert(p.id);
  CHECK(ids.size() == 401);

  ModelFactory honest = [](const Dataset &train, const Dataset &, std::size_t) {
    return std::make_unique<TableParser>(train);
  };
  EvalReport h = RunCv(honest, data, plan, "table", "icu");
  std::size_t correct = 0;
  for (const Prediction &p : h.predictions) correct += p.correct;
  CHECK(h.accuracy == doctest::Approx(static_cast<double>(correct) / 401));
  double mean = 0;
  for (double a : h.fold_accuracies) mean += a;
  CHECK(h.macro_accuracy == doctest::Approx(mean / 10));
  std::size_t errors = 0;
  for (const VariantRow &v : h.variants) errors += v.errors;
  CHECK(errors == 401 - correct);

  std::map<std::string, std::pair<std::size_t, std::size_t>> brute;
  for (const Prediction &p : h.predictions) {
    auto &cell = brute[OutermostLabel(ParseLf(p.gold, Reg()), true)];
    ++cell.first;
    cell.second += !p.correct;
  }
  REQUIRE(brute.size() == h.variants.size());
  for (const VariantRow &v : h.variants) {
    CHECK(brute[v.label].first == v.total);
    CHECK(brute[v.label].second == v.errors);
  }
  CHECK(ReportToJson(ReportFromJson(ReportToJson(h))) == ReportToJson(h));
}

TEST_CASE("constant model on two variants") {
  Dataset data;
  for (const Example &e : Corpus("fhir")) {
    std::string v = OutermostLabel(e.gold, true);
    if ((v == "count" || v == "latest") && data.size() < 60) data.push_back(e);
  }
  LogicalForm constant = data[0].abstract_gold;
  std::size_t expected = 0;
  for (const Example &e : data) {
    expected += ExactMatch(AttachLfEntities(constant, e.input.entities), e.gold);
  }
  ModelFactory f = [&](const Dataset &, const Dataset &, std::size_t) {
    return std::make_unique<ConstantParser>(constant);
  };
  EvalReport r = RunCv(f, data, SplitFolds(data.size(), 10, 1), "constant", "mini");
  CHECK(r.accuracy == doctest::Approx(static_cast<double>(expected) / data.size()));
}

TEST_CASE("leave-one-out iteration counts") {
  const Dataset &data = Corpus("fhir");
  REQUIRE(data.size() == 980);
  std::size_t runs = 0;
  ModelFactory f = [&](const Dataset &train, const Dataset &dev, std::size_t) {
    ++runs;
    CHECK(train.size() == 979);
    CHECK(dev.size() == 979);
    return std::make_unique<ConstantParser>(data[0].abstract_gold);
  };
  EvalReport r = RunLoov(f, data, "constant", "fhir");
  CHECK(runs == 980);
  CHECK(r.iterations == 980);
  CHECK(r.predictions.size() == 980);
  CHECK(!r.notes.empty());

  Dataset two(data.begin(), data.begin() + 2);
  ModelFactory t = [](const Dataset &train, const Dataset &, std::size_t) {
    return std::make_unique<TableParser>(train);
  };
  EvalReport a = RunLoov(t, two, "table", "two");
  CHECK(a.iterations == 2);
  CHECK(ReportToJson(a) == ReportToJson(RunLoov(t, two, "table", "two")));
  CHECK_THROWS_AS(RunLoov(t, Dataset(data.begin(), data.begin() + 1), "table", "one"),
                  TooFewExamples);
}

TEST_CASE("cross-dataset flags variants unseen in training") {
  TableParser parser(Corpus("fhir"));
  REQUIRE(!parser.training_predicates.count("sum"));
  EvalReport r = RunCrossDataset(parser, Corpus("icu"), "table", "icu");
  CHECK(r.predictions.size() == 401);
  CHECK(r.training_runs == 0);
  bool found = false;
  for (const VariantRow &v : r.variants) {
    if (v.label == "sum") {
      found = true;
      CHECK(v.unseen);
      CHECK(v.errors == v.total);
    }
    if (v.label == "count") CHECK(!v.unseen);
  }
  CHECK(found);
  CHECK(!r.vocabulary_gap.empty());
  CHECK(RenderReport(r).find("unseen-in-training") != std::string::npos);
  CHECK_THROWS_AS(RunCrossDataset(parser, {}, "table", "none"), EmptyDataset);
}

TEST_CASE("fold failures carry the fold index") {
  const Dataset &data = Corpus("icu");
  ModelFactory f = [](const Dataset &, const Dataset &, std::size_t run) -> std::unique_ptr<Parser> {
    if (run == 3) throw DataError("broken");
    return std::make_unique<ConstantParser>(LogicalForm::Placeholder());
  };
  try {
    RunCv(f, data, SplitFolds(data.size(), 10, 1), "x", "icu");
    FAIL("expected a fold failure");
  } catch (const FoldFailure &e) {
    CHECK(e.fold() == 3);
    CHECK(e.data_error());
  }
}

TEST_CASE("agreement between two models") {
  EvalReport a{"A", "d", "CD"}, b{"B", "d", "CD"};
  a.predictions = {{"q1", "", "", "", true}, {"q2", "", "", "", true}, {"q3", "", "", "", false}};
  b.predictions = {{"q1", "", "", "", false}, {"q2", "", "", "", true}, {"q3", "", "", "", false}};
  AgreementTable t = Agreement({a, b});
  CHECK(t.cells[{true, false}] == 1);
  CHECK(t.cells[{true, true}] == 1);
  CHECK(t.cells[{false, false}] == 1);
  CHECK(t.cells.count({false, true}) == 0);
  CHECK(!RenderAgreement(t).empty());
  EvalReport c = b;
  c.dataset = "other";
  CHECK_THROWS_AS(Agreement({a, c}), MismatchedDatasets);
  c = b;
  c.predictions.pop_back();
  CHECK_THROWS_AS(Agreement({a, c}), MismatchedDatasets);
}

TEST_CASE("predictions dump") {
  EvalReport a{"A", "d", "CD"};
  a.predictions = {{"q1", "?", "count(x)", "", false}};
  CHECK(PredictionsJsonl(a) == "{\"correct\":false,\"gold\":\"count(x)\",\"id\":\"q1\",\"pred\":\"\"}\n");
}

}  // namespace
}  // namespace lambdaehr
