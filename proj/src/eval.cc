#include "lambdaehr/eval.h"

#include <algorithm>
#include <future>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace lambdaehr {

FoldPlan::Run FoldPlan::run(std::size_t i) const {
  Run r{i, (i + 1) % k, {}};
  for (std::size_t f = 0; f < k; ++f) {
    if (f != r.test && f != r.dev) r.train.push_back(f);
  }
  return r;
}

std::size_t FoldPlan::size() const {
  std::size_t n = 0;
  for (const auto &f : folds) n += f.size();
  return n;
}

FoldPlan SplitFolds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || n < k) {
    throw TooFewExamples("cannot split " + std::to_string(n) + " examples into " +
                         std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i) plan.folds[i % k].push_back(order[i]);
  return plan;
}

Prediction Evaluate(const Parser &parser, const Example &e) {
  Prediction p;
  p.id = e.id;
  p.question = e.question;
  p.gold = PrintLf(e.gold);
  p.variant = OutermostLabel(e.gold, true);
  ParseResult detail;
  std::optional<LogicalForm> lf = ParseQuestion(parser, e.input, &detail);
  p.error = detail.error;
  if (lf) {
    p.pred = PrintLf(*lf);
    p.correct = ExactMatch(*lf, e.gold);
  }
  return p;
}

std::vector<VariantRow> VariantTable(const std::vector<Prediction> &predictions,
                                     const Dataset &data, const std::set<std::string> *seen) {
  std::map<std::string, const Example *> by_id;
  for (const Example &e : data) by_id[e.id] = &e;
  std::map<std::string, VariantRow> rows;
  std::map<std::string, bool> any_seen;
  for (const Prediction &p : predictions) {
    VariantRow &row = rows[p.variant];
    row.label = p.variant;
    ++row.total;
    if (!p.correct) ++row.errors;
    bool known = true;
    if (seen) {
      auto it = by_id.find(p.id);
      if (it != by_id.end()) {
        const LogicalForm &g = it->second->gold;
        known = !g.Is(NodeKind::kApply) || seen->count(g.text()) > 0;
      }
    }
    any_seen[p.variant] = any_seen[p.variant] || known;
  }
  std::vector<VariantRow> out;
  for (auto &[label, row] : rows) {
    row.unseen = seen && !any_seen[label];
    out.push_back(row);
  }
  return out;
}

namespace {

Dataset Gather(const Dataset &data, const std::vector<std::size_t> &idx) {
  Dataset out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

struct RunOutcome {
  std::vector<Prediction> predictions;
  double accuracy = 0;
};

RunOutcome RunOne(const ModelFactory &factory, const Dataset &train, const Dataset &dev,
                  const Dataset &test, std::size_t index) {
  RunOutcome out;
  try {
    std::unique_ptr<Parser> parser = factory(train, dev, index);
    std::size_t correct = 0;
    for (const Example &e : test) {
      Prediction p = Evaluate(*parser, e);
      p.fold = index;
      correct += p.correct;
      out.predictions.push_back(std::move(p));
    }
    out.accuracy = test.empty() ? 0 : static_cast<double>(correct) / test.size();
  } catch (const FoldFailure &) {
    throw;
  } catch (const DataError &e) {
    throw FoldFailure(index, e.what(), true);
  } catch (const std::exception &e) {
    throw FoldFailure(index, e.what(), false);
  }
  return out;
}

// Runs `count` jobs, at most `jobs` at a time, keeping results in index order.
std::vector<RunOutcome> RunAll(std::size_t count, std::size_t jobs,
                               const std::function<RunOutcome(std::size_t)> &job) {
  std::vector<RunOutcome> results(count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = job(i);
    return results;
  }
  for (std::size_t start = 0; start < count; start += jobs) {
    std::vector<std::future<RunOutcome>> batch;
    for (std::size_t i = start; i < std::min(count, start + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, job, i));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
  }
  return results;
}

void Finish(EvalReport *r, const std::vector<RunOutcome> &runs, const Dataset &data,
            const std::set<std::string> *seen) {
  std::size_t correct = 0;
  double sum = 0;
  for (const RunOutcome &o : runs) {
    r->fold_accuracies.push_back(o.accuracy);
    sum += o.accuracy;
    for (const Prediction &p : o.predictions) {
      correct += p.correct;
      r->predictions.push_back(p);
    }
  }
  r->iterations = runs.size();
  r->accuracy = r->predictions.empty() ? 0 : static_cast<double>(correct) / r->predictions.size();
  r->macro_accuracy = runs.empty() ? 0 : sum / runs.size();
  r->variants = VariantTable(r->predictions, data, seen);
}

}  // namespace

EvalReport RunCv(const ModelFactory &factory, const Dataset &data, const FoldPlan &plan,
                 const std::string &model, const std::string &dataset, std::size_t jobs) {
  if (plan.size() != data.size()) {
    throw DataError("fold plan covers " + std::to_string(plan.size()) + " examples, dataset has " +
                    std::to_string(data.size()));
  }
  EvalReport r;
  r.model = model;
  r.dataset = dataset;
  r.scheme = "CV";
  auto runs = RunAll(plan.k, jobs, [&](std::size_t i) {
    FoldPlan::Run run = plan.run(i);
    std::vector<std::size_t> train_idx;
    for (std::size_t f : run.train) {
      train_idx.insert(train_idx.end(), plan.folds[f].begin(), plan.folds[f].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<std::size_t> dev_idx = plan.folds[run.dev], test_idx = plan.folds[run.test];
    std::sort(dev_idx.begin(), dev_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return RunOne(factory, Gather(data, train_idx), Gather(data, dev_idx), Gather(data, test_idx),
                  i);
  });
  r.training_runs = plan.k;
  r.notes.push_back("k=" + std::to_string(plan.k) + " seed=" + std::to_string(plan.seed) +
                    "; test fold i, dev fold i+1 mod k");
  Finish(&r, runs, data, nullptr);
  return r;
}

EvalReport RunLoov(const ModelFactory &factory, const Dataset &data, const std::string &model,
                   const std::string &dataset, std::size_t jobs) {
  if (data.size() < 2) throw TooFewExamples("leave-one-out needs at least 2 examples");
  EvalReport r;
  r.model = model;
  r.dataset = dataset;
  r.scheme = "LOOV";
  auto runs = RunAll(data.size(), jobs, [&](std::size_t i) {
    Dataset train;
    train.reserve(data.size() - 1);
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j != i) train.push_back(data[j]);
    }
    return RunOne(factory, train, train, Dataset{data[i]}, i);
  });
  r.training_runs = data.size();
  r.notes.push_back("dev set = training set (no holdout at n-1 scale)");
  Finish(&r, runs, data, nullptr);
  return r;
}

EvalReport RunCrossDataset(const Parser &parser, const Dataset &target, const std::string &model,
                           const std::string &dataset) {
  if (target.empty()) throw EmptyDataset("cross-dataset target is empty");
  EvalReport r;
  r.model = model;
  r.dataset = dataset;
  r.scheme = "CD";
  RunOutcome o;
  std::size_t correct = 0;
  std::set<std::string> gap;
  for (const Example &e : target) {
    o.predictions.push_back(Evaluate(parser, e));
    correct += o.predictions.back().correct;
    for (const std::string &t : e.input.tokens) {
      if (!parser.source_vocabulary.empty() && !parser.source_vocabulary.count(t)) gap.insert(t);
    }
  }
  o.accuracy = static_cast<double>(correct) / target.size();
  r.vocabulary_gap.assign(gap.begin(), gap.end());
  if (!gap.empty()) {
    r.notes.push_back("VocabularyGap: " + std::to_string(gap.size()) +
                      " source tokens unseen in training");
  }
  Finish(&r, {o}, target, parser.training_predicates.empty() ? nullptr : &parser.training_predicates);
  return r;
}

AgreementTable Agreement(const std::vector<EvalReport> &reports) {
  if (reports.size() < 2) throw DataError("agreement needs at least two reports");
  AgreementTable t;
  std::map<std::string, std::vector<bool>> by_id;
  std::set<std::string> ids;
  for (const Prediction &p : reports[0].predictions) ids.insert(p.id);
  for (std::size_t r = 0; r < reports.size(); ++r) {
    t.models.push_back(reports[r].model);
    std::set<std::string> mine;
    for (const Prediction &p : reports[r].predictions) {
      mine.insert(p.id);
      by_id[p.id].push_back(p.correct);
    }
    if (mine != ids || reports[r].predictions.size() != ids.size() ||
        reports[r].dataset != reports[0].dataset) {
      throw MismatchedDatasets("report " + std::to_string(r) + " (" + reports[r].model +
                               ") covers a different dataset");
    }
  }
  for (const auto &[id, flags] : by_id) ++t.cells[flags];
  return t;
}

nlohmann::json ReportToJson(const EvalReport &r) {
  nlohmann::json variants = nlohmann::json::array();
  for (const VariantRow &v : r.variants) {
    variants.push_back(
        {{"label", v.label}, {"total", v.total}, {"errors", v.errors}, {"unseen", v.unseen}});
  }
  nlohmann::json preds = nlohmann::json::array();
  for (const Prediction &p : r.predictions) {
    preds.push_back({{"id", p.id},
                     {"question", p.question},
                     {"gold", p.gold},
                     {"pred", p.pred},
                     {"correct", p.correct},
                     {"fold", p.fold},
                     {"variant", p.variant},
                     {"error", p.error}});
  }
  return {{"model", r.model},
          {"dataset", r.dataset},
          {"scheme", r.scheme},
          {"accuracy", r.accuracy},
          {"macro_accuracy", r.macro_accuracy},
          {"fold_accuracies", r.fold_accuracies},
          {"iterations", r.iterations},
          {"training_runs", r.training_runs},
          {"notes", r.notes},
          {"vocabulary_gap", r.vocabulary_gap},
          {"variants", variants},
          {"predictions", preds}};
}

EvalReport ReportFromJson(const nlohmann::json &j) {
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.scheme = j.at("scheme").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_accuracy = j.value("macro_accuracy", r.accuracy);
    r.fold_accuracies = j.value("fold_accuracies", std::vector<double>{});
    r.iterations = j.value("iterations", std::size_t{0});
    r.training_runs = j.value("training_runs", std::size_t{0});
    r.notes = j.value("notes", std::vector<std::string>{});
    r.vocabulary_gap = j.value("vocabulary_gap", std::vector<std::string>{});
    for (const auto &v : j.at("variants")) {
      r.variants.push_back({v.at("label").get<std::string>(), v.at("total").get<std::size_t>(),
                            v.at("errors").get<std::size_t>(), v.value("unseen", false)});
    }
    for (const auto &p : j.at("predictions")) {
      Prediction x;
      x.id = p.at("id").get<std::string>();
      x.question = p.value("question", std::string());
      x.gold = p.at("gold").get<std::string>();
      x.pred = p.value("pred", std::string());
      x.correct = p.at("correct").get<bool>();
      x.fold = p.value("fold", std::size_t{0});
      x.variant = p.value("variant", std::string());
      x.error = p.value("error", std::string());
      r.predictions.push_back(std::move(x));
    }
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("bad report: ") + e.what());
  }
}

std::string PredictionsJsonl(const EvalReport &r) {
  std::string out;
  for (const Prediction &p : r.predictions) {
    nlohmann::json j = {{"id", p.id}, {"gold", p.gold}, {"pred", p.pred}, {"correct", p.correct}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string RenderReport(const EvalReport &r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << "Model" << std::setw(12) << "Dataset" << std::setw(8)
      << "Scheme" << std::setw(10) << "Accuracy" << "Macro\n";
  out << std::setw(12) << r.model << std::setw(12) << r.dataset << std::setw(8) << r.scheme
      << std::setw(10) << r.accuracy << r.macro_accuracy << "\n\n";
  out << std::setw(16) << "Variant" << std::setw(8) << "Total" << std::setw(8) << "Errors"
      << "\n";
  for (const VariantRow &v : r.variants) {
    out << std::setw(16) << v.label << std::setw(8) << v.total << std::setw(8) << v.errors
        << (v.unseen ? "unseen-in-training" : "") << "\n";
  }
  for (const std::string &n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

std::string RenderAgreement(const AgreementTable &t) {
  std::ostringstream out;
  for (const std::string &m : t.models) out << std::left << std::setw(12) << m;
  out << "Questions\n";
  for (auto it = t.cells.rbegin(); it != t.cells.rend(); ++it) {
    for (bool ok : it->first) out << std::setw(12) << (ok ? "✓" : "✗");
    out << it->second << "\n";
  }
  return out.str();
}

}  // namespace lambdaehr
