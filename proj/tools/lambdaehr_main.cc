#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lambdaehr/dataset.h"
#include "lambdaehr/eval.h"
#include "lambdaehr/forge.h"
#include "lambdaehr/recipe.h"
#include "lambdaehr/text.h"

#ifndef LAMBDAEHR_VERSION
#define LAMBDAEHR_VERSION "0.0.0"
#endif

namespace lambdaehr {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Collected while a command runs and written next to each artifact.
struct Manifest {
  std::vector<std::string> argv;
  std::string command;
  json config;
  json seeds = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Clock::time_point start = Clock::now();

  void Write() const {
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    json j = {{"argv", argv},
              {"cwd", std::filesystem::current_path().string()},
              {"command", command},
              {"config", config},
              {"seeds", seeds},
              {"inputs", inputs},
              {"outputs", outputs},
              {"version", LAMBDAEHR_VERSION},
              {"duration_seconds", secs}};
    for (const std::string &out : outputs) WriteFile(out + ".manifest.json", j.dump(2) + "\n");
  }
};

std::string DefaultRegistryPath() {
#ifdef LAMBDAEHR_DATA_DIR
  return std::string(LAMBDAEHR_DATA_DIR) + "/clinical_registry.tsv";
#else
  return "";
#endif
}

PredicateRegistry LoadRegistry(const std::string &flag) {
  if (!flag.empty()) return PredicateRegistry::LoadFile(flag);
  const char *env = std::getenv("LAMBDAEHR_REGISTRY");
  if (env != nullptr && *env != '\0') return PredicateRegistry::FromEnvironment();
  std::string path = DefaultRegistryPath();
  if (!path.empty() && std::filesystem::exists(path)) return PredicateRegistry::LoadFile(path);
  return PredicateRegistry::Default();
}

json ParseJsonFile(const std::string &path) {
  try {
    return json::parse(ReadFile(path));
  } catch (const json::exception &e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string Stem(const std::string &path) { return std::filesystem::path(path).stem().string(); }

// Reads a recipe file (or a bare mode), applying --mode and --seed.
Recipe MakeRecipe(const std::string &config, const std::string &mode,
                  const std::optional<std::uint64_t> &seed, const PredicateRegistry &registry) {
  json j = json::object();
  std::string base = ".";
  if (!config.empty()) {
    j = ParseJsonFile(config);
    base = std::filesystem::path(config).parent_path().string();
    if (base.empty()) base = ".";
  }
  if (!mode.empty()) j["mode"] = mode;
  Recipe r = Recipe::FromJson(j, registry, base);
  if (seed) r.SetSeed(*seed);
  return r;
}

struct Options {
  std::string registry;
  std::optional<std::uint64_t> seed;

  // gen-data, preprocess, augment
  std::string input;
  std::string output;
  std::string strategy = "entity";
  std::size_t count = 0;
  std::string spec;
  std::string phrases;

  // train, eval
  std::string mode;
  std::string config;
  std::string train;
  std::string dev;
  std::string data;
  std::string model;
  std::string name;
  std::string predictions;
  std::size_t k = 10;
  std::size_t jobs = 1;

  // parse
  std::string question;
  std::string entities = "[]";

  std::vector<std::string> reports;
};

int GenData(const Options &o, Manifest &m) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  CorpusSpec spec = LoadCorpusSpec(o.input, reg);
  if (o.seed) spec.seed = *o.seed;
  Dataset data = GenerateCorpus(spec, reg);
  SaveDataset(o.output, data);
  m.seeds["corpus"] = spec.seed;
  m.inputs = {o.input};
  m.outputs = {o.output};
  m.Write();
  std::cout << StatsToJson(AuditStats(data)) << "\n";
  return kOk;
}

int PreprocessCmd(const Options &o, Manifest &m) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  Dataset data = LoadDataset(o.input, reg);
  std::string out;
  for (const Example &e : data) {
    json j = json::parse(ExampleToJson(e));
    j["substituted"] = e.input.substituted;
    j["tokens"] = e.input.tokens;
    j["abstract_lf"] = PrintLf(e.abstract_gold);
    out += j.dump() + "\n";
  }
  WriteFile(o.output, out);
  m.inputs = {o.input};
  m.outputs = {o.output};
  m.Write();
  return kOk;
}

int Augment(const Options &o, Manifest &m) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  Dataset data = LoadDataset(o.input, reg);
  Strategy s = ParseStrategy(o.strategy);
  std::size_t count = o.count ? o.count : (s == Strategy::kConcat ? 300 : 1800);
  std::uint64_t seed = o.seed.value_or(1);
  PhraseTable table;
  if (!o.spec.empty()) {
    table = DerivePhraseTable(LoadCorpusSpec(o.spec, reg));
    m.inputs.push_back(o.spec);
  } else if (!o.phrases.empty()) {
    table = ParsePhraseTable(ReadFile(o.phrases));
    m.inputs.push_back(o.phrases);
  }
  Augmentation a = Recombine(data, s, count, seed, reg, table);
  WriteFile(o.output, WriteAugmentation(a));
  m.config = {{"strategy", std::string(StrategyName(s))}, {"count", count}};
  m.seeds["augment"] = seed;
  m.inputs.insert(m.inputs.begin(), o.input);
  m.outputs = {o.output};
  m.Write();
  return kOk;
}

int Train(const Options &o, Manifest &m) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  Recipe recipe = MakeRecipe(o.config, o.mode, o.seed, reg);
  Dataset train = LoadDataset(o.train, reg);
  Dataset dev = o.dev.empty() ? train : LoadDataset(o.dev, reg);
  TrainingLog log;
  std::unique_ptr<Parser> parser = recipe.Train(train, dev, reg, &log);
  parser->Save(o.output);
  m.config = recipe.source;
  m.seeds["model"] = recipe.seed;
  m.inputs = {o.train};
  if (!o.dev.empty()) m.inputs.push_back(o.dev);
  if (!o.config.empty()) m.inputs.push_back(o.config);
  m.outputs = {o.output};
  m.Write();
  if (!log.epoch_loss.empty()) {
    std::cerr << "epochs " << log.epoch_loss.size() << ", best dev " << log.best_dev
              << " at epoch " << log.best_epoch << "\n";
  }
  return kOk;
}

int Parse(const Options &o) {
  std::unique_ptr<Parser> parser = LoadParser(o.model);
  json ents;
  try {
    ents = json::parse(o.entities);
  } catch (const json::exception &e) {
    throw DataError(std::string("--entities: ") + e.what());
  }
  std::vector<EntitySpan> spans;
  try {
    spans = EntitiesFromJson(ents);
  } catch (const json::exception &e) {
    throw DataError(std::string("--entities: ") + e.what());
  }
  AbstractedQuestion q = Preprocess(o.question, std::move(spans));
  ParseResult detail;
  std::optional<LogicalForm> lf = ParseQuestion(*parser, q, &detail);
  if (!lf) {
    std::cerr << "no parse: " << (detail.error.empty() ? "unknown" : detail.error) << "\n";
    return kData;
  }
  std::cout << PrintLf(*lf) << "\n";
  return kOk;
}

void EmitReport(const EvalReport &r, const Options &o, Manifest &m) {
  std::cout << RenderReport(r);
  if (!o.output.empty()) {
    WriteFile(o.output, ReportToJson(r).dump(2) + "\n");
    m.outputs.push_back(o.output);
  }
  if (!o.predictions.empty()) {
    WriteFile(o.predictions, PredictionsJsonl(r));
    m.outputs.push_back(o.predictions);
  }
  m.Write();
}

ModelFactory FactoryFor(const Recipe &recipe, const PredicateRegistry &reg) {
  return [&recipe, &reg](const Dataset &train, const Dataset &dev, std::size_t) {
    return recipe.Train(train, dev, reg);
  };
}

int EvalCv(const Options &o, Manifest &m, bool loov) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  Recipe recipe = MakeRecipe(o.config, o.mode, o.seed, reg);
  Dataset data = LoadDataset(o.data, reg);
  std::string name = o.name.empty() ? Stem(o.data) : o.name;
  EvalReport r;
  if (loov) {
    r = RunLoov(FactoryFor(recipe, reg), data, recipe.mode, name, o.jobs);
  } else {
    FoldPlan plan = SplitFolds(data.size(), o.k, recipe.seed);
    r = RunCv(FactoryFor(recipe, reg), data, plan, recipe.mode, name, o.jobs);
    m.seeds["folds"] = recipe.seed;
  }
  m.config = recipe.source;
  m.seeds["model"] = recipe.seed;
  m.inputs = {o.data};
  if (!o.config.empty()) m.inputs.push_back(o.config);
  EmitReport(r, o, m);
  return kOk;
}

int EvalCd(const Options &o, Manifest &m) {
  PredicateRegistry reg = LoadRegistry(o.registry);
  std::unique_ptr<Parser> parser;
  std::string model_name;
  if (!o.model.empty()) {
    parser = LoadParser(o.model);
    model_name = parser->mode();
    m.inputs.push_back(o.model);
  } else {
    if (o.train.empty()) throw CLI::ValidationError("eval cd", "needs --model or --train");
    Recipe recipe = MakeRecipe(o.config, o.mode, o.seed, reg);
    Dataset train = LoadDataset(o.train, reg);
    Dataset dev = o.dev.empty() ? train : LoadDataset(o.dev, reg);
    parser = recipe.Train(train, dev, reg);
    model_name = recipe.mode;
    m.config = recipe.source;
    m.seeds["model"] = recipe.seed;
    m.inputs.push_back(o.train);
    if (!o.config.empty()) m.inputs.push_back(o.config);
  }
  Dataset target = LoadDataset(o.data, reg);
  m.inputs.push_back(o.data);
  EvalReport r =
      RunCrossDataset(*parser, target, model_name, o.name.empty() ? Stem(o.data) : o.name);
  EmitReport(r, o, m);
  return kOk;
}

int Analyze(const Options &o, Manifest &m) {
  std::vector<EvalReport> reports;
  std::string out;
  for (const std::string &path : o.reports) {
    try {
      reports.push_back(ReportFromJson(ParseJsonFile(path)));
    } catch (const json::exception &e) {
      throw DataError(path + ": " + e.what());
    }
    out += RenderReport(reports.back()) + "\n";
  }
  if (reports.size() >= 2) out += RenderAgreement(Agreement(reports));
  std::cout << out;
  if (!o.output.empty()) {
    WriteFile(o.output, out);
    m.inputs = o.reports;
    m.outputs = {o.output};
    m.Write();
  }
  return kOk;
}

int Run(const std::vector<std::string> &args);

int Replay(const std::string &path) {
  json j = ParseJsonFile(path);
  if (!j.contains("argv") || !j["argv"].is_array()) throw DataError(path + ": no argv");
  if (j.contains("cwd")) std::filesystem::current_path(j["cwd"].get<std::string>());
  return Run(j["argv"].get<std::vector<std::string>>());
}

int Run(const std::vector<std::string> &args) {
  CLI::App app{"Clinical question to logical form toolkit", "lambdaehr"};
  app.set_version_flag("--version", LAMBDAEHR_VERSION);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Options o;
  std::uint64_t seed = 0;
  std::string replay;
  auto common = [&](CLI::App *c) {
    c->add_option("--registry", o.registry, "Predicate registry file");
    c->add_option("--seed", seed, "Seed for every random choice");
  };

  CLI::App *gen = app.add_subcommand("gen-data", "Generate a corpus from a spec");
  gen->add_option("spec", o.input, "Corpus spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--output", o.output, "Output JSONL")->required();
  common(gen);

  CLI::App *pre = app.add_subcommand("preprocess", "Add preprocessed fields to a dataset");
  pre->add_option("input", o.input, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  pre->add_option("-o,--output", o.output, "Output JSONL")->required();
  common(pre);

  CLI::App *aug = app.add_subcommand("augment", "Recombine a dataset into new examples");
  aug->add_option("input", o.input, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  aug->add_option("--strategy", o.strategy, "entity, phrase or concat")
      ->check(CLI::IsMember({"entity", "phrase", "concat"}));
  aug->add_option("--count", o.count, "Items to add (default 1800, concat 300)");
  aug->add_option("--spec", o.spec, "Corpus spec to read phrase groups from");
  aug->add_option("--phrases", o.phrases, "Phrase table file");
  aug->add_option("-o,--output", o.output, "Output JSONL")->required();
  common(aug);

  CLI::App *train = app.add_subcommand("train", "Train a parser");
  train->add_option("--mode", o.mode, "direct, sketch, grammar or lexicon")
      ->check(CLI::IsMember({"direct", "sketch", "grammar", "lexicon"}));
  train->add_option("--config", o.config, "Recipe (JSON)")->check(CLI::ExistingFile);
  train->add_option("--train", o.train, "Training JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--dev", o.dev, "Dev JSONL")->check(CLI::ExistingFile);
  train->add_option("-o,--output", o.output, "Checkpoint path")->required();
  common(train);

  CLI::App *parse = app.add_subcommand("parse", "Parse one question");
  parse->add_option("--model", o.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  parse->add_option("--question", o.question, "Question text")->required();
  parse->add_option("--entities", o.entities, "Entity spans (JSON array)");
  common(parse);

  CLI::App *eval = app.add_subcommand("eval", "Evaluate a parser");
  eval->require_subcommand(1);
  auto eval_common = [&](CLI::App *c) {
    c->add_option("--mode", o.mode, "direct, sketch, grammar or lexicon")
        ->check(CLI::IsMember({"direct", "sketch", "grammar", "lexicon"}));
    c->add_option("--config", o.config, "Recipe (JSON)")->check(CLI::ExistingFile);
    c->add_option("--data", o.data, "Evaluation JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--name", o.name, "Dataset name for the report");
    c->add_option("-o,--output", o.output, "Report JSON");
    c->add_option("--predictions", o.predictions, "Predictions JSONL");
    common(c);
  };
  CLI::App *cv = eval->add_subcommand("cv", "k-fold cross-validation");
  eval_common(cv);
  cv->add_option("--k", o.k, "Folds")->check(CLI::PositiveNumber);
  cv->add_option("--jobs", o.jobs, "Folds trained in parallel")->check(CLI::PositiveNumber);
  CLI::App *loov = eval->add_subcommand("loov", "Leave-one-out");
  eval_common(loov);
  loov->add_option("--jobs", o.jobs, "Runs trained in parallel")->check(CLI::PositiveNumber);
  CLI::App *cd = eval->add_subcommand("cd", "Cross-dataset");
  eval_common(cd);
  cd->add_option("--model", o.model, "Trained checkpoint")->check(CLI::ExistingFile);
  cd->add_option("--train", o.train, "Training JSONL (when no --model)")->check(CLI::ExistingFile);
  cd->add_option("--dev", o.dev, "Dev JSONL")->check(CLI::ExistingFile);

  CLI::App *an = app.add_subcommand("analyze", "Error analysis over reports");
  an->add_option("--reports", o.reports, "Report JSON files")->required()->check(CLI::ExistingFile);
  an->add_option("-o,--output", o.output, "Text output");
  common(an);

  CLI::App *rep = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rep->add_option("manifest", replay, "Manifest JSON")->required()->check(CLI::ExistingFile);

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? kOk : kUsage;
  }
  for (CLI::App *c : {gen, aug, train, parse, cv, loov, cd, an, pre}) {
    if (c->parsed() && c->count("--seed")) o.seed = seed;
  }

  Manifest m;
  m.argv = args;
  for (std::size_t i = 1; i < args.size() && args[i].rfind("-", 0) != 0; ++i) {
    if (i > 1) m.command += " ";
    m.command += args[i];
    if (args[i] != "eval") break;
  }

  try {
    if (*gen) return GenData(o, m);
    if (*pre) return PreprocessCmd(o, m);
    if (*aug) return Augment(o, m);
    if (*train) return Train(o, m);
    if (*parse) return Parse(o);
    if (*cv) return EvalCv(o, m, false);
    if (*loov) return EvalCv(o, m, true);
    if (*cd) return EvalCd(o, m);
    if (*an) return Analyze(o, m);
    if (*rep) return Replay(replay);
  } catch (const CLI::ParseError &e) {
    std::cerr << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const FoldFailure &e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.data_error() ? kData : kInternal;
  } catch (const DataError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace
}  // namespace lambdaehr

int main(int argc, char **argv) {
  return lambdaehr::Run(std::vector<std::string>(argv, argv + argc));
}
