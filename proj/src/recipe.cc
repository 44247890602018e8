#include "lambdaehr/recipe.h"

#include <filesystem>

#include "lambdaehr/text.h"

namespace lambdaehr {

namespace {

std::string Resolve(const std::string &base, const std::string &path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

Recipe Recipe::FromJson(const nlohmann::json &j, const PredicateRegistry &registry,
                        const std::string &base_dir) {
  try {
    Recipe r;
    r.source = j;
    r.mode = j.value("mode", std::string("grammar"));
    if (r.mode == "lexicon") {
      const nlohmann::json ranker = j.value("ranker", nlohmann::json::object());
      r.ranker.epochs = ranker.value("epochs", r.ranker.epochs);
      r.ranker.learning_rate = ranker.value("learning_rate", r.ranker.learning_rate);
      r.ranker.l2 = ranker.value("l2", r.ranker.l2);
      r.ranker.margin = ranker.value("margin", r.ranker.margin);
      r.ranker.depth_limit = ranker.value("depth_limit", r.ranker.depth_limit);
      if (j.contains("lexicon")) {
        r.lexicon = Lexicon::LoadFile(Resolve(base_dir, j.at("lexicon").get<std::string>()),
                                      registry);
      } else if (j.contains("spec")) {
        r.lexicon = DeriveLexicon(
            LoadCorpusSpec(Resolve(base_dir, j.at("spec").get<std::string>()), registry), registry);
      } else {
        r.lexicon = Lexicon::WithDefaults();
      }
    } else {
      nlohmann::json neural = j;
      for (const char *k : {"ranker", "lexicon", "spec", "augment"}) neural.erase(k);
      if (neural.contains("embeddings")) {
        neural["embeddings"] = Resolve(base_dir, neural["embeddings"].get<std::string>());
      }
      r.neural = TrainingConfig::FromJson(neural);
    }
    const nlohmann::json aug = j.value("augment", nlohmann::json::object());
    r.entity_count = aug.value("entity", std::size_t{0});
    r.phrase_count = aug.value("phrase", std::size_t{0});
    r.concat_count = aug.value("concat", std::size_t{0});
    if (aug.contains("spec")) {
      r.phrases = DerivePhraseTable(
          LoadCorpusSpec(Resolve(base_dir, aug.at("spec").get<std::string>()), registry));
    } else if (aug.contains("phrases")) {
      r.phrases = ParsePhraseTable(ReadFile(Resolve(base_dir, aug.at("phrases").get<std::string>())));
    }
    r.SetSeed(j.value("seed", std::uint64_t{1}));
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("recipe: ") + e.what());
  }
}

Recipe Recipe::LoadFile(const std::string &path, const PredicateRegistry &registry) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception &e) {
    throw DataError(path + ": " + e.what());
  }
  return FromJson(j, registry, std::filesystem::path(path).parent_path().string());
}

void Recipe::SetSeed(std::uint64_t s) {
  seed = s;
  neural.seed = s;
  ranker.seed = s;
  source["seed"] = s;
}

std::unique_ptr<Parser> Recipe::Train(const Dataset &train, const Dataset &dev,
                                      const PredicateRegistry &registry, TrainingLog *log) const {
  Dataset data = train;
  std::vector<SequencePair> pairs;
  if (entity_count) {
    Augmentation a = Recombine(train, Strategy::kEntity, entity_count, seed, registry);
    data.insert(data.end(), a.examples.begin(), a.examples.end());
  }
  if (phrase_count) {
    Augmentation a = Recombine(train, Strategy::kPhrase, phrase_count, seed, registry, phrases);
    data.insert(data.end(), a.examples.begin(), a.examples.end());
  }
  if (concat_count) {
    pairs = Recombine(train, Strategy::kConcat, concat_count, seed, registry).pairs;
  }
  if (mode == "lexicon") {
    Lexicon lex = lexicon ? *lexicon : Lexicon::WithDefaults();
    RankerResult rr = TrainRanker(data, lex, registry, ranker);
    auto p = std::make_unique<LexiconParser>(registry, lex, rr.weights, ranker.depth_limit);
    for (const Example &e : train) {
      std::vector<std::string> preds;
      CollectPredicates(e.gold, &preds);
      p->training_predicates.insert(preds.begin(), preds.end());
      p->source_vocabulary.insert(e.input.tokens.begin(), e.input.tokens.end());
    }
    return p;
  }
  TrainingConfig cfg = neural;
  cfg.mode = ParseDecodeMode(mode);
  return NeuralParser::Train(data, dev, cfg, registry, pairs, log);
}

}  // namespace lambdaehr
