#ifndef LAMBDAEHR_RECIPE_H_
#define LAMBDAEHR_RECIPE_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "lambdaehr/dataset.h"
#include "lambdaehr/forge.h"
#include "lambdaehr/lexicon.h"
#include "lambdaehr/neural.h"

namespace lambdaehr {

// Everything needed to train one parser from a training set. JSON form:
//
//   {"mode": "grammar", "hidden": 32, ...,           neural settings
//    "ranker": {"epochs": 30, ...},                   lexicon mode
//    "lexicon": "file.tsv" | "spec": "corpus.json",   lexicon source
//    "augment": {"entity": 0, "phrase": 0, "concat": 0, "spec": "corpus.json"}}
//
// Relative paths resolve against `base_dir`. Augmentation recombines each
// training set it is given, never the dev or test data.
struct Recipe {
  std::string mode = "grammar";
  TrainingConfig neural;
  RankerOptions ranker;
  std::optional<Lexicon> lexicon;
  std::size_t entity_count = 0;
  std::size_t phrase_count = 0;
  std::size_t concat_count = 0;
  PhraseTable phrases;
  std::uint64_t seed = 1;
  nlohmann::json source;  // the resolved config, for manifests

  static Recipe FromJson(const nlohmann::json &j, const PredicateRegistry &registry,
                         const std::string &base_dir = ".");
  static Recipe LoadFile(const std::string &path, const PredicateRegistry &registry);
  // Overrides every seed the recipe uses.
  void SetSeed(std::uint64_t s);

  std::unique_ptr<Parser> Train(const Dataset &train, const Dataset &dev,
                                const PredicateRegistry &registry,
                                TrainingLog *log = nullptr) const;
};

}  // namespace lambdaehr

#endif  // LAMBDAEHR_RECIPE_H_
