#ifndef LAMBDAEHR_DATASET_H_
#define LAMBDAEHR_DATASET_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lambdaehr/logical_form.h"
#include "lambdaehr/preprocess.h"
#include "lambdaehr/registry.h"

namespace lambdaehr {

// One dataset record, plus everything the parsers derive from it.
struct Example {
  std::string id;
  std::string question;
  std::vector<EntitySpan> entities;
  std::string lf_text;  // as stored in the file

  LogicalForm gold = LogicalForm::Placeholder();  // parsed, time frames stripped
  AbstractedQuestion input;   // PP tokens and ordered entities
  LogicalForm abstract_gold = LogicalForm::Placeholder();  // gold with entity arguments abstracted
};

using Dataset = std::vector<Example>;

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};

// Builds the derived fields. Throws the parse, validation and preprocess errors.
Example MakeExample(std::string id, std::string question,
                    std::vector<EntitySpan> entities, std::string lf_text,
                    const PredicateRegistry &registry);

// JSON Lines, one record per line:
//   {"id": ..., "question": ..., "entities": [{"start","end","kind","value"}], "lf": ...}
// Concatenated sequence pairs ("strategy": "concat") are skipped. Errors
// name the offending line.
Dataset ReadDataset(std::string_view jsonl, const PredicateRegistry &registry,
                    const std::string &source = "<input>");
// [{"start","end","kind","value"}, ...]
std::vector<EntitySpan> EntitiesFromJson(const nlohmann::json &entities);

Dataset LoadDataset(const std::string &path, const PredicateRegistry &registry);
std::string ExampleToJson(const Example &e);
std::string WriteDataset(const Dataset &data);
void SaveDataset(const std::string &path, const Dataset &data);

// Token view of a logical form for sequence decoders:
//   count ( λ x . has_concept ( x , concept ) ∧ time_within ( x , 'temporal_ref' ) )
std::vector<std::string> LfTokens(const LogicalForm &lf);
LogicalForm LfFromTokens(const std::vector<std::string> &tokens,
                         const PredicateRegistry &registry,
                         const ParseOptions &options = {});

}  // namespace lambdaehr

#endif  // LAMBDAEHR_DATASET_H_
