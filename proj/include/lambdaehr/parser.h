#ifndef LAMBDAEHR_PARSER_H_
#define LAMBDAEHR_PARSER_H_

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lambdaehr/logical_form.h"
#include "lambdaehr/preprocess.h"
#include "lambdaehr/registry.h"

namespace lambdaehr {

// Versioned binary container shared by every trained model:
//   "LEHRCKPT" | u32 version | u64 header bytes | JSON header | f64 arrays
// The header lists each array's name and shape, in storage order.
struct NamedArray {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // column-major
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  nlohmann::json header;
  std::vector<NamedArray> arrays;

  const NamedArray &Array(const std::string &name) const;
};

std::string SerializeCheckpoint(const Checkpoint &ckpt);
Checkpoint DeserializeCheckpoint(std::string_view bytes, const std::string &source);
void SaveCheckpoint(const std::string &path, const Checkpoint &ckpt);
Checkpoint LoadCheckpoint(const std::string &path);

struct ParseResult {
  // The abstract logical form (entity arguments are placeholders), absent
  // when decoding produced nothing usable.
  std::optional<LogicalForm> lf;
  std::string raw;  // decoder output before parsing, for diagnostics
  double score = 0;
  std::string error;  // "Unparseable", "NoCandidates", ...
};

// A trained parser of any family.
class Parser {
 public:
  virtual ~Parser() = default;
  virtual std::string mode() const = 0;
  virtual ParseResult Parse(const AbstractedQuestion &q) const = 0;
  virtual void Save(const std::string &path) const = 0;
  virtual const PredicateRegistry &registry() const = 0;

  // Predicates and source tokens seen in training; empty when unknown.
  std::set<std::string> training_predicates;
  std::set<std::string> source_vocabulary;
};

// A registry serialized with PredicateRegistry::ToText.
PredicateRegistry RegistryFromText(const std::string &text);

// Parses and re-attaches the question's entities.
std::optional<LogicalForm> ParseQuestion(const Parser &parser, const AbstractedQuestion &q,
                                         ParseResult *detail = nullptr);

// Dispatches on the checkpoint's "mode" header field.
std::unique_ptr<Parser> LoadParser(const std::string &path);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_PARSER_H_
