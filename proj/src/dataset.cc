#include "lambdaehr/dataset.h"

#include "json.hpp"
#include "lambdaehr/text.h"

namespace lambdaehr {

using nlohmann::json;

Example MakeExample(std::string id, std::string question,
                    std::vector<EntitySpan> entities, std::string lf_text,
                    const PredicateRegistry &registry) {
  Example e;
  e.id = std::move(id);
  e.question = std::move(question);
  e.lf_text = std::move(lf_text);
  e.input = Preprocess(e.question, std::move(entities));
  e.entities = e.input.entities;
  e.gold = StripTimeFrames(ParseLf(e.lf_text, registry));
  e.abstract_gold = AbstractLfEntities(e.gold, e.entities);
  return e;
}

std::vector<EntitySpan> EntitiesFromJson(const json &entities) {
  std::vector<EntitySpan> spans;
  for (const json &s : entities) {
    spans.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                     ParseEntityKind(s.at("kind").get<std::string>()),
                     s.at("value").get<std::string>()});
  }
  return spans;
}

namespace {

Example FromJson(const json &j, const PredicateRegistry &registry) {
  std::vector<EntitySpan> spans;
  if (j.contains("entities")) spans = EntitiesFromJson(j.at("entities"));
  return MakeExample(j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                     std::move(spans), j.at("lf").get<std::string>(), registry);
}

}  // namespace

Dataset ReadDataset(std::string_view jsonl, const PredicateRegistry &registry,
                    const std::string &source) {
  Dataset out;
  std::size_t line_no = 0;
  for (const std::string &line : Split(jsonl, '\n')) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      if (j.value("strategy", std::string()) == "concat") continue;
      out.push_back(FromJson(j, registry));
    } catch (const json::exception &e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError &e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Dataset LoadDataset(const std::string &path, const PredicateRegistry &registry) {
  return ReadDataset(ReadFile(path), registry, path);
}

std::string ExampleToJson(const Example &e) {
  json ents = json::array();
  for (const EntitySpan &s : e.entities) {
    ents.push_back({{"start", s.start},
                    {"end", s.end},
                    {"kind", std::string(EntityKindName(s.kind))},
                    {"value", s.value}});
  }
  json j = {{"id", e.id}, {"question", e.question}, {"entities", ents}, {"lf", e.lf_text}};
  return j.dump();
}

std::string WriteDataset(const Dataset &data) {
  std::string out;
  for (const Example &e : data) {
    out += ExampleToJson(e);
    out += '\n';
  }
  return out;
}

void SaveDataset(const std::string &path, const Dataset &data) {
  WriteFile(path, WriteDataset(data));
}

namespace {

void Tokens(const LogicalForm &lf, std::vector<std::string> *out) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      out->push_back("λ");
      out->push_back(lf.text());
      out->push_back(".");
      Tokens(lf.body(), out);
      return;
    case NodeKind::kAnd:
      for (std::size_t i = 0; i < lf.children().size(); ++i) {
        if (i > 0) out->push_back("∧");
        Tokens(lf.children()[i], out);
      }
      return;
    case NodeKind::kApply:
      out->push_back(lf.text());
      out->push_back("(");
      for (std::size_t i = 0; i < lf.children().size(); ++i) {
        if (i > 0) out->push_back(",");
        Tokens(lf.children()[i], out);
      }
      out->push_back(")");
      return;
    case NodeKind::kLiteral:
      out->push_back("'" + lf.text() + "'");
      return;
    default:
      out->push_back(lf.text());
      return;
  }
}

}  // namespace

std::vector<std::string> LfTokens(const LogicalForm &lf) {
  std::vector<std::string> out;
  Tokens(lf, &out);
  return out;
}

LogicalForm LfFromTokens(const std::vector<std::string> &tokens,
                         const PredicateRegistry &registry, const ParseOptions &options) {
  return ParseLf(Join(tokens, " "), registry, options);
}

}  // namespace lambdaehr
