#include "lambdaehr/registry.h"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lambdaehr/errors.h"
#include "lambdaehr/text.h"

namespace lambdaehr {

std::string_view ResultCategoryName(ResultCategory c) {
  switch (c) {
    case ResultCategory::kSet: return "set";
    case ResultCategory::kScalar: return "scalar";
    case ResultCategory::kBoolean: return "boolean";
    case ResultCategory::kAttribute: return "attribute";
  }
  return "?";
}

ResultCategory ParseResultCategory(std::string_view s) {
  if (s == "set") return ResultCategory::kSet;
  if (s == "scalar") return ResultCategory::kScalar;
  if (s == "boolean") return ResultCategory::kBoolean;
  if (s == "attribute") return ResultCategory::kAttribute;
  throw DataError("unknown result category: " + std::string(s));
}

std::string_view ArgKindName(ArgKind k) {
  switch (k) {
    case ArgKind::kVar: return "var";
    case ArgKind::kCui: return "cui";
    case ArgKind::kLiteral: return "literal";
    case ArgKind::kForm: return "form";
    case ArgKind::kAny: return "any";
  }
  return "?";
}

ArgKind ParseArgKind(std::string_view s) {
  if (s == "var") return ArgKind::kVar;
  if (s == "cui") return ArgKind::kCui;
  if (s == "literal") return ArgKind::kLiteral;
  if (s == "form") return ArgKind::kForm;
  if (s == "any") return ArgKind::kAny;
  throw DataError("unknown argument kind: " + std::string(s));
}

namespace {

PredicateSignature Sig(std::string name, std::vector<ArgKind> kinds,
                       bool time_frame, ResultCategory category) {
  return PredicateSignature{std::move(name), std::move(kinds), time_frame,
                            category};
}

}  // namespace

const std::vector<std::string> &BuiltinPredicateNames() {
  static const std::vector<std::string> names = {
      "has_concept", "time_within", "less_than",   "sum",
      "count",       "latest",      "earliest",    "delta",
      "is_negative", "is_positive", "is_healed",   "is_decreasing",
      "reason",      "location",    "time",        "dose"};
  return names;
}

PredicateRegistry PredicateRegistry::Default() {
  using K = ArgKind;
  using C = ResultCategory;
  PredicateRegistry r;
  r.Add(Sig("has_concept", {K::kVar, K::kCui}, true, C::kBoolean));
  r.Add(Sig("time_within", {K::kVar, K::kLiteral}, false, C::kBoolean));
  r.Add(Sig("less_than", {K::kVar, K::kLiteral}, false, C::kBoolean));
  r.Add(Sig("is_healed", {K::kVar}, false, C::kBoolean));
  r.Add(Sig("sum", {K::kForm}, false, C::kScalar));
  r.Add(Sig("count", {K::kForm}, false, C::kScalar));
  r.Add(Sig("delta", {K::kForm}, false, C::kScalar));
  r.Add(Sig("latest", {K::kForm}, false, C::kSet));
  r.Add(Sig("earliest", {K::kForm}, false, C::kSet));
  r.Add(Sig("is_negative", {K::kForm}, false, C::kBoolean));
  r.Add(Sig("is_positive", {K::kForm}, false, C::kBoolean));
  r.Add(Sig("is_decreasing", {K::kForm}, false, C::kBoolean));
  r.Add(Sig("reason", {K::kForm}, false, C::kAttribute));
  r.Add(Sig("location", {K::kForm}, false, C::kAttribute));
  r.Add(Sig("time", {K::kForm}, false, C::kAttribute));
  r.Add(Sig("dose", {K::kForm}, false, C::kAttribute));
  r.AddTimeFrameToken("visit");
  return r;
}

void PredicateRegistry::Add(PredicateSignature sig) {
  if (!IsIdentifier(sig.name)) {
    throw DataError("invalid predicate name: '" + sig.name + "'");
  }
  if (sig.arg_kinds.empty()) {
    throw DataError("predicate " + sig.name + " must have arity >= 1");
  }
  std::string name = sig.name;
  predicates_[name] = std::move(sig);
}

void PredicateRegistry::AddTimeFrameToken(std::string token) {
  if (!IsIdentifier(token)) {
    throw DataError("invalid time frame token: '" + token + "'");
  }
  time_frames_.insert(std::move(token));
}

const PredicateSignature *PredicateRegistry::Find(std::string_view name) const {
  auto it = predicates_.find(name);
  return it == predicates_.end() ? nullptr : &it->second;
}

bool PredicateRegistry::IsTimeFrameToken(std::string_view token) const {
  return time_frames_.find(token) != time_frames_.end();
}

std::vector<std::string> PredicateRegistry::Names() const {
  std::vector<std::string> names;
  names.reserve(predicates_.size());
  for (const auto &[name, sig] : predicates_) names.push_back(name);
  return names;
}

PredicateRegistry PredicateRegistry::Load(std::istream &in,
                                          const std::string &source) {
  PredicateRegistry r = Default();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    std::vector<std::string> cols = Split(line, '\t');
    auto where = [&] { return source + ":" + std::to_string(line_no); };
    if (cols.size() != 4 && cols.size() != 5) {
      throw DataError(where() + ": expected 4 or 5 tab-separated columns");
    }
    PredicateSignature sig;
    sig.name = std::string(Trim(cols[0]));
    char *end = nullptr;
    long arity = std::strtol(cols[1].c_str(), &end, 10);
    if (end == cols[1].c_str() || *end != '\0' || arity < 1) {
      throw DataError(where() + ": arity must be an integer >= 1");
    }
    std::string_view tf = Trim(cols[2]);
    if (tf != "0" && tf != "1") {
      throw DataError(where() + ": allows_time_frame must be 0 or 1");
    }
    sig.allows_time_frame = tf == "1";
    sig.category = ParseResultCategory(Trim(cols[3]));
    if (cols.size() == 5) {
      for (const std::string &k : Split(std::string(Trim(cols[4])), ',')) {
        sig.arg_kinds.push_back(ParseArgKind(Trim(k)));
      }
      if (sig.arg_kinds.size() != static_cast<std::size_t>(arity)) {
        throw DataError(where() + ": kinds column does not match arity");
      }
    } else {
      sig.arg_kinds.assign(static_cast<std::size_t>(arity), ArgKind::kAny);
    }
    r.Add(std::move(sig));
  }
  return r;
}

PredicateRegistry PredicateRegistry::LoadFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open registry file: " + path);
  return Load(in, path);
}

PredicateRegistry PredicateRegistry::FromEnvironment() {
  const char *path = std::getenv("LAMBDAEHR_REGISTRY");
  if (path == nullptr || *path == '\0') return Default();
  return LoadFile(path);
}

std::string PredicateRegistry::ToText() const {
  std::ostringstream out;
  for (const auto &[name, sig] : predicates_) {
    out << name << '\t' << sig.arity() << '\t'
        << (sig.allows_time_frame ? 1 : 0) << '\t'
        << ResultCategoryName(sig.category) << '\t';
    for (std::size_t i = 0; i < sig.arg_kinds.size(); ++i) {
      if (i) out << ',';
      out << ArgKindName(sig.arg_kinds[i]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lambdaehr
