#ifndef LAMBDAEHR_REGISTRY_H_
#define LAMBDAEHR_REGISTRY_H_

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lambdaehr {

// What a predicate returns. Only `set` results may be wrapped by further
// set-consuming operators.
enum class ResultCategory { kSet, kScalar, kBoolean, kAttribute };

// Kind of a positional argument.
enum class ArgKind {
  kVar,      // bound lambda variable
  kCui,      // concept identifier
  kLiteral,  // quoted string
  kForm,     // nested lambda or predicate application
  kAny,
};

std::string_view ResultCategoryName(ResultCategory c);
ResultCategory ParseResultCategory(std::string_view s);
std::string_view ArgKindName(ArgKind k);
ArgKind ParseArgKind(std::string_view s);

struct PredicateSignature {
  std::string name;
  // Argument kinds, not counting an optional trailing time frame. The arity
  // is arg_kinds.size().
  std::vector<ArgKind> arg_kinds;
  bool allows_time_frame = false;
  ResultCategory category = ResultCategory::kBoolean;

  std::size_t arity() const { return arg_kinds.size(); }
  bool operator==(const PredicateSignature &) const = default;
};

// Name -> signature map for the clinical predicates plus the set of tokens
// that count as implicit time frames. Immutable once built.
class PredicateRegistry {
 public:
  // The sixteen predicates every registry carries.
  static PredicateRegistry Default();

  // Default() extended with the entries of a registry file, one predicate per
  // line: name<TAB>arity<TAB>allows_time_frame(0|1)<TAB>result_category, with
  // an optional fifth column of comma-separated argument kinds. Blank lines
  // and lines starting with '#' are skipped.
  static PredicateRegistry LoadFile(const std::string &path);
  static PredicateRegistry Load(std::istream &in, const std::string &source);

  // Default() plus the file named by LAMBDAEHR_REGISTRY, when set.
  static PredicateRegistry FromEnvironment();

  // Adds or replaces an entry. Throws DataError on arity 0 or a bad name.
  void Add(PredicateSignature sig);
  void AddTimeFrameToken(std::string token);

  const PredicateSignature *Find(std::string_view name) const;
  bool Contains(std::string_view name) const { return Find(name) != nullptr; }
  bool IsTimeFrameToken(std::string_view token) const;

  std::vector<std::string> Names() const;
  const std::set<std::string, std::less<>> &time_frame_tokens() const {
    return time_frames_;
  }
  std::size_t size() const { return predicates_.size(); }

  // Serialized in the registry-file format (with the kinds column).
  std::string ToText() const;

 private:
  std::map<std::string, PredicateSignature, std::less<>> predicates_;
  std::set<std::string, std::less<>> time_frames_;
};

// Names of the sixteen built-in predicates.
const std::vector<std::string> &BuiltinPredicateNames();

}  // namespace lambdaehr

#endif  // LAMBDAEHR_REGISTRY_H_
