#ifndef LAMBDAEHR_GRAMMAR_H_
#define LAMBDAEHR_GRAMMAR_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lambdaehr/errors.h"
#include "lambdaehr/logical_form.h"
#include "lambdaehr/registry.h"

namespace lambdaehr {

class NotDerivable : public DataError {
 public:
  explicit NotDerivable(const std::string &node)
      : DataError("no grammar derivation for " + node) {}
};

class IllegalAction : public DataError {
 public:
  IllegalAction(std::size_t index, const std::string &state)
      : DataError("illegal action at index " + std::to_string(index) + " (" +
                  state + ")"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class IncompleteDerivation : public DataError {
 public:
  using DataError::DataError;
};

struct AsdlField {
  std::string type;
  std::string name;
  bool sequence = false;
};

struct AsdlConstructor {
  std::string name;
  std::string type;  // the composite type it builds
  std::vector<AsdlField> fields;
};

// ASDL-style grammar. Text format, one type per definition:
//
//   expr = Lambda(var name, expr* body)
//        | Apply(pred_name pred, arg* args)
//
// Continuation lines start with '|'; "--" and '#' start comments. The first
// defined type is the root. Primitive types are built in: pred_name, cui,
// literal, var, time_frame.
class AsdlGrammar {
 public:
  static AsdlGrammar Parse(std::string_view text);
  static AsdlGrammar LoadFile(const std::string &path);
  // The grammar shipped in data/lambda_ehr.asdl.
  static const AsdlGrammar &Default();

  static bool IsPrimitiveType(std::string_view type);

  const std::string &root_type() const { return root_; }
  const AsdlConstructor *Find(std::string_view constructor) const;
  // Constructors of a composite type, in definition order.
  std::vector<const AsdlConstructor *> ConstructorsOf(std::string_view type) const;
  const std::vector<AsdlConstructor> &constructors() const { return constructors_; }

  std::string ToText() const;

 private:
  std::string root_;
  std::vector<std::string> types_;
  std::vector<AsdlConstructor> constructors_;
};

struct Action {
  enum class Kind { kApplyConstr, kReduce, kGenToken };

  Kind kind = Kind::kReduce;
  std::string value;  // constructor name or token; literal tokens keep quotes

  static Action ApplyConstr(std::string name) { return {Kind::kApplyConstr, std::move(name)}; }
  static Action Reduce() { return {Kind::kReduce, {}}; }
  static Action GenToken(std::string token) { return {Kind::kGenToken, std::move(token)}; }

  // "APPLY <name>" | "REDUCE" | "GEN <token>".
  std::string ToString() const;
  static Action FromString(std::string_view line);

  bool operator==(const Action &) const = default;
  auto operator<=>(const Action &) const = default;
};

std::string SerializeActions(const std::vector<Action> &actions);
std::vector<Action> ParseActions(std::string_view text);

struct GrammarAst {
  std::string constructor;  // empty for a primitive token
  std::string token;
  std::vector<std::vector<GrammarAst>> fields;

  bool operator==(const GrammarAst &) const = default;
};

// What may come next in a derivation: an explicit action list, plus an open
// primitive type when any well-formed token of that type may be generated.
struct ValidActions {
  std::vector<Action> closed;
  std::string open_type;

  bool empty() const { return closed.empty() && open_type.empty(); }
  bool Allows(const Action &a) const;
};

// Whether `token` is a well-formed value of an open primitive type.
bool WellFormedToken(std::string_view type, std::string_view token);

class TransitionSystem;

// A partial derivation: the actions taken so far and the frontier stack.
// Cheap to copy, so beam search can fork it.
class Derivation {
 public:
  explicit Derivation(const TransitionSystem *system);

  // Throws IllegalAction when `a` is not in Next().
  void Apply(const Action &a);
  ValidActions Next() const;
  // Whether Apply(a) would succeed, given v == Next().
  bool Accepts(const Action &a, const ValidActions &v) const;

  bool complete() const { return started_ && stack_.empty(); }
  const std::vector<Action> &actions() const { return actions_; }

  // "<root>" before the first action, otherwise "<Constructor>.<field>" of
  // the open field, or "" when complete.
  std::string FrontierField() const;
  std::string FrontierType() const;

 private:
  struct Frame {
    const AsdlConstructor *constructor;
    std::size_t field = 0;
    std::size_t filled = 0;
    std::string label;  // Lambda variable or Apply predicate
  };

  void Advance();
  bool VarBound(std::string_view name) const;
  std::vector<std::string> BoundVars() const;
  ValidActions ArgActions(const Frame &apply) const;
  std::string Describe() const;

  const TransitionSystem *system_;
  std::vector<Frame> stack_;
  std::vector<Action> actions_;
  bool started_ = false;
};

// The grammar together with the registry that types predicate arguments.
class TransitionSystem {
 public:
  TransitionSystem(AsdlGrammar grammar, PredicateRegistry registry);

  const AsdlGrammar &grammar() const { return grammar_; }
  const PredicateRegistry &registry() const { return registry_; }

  // Depth-first, left-to-right oracle derivation.
  std::vector<Action> LfToActions(const LogicalForm &lf) const;
  GrammarAst ActionsToAst(const std::vector<Action> &actions) const;
  LogicalForm AstToLf(const GrammarAst &ast) const;
  LogicalForm ActionsToLf(const std::vector<Action> &actions) const {
    return AstToLf(ActionsToAst(actions));
  }

  // Valid next actions after replaying `prefix`.
  ValidActions ValidNextActions(const std::vector<Action> &prefix) const;

 private:
  AsdlGrammar grammar_;
  PredicateRegistry registry_;
};

// ---- sketches ----

// Masks every concept, literal and time frame argument with '@' and renames
// bound variables to x.
LogicalForm Coarsen(const LogicalForm &lf);

// The masked arguments of `lf`, left to right: concept identifiers bare,
// literals quoted, time frames bare.
std::vector<std::string> FineTokens(const LogicalForm &lf);

std::size_t CountPlaceholders(const LogicalForm &lf);

// What may fill each '@' of a sketch, left to right.
enum class SlotKind { kCui, kLiteral, kTimeFrame, kAny };
std::string_view SlotKindName(SlotKind k);
std::vector<SlotKind> PlaceholderSlots(const LogicalForm &sketch,
                                       const PredicateRegistry &registry);

// Whether a fine token can fill a slot of this kind.
bool FitsSlot(std::string_view token, SlotKind kind,
              const PredicateRegistry &registry);

// Throws ArityMismatch("sketch", got, want) on a count mismatch and
// TypeMismatch(position) when a token does not fit its slot.
LogicalForm FillSketch(const LogicalForm &sketch,
                       const std::vector<std::string> &details,
                       const PredicateRegistry &registry);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_GRAMMAR_H_
