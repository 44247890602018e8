#ifndef LAMBDAEHR_LOGICAL_FORM_H_
#define LAMBDAEHR_LOGICAL_FORM_H_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lambdaehr/registry.h"

namespace lambdaehr {

enum class NodeKind {
  kLambda,
  kAnd,
  kApply,
  kVar,
  kConceptRef,
  kLiteral,
  kTimeFrame,
  kPlaceholder,
};

std::string_view NodeKindName(NodeKind kind);

// Immutable λ-calculus logical form. Copies share structure.
//
//   Lambda       text = bound variable, children = {body}
//   And          children = conjuncts (at least two, never nested Ands)
//   Apply        text = predicate name, children = arguments
//   Var          text = variable name
//   ConceptRef   text = concept identifier (e.g. a CUI)
//   Literal      text = literal contents without the surrounding quotes
//   TimeFrame    text = implicit time frame token (e.g. visit)
//   Placeholder  the sketch mask '@'
class LogicalForm {
 public:
  static LogicalForm Lambda(std::string var, LogicalForm body);
  // Flattens nested conjunctions; a single conjunct is returned unchanged.
  static LogicalForm And(std::vector<LogicalForm> conjuncts);
  static LogicalForm Apply(std::string predicate, std::vector<LogicalForm> args);
  static LogicalForm Var(std::string name);
  static LogicalForm ConceptRef(std::string id);
  static LogicalForm Literal(std::string value);
  static LogicalForm TimeFrame(std::string token);
  static LogicalForm Placeholder();

  NodeKind kind() const { return node_->kind; }
  const std::string &text() const { return node_->text; }
  const std::vector<LogicalForm> &children() const { return node_->children; }

  // Lambda only.
  const LogicalForm &body() const { return node_->children.front(); }

  bool Is(NodeKind k) const { return node_->kind == k; }

  // Structural equality.
  friend bool operator==(const LogicalForm &a, const LogicalForm &b);
  friend bool operator!=(const LogicalForm &a, const LogicalForm &b) {
    return !(a == b);
  }

 private:
  struct Node {
    NodeKind kind;
    std::string text;
    std::vector<LogicalForm> children;
  };
  explicit LogicalForm(std::shared_ptr<const Node> node)
      : node_(std::move(node)) {}
  static LogicalForm Make(NodeKind kind, std::string text,
                          std::vector<LogicalForm> children);

  std::shared_ptr<const Node> node_;
};

struct ParseOptions {
  // Accept '@' where a concept, literal or time frame argument belongs.
  bool allow_placeholders = false;
};

// Parses and validates a logical form against the registry. Accepts 'λ' or
// the ASCII spelling 'lambda' for the quantifier and is insensitive to
// whitespace between tokens. Throws SyntaxError, UnknownPredicate,
// ArityMismatch, UnboundVariable or TypeMismatch.
LogicalForm ParseLf(std::string_view text, const PredicateRegistry &registry,
                    const ParseOptions &options = {});

// Checks every LogicalForm invariant; throws the same errors as ParseLf.
void ValidateLf(const LogicalForm &lf, const PredicateRegistry &registry,
                const ParseOptions &options = {});

// Canonical single-line rendering, e.g.
//   sum(λx.has_concept(x, C0042036) ∧ time_within(x, 'last night'))
std::string PrintLf(const LogicalForm &lf);

// Canonical-string equality; conjunct order is significant.
bool ExactMatch(const LogicalForm &a, const LogicalForm &b);

// Analysis-only relaxation of ExactMatch that treats ∧ as commutative.
bool MatchModAnd(const LogicalForm &a, const LogicalForm &b);

// Drops every trailing TimeFrame argument.
LogicalForm StripTimeFrames(const LogicalForm &lf);

// The outermost predicate name, or "λx" for a lambda root (the bound variable
// name is substituted). With `grouped`, names starting with "is_" map to
// "is_*".
std::string OutermostLabel(const LogicalForm &lf, bool grouped = false);

// Number of predicate applications (the λ quantifier is not counted).
std::size_t CountPredicates(const LogicalForm &lf);

// Every predicate name in the form, in pre-order, with repeats.
void CollectPredicates(const LogicalForm &lf, std::vector<std::string> *out);

}  // namespace lambdaehr

#endif  // LAMBDAEHR_LOGICAL_FORM_H_
