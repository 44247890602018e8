#include "lambdaehr/grammar.h"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "lambdaehr/text.h"

namespace lambdaehr {

namespace {

constexpr std::string_view kDefaultGrammar =
    "-- λ-calculus logical forms over the clinical predicate registry.\n"
    "expr = Lambda(var name, expr* body)\n"
    "     | Apply(pred_name pred, arg* args)\n"
    "\n"
    "arg = VarArg(var name)\n"
    "    | ConceptArg(cui id)\n"
    "    | LiteralArg(literal value)\n"
    "    | TimeFrameArg(time_frame frame)\n"
    "    | FormArg(expr form)\n";

constexpr std::string_view kPrimitiveTypes[] = {"pred_name", "cui", "literal",
                                                "var", "time_frame"};

std::string StripComment(std::string_view line) {
  std::size_t cut = std::min(line.find("--"), line.find('#'));
  return std::string(line.substr(0, cut));
}

class AsdlReader {
 public:
  explicit AsdlReader(std::string_view text) : text_(text) {}

  void SkipSpace() {
    while (pos_ < text_.size() && IsSpace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool AtEnd() {
    SkipSpace();
    return pos_ >= text_.size();
  }
  bool Peek(char c) {
    SkipSpace();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  void Expect(char c) {
    if (!Peek(c)) Fail(std::string("'") + c + "'");
    ++pos_;
  }
  std::string Word() {
    SkipSpace();
    std::size_t start = pos_;
    while (pos_ < text_.size() && IsIdentChar(text_[pos_])) ++pos_;
    std::string w(text_.substr(start, pos_ - start));
    if (!IsIdentifier(w)) Fail("identifier");
    return w;
  }
  [[noreturn]] void Fail(const std::string &expected) {
    throw SyntaxError(pos_, expected + " in ASDL grammar");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

bool AsdlGrammar::IsPrimitiveType(std::string_view type) {
  return std::find(std::begin(kPrimitiveTypes), std::end(kPrimitiveTypes), type) !=
         std::end(kPrimitiveTypes);
}

AsdlGrammar AsdlGrammar::Parse(std::string_view text) {
  std::string clean;
  for (const std::string &line : Split(text, '\n')) {
    clean += StripComment(line);
    clean += '\n';
  }
  AsdlGrammar g;
  AsdlReader in(clean);
  while (!in.AtEnd()) {
    std::string type = in.Word();
    if (IsPrimitiveType(type)) in.Fail("composite type name");
    if (std::find(g.types_.begin(), g.types_.end(), type) != g.types_.end()) {
      throw DataError("ASDL type defined twice: " + type);
    }
    g.types_.push_back(type);
    in.Expect('=');
    do {
      AsdlConstructor c;
      c.name = in.Word();
      c.type = type;
      if (in.Peek('(')) {
        in.Expect('(');
        do {
          AsdlField f;
          f.type = in.Word();
          if (in.Peek('*')) {
            in.Expect('*');
            f.sequence = true;
          }
          f.name = in.Word();
          c.fields.push_back(std::move(f));
        } while (in.Peek(',') && (in.Expect(','), true));
        in.Expect(')');
      }
      if (g.Find(c.name) != nullptr) {
        throw DataError("ASDL constructor defined twice: " + c.name);
      }
      g.constructors_.push_back(std::move(c));
    } while (in.Peek('|') && (in.Expect('|'), true));
  }
  if (g.types_.empty()) throw DataError("ASDL grammar defines no types");
  g.root_ = g.types_.front();
  for (const AsdlConstructor &c : g.constructors_) {
    for (const AsdlField &f : c.fields) {
      if (!IsPrimitiveType(f.type) &&
          std::find(g.types_.begin(), g.types_.end(), f.type) == g.types_.end()) {
        throw DataError("ASDL field " + c.name + "." + f.name +
                        " has undefined type " + f.type);
      }
    }
  }
  return g;
}

AsdlGrammar AsdlGrammar::LoadFile(const std::string &path) {
  return Parse(ReadFile(path));
}

const AsdlGrammar &AsdlGrammar::Default() {
  static const AsdlGrammar g = Parse(kDefaultGrammar);
  return g;
}

const AsdlConstructor *AsdlGrammar::Find(std::string_view constructor) const {
  for (const AsdlConstructor &c : constructors_) {
    if (c.name == constructor) return &c;
  }
  return nullptr;
}

std::vector<const AsdlConstructor *> AsdlGrammar::ConstructorsOf(
    std::string_view type) const {
  std::vector<const AsdlConstructor *> out;
  for (const AsdlConstructor &c : constructors_) {
    if (c.type == type) out.push_back(&c);
  }
  return out;
}

std::string AsdlGrammar::ToText() const {
  std::string out;
  for (const std::string &type : types_) {
    std::string lead = type + " = ";
    bool first = true;
    for (const AsdlConstructor *c : ConstructorsOf(type)) {
      out += first ? lead : std::string(type.size() + 1, ' ') + "| ";
      first = false;
      out += c->name;
      if (!c->fields.empty()) {
        out += '(';
        for (std::size_t i = 0; i < c->fields.size(); ++i) {
          if (i > 0) out += ", ";
          out += c->fields[i].type;
          if (c->fields[i].sequence) out += '*';
          out += ' ' + c->fields[i].name;
        }
        out += ')';
      }
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Actions

std::string Action::ToString() const {
  switch (kind) {
    case Kind::kApplyConstr: return "APPLY " + value;
    case Kind::kReduce: return "REDUCE";
    case Kind::kGenToken: return "GEN " + value;
  }
  return {};
}

Action Action::FromString(std::string_view line) {
  std::string_view s = Trim(line);
  if (s == "REDUCE") return Reduce();
  if (s.substr(0, 6) == "APPLY ") return ApplyConstr(std::string(Trim(s.substr(6))));
  if (s.substr(0, 4) == "GEN ") return GenToken(std::string(s.substr(4)));
  throw DataError("bad action: " + std::string(line));
}

std::string SerializeActions(const std::vector<Action> &actions) {
  std::string out;
  for (const Action &a : actions) {
    out += a.ToString();
    out += '\n';
  }
  return out;
}

std::vector<Action> ParseActions(std::string_view text) {
  std::vector<Action> out;
  for (const std::string &line : Split(text, '\n')) {
    if (Trim(line).empty()) continue;
    out.push_back(Action::FromString(line));
  }
  return out;
}

bool WellFormedToken(std::string_view type, std::string_view token) {
  if (type == "literal") {
    return token.size() >= 2 && token.front() == '\'' && token.back() == '\'' &&
           token.substr(1, token.size() - 2).find('\'') == std::string_view::npos;
  }
  if (token == "lambda") return false;
  if (type == "cui") {
    return !token.empty() &&
           std::all_of(token.begin(), token.end(), [](char c) { return IsIdentChar(c); });
  }
  return IsIdentifier(token);
}

bool ValidActions::Allows(const Action &a) const {
  if (std::find(closed.begin(), closed.end(), a) != closed.end()) return true;
  return !open_type.empty() && a.kind == Action::Kind::kGenToken &&
         WellFormedToken(open_type, a.value);
}

// ---------------------------------------------------------------------------
// Derivations

Derivation::Derivation(const TransitionSystem *system) : system_(system) {}

bool Derivation::VarBound(std::string_view name) const {
  for (const Frame &f : stack_) {
    if (f.constructor->name == "Lambda" && f.field > 0 && f.label == name) return true;
  }
  return false;
}

std::vector<std::string> Derivation::BoundVars() const {
  std::vector<std::string> out;
  for (const Frame &f : stack_) {
    if (f.constructor->name == "Lambda" && f.field > 0 &&
        std::find(out.begin(), out.end(), f.label) == out.end()) {
      out.push_back(f.label);
    }
  }
  return out;
}

ValidActions Derivation::ArgActions(const Frame &apply) const {
  const AsdlGrammar &g = system_->grammar();
  const PredicateSignature *sig = system_->registry().Find(apply.label);
  ValidActions v;
  auto offer = [&](std::string_view constructor) {
    if (g.Find(constructor) != nullptr) {
      v.closed.push_back(Action::ApplyConstr(std::string(constructor)));
    }
  };
  std::size_t i = apply.filled;
  bool has_vars = !BoundVars().empty();
  if (i < sig->arity()) {
    switch (sig->arg_kinds[i]) {
      case ArgKind::kVar:
        if (has_vars) offer("VarArg");
        break;
      case ArgKind::kCui: offer("ConceptArg"); break;
      case ArgKind::kLiteral: offer("LiteralArg"); break;
      case ArgKind::kForm: offer("FormArg"); break;
      case ArgKind::kAny:
        if (has_vars) offer("VarArg");
        offer("ConceptArg");
        offer("LiteralArg");
        offer("FormArg");
        break;
    }
    return v;
  }
  if (i == sig->arity() && sig->allows_time_frame) offer("TimeFrameArg");
  v.closed.push_back(Action::Reduce());
  return v;
}

ValidActions Derivation::Next() const {
  const AsdlGrammar &g = system_->grammar();
  ValidActions v;
  if (!started_) {
    for (const AsdlConstructor *c : g.ConstructorsOf(g.root_type())) {
      v.closed.push_back(Action::ApplyConstr(c->name));
    }
    return v;
  }
  if (stack_.empty()) return v;
  const Frame &top = stack_.back();
  const std::string &owner = top.constructor->name;
  const AsdlField &field = top.constructor->fields[top.field];

  if (owner == "Apply" && field.name == "args") return ArgActions(top);

  if (AsdlGrammar::IsPrimitiveType(field.type)) {
    if (field.type == "pred_name") {
      for (const std::string &name : system_->registry().Names()) {
        v.closed.push_back(Action::GenToken(name));
      }
    } else if (field.type == "time_frame") {
      for (const std::string &t : system_->registry().time_frame_tokens()) {
        v.closed.push_back(Action::GenToken(t));
      }
    } else if (field.type == "var" && owner != "Lambda") {
      for (const std::string &name : BoundVars()) {
        v.closed.push_back(Action::GenToken(name));
      }
    } else {
      v.open_type = field.type;
    }
  } else if (owner == "Lambda" && field.name == "body") {
    if (g.Find("Apply") != nullptr) v.closed.push_back(Action::ApplyConstr("Apply"));
  } else {
    for (const AsdlConstructor *c : g.ConstructorsOf(field.type)) {
      v.closed.push_back(Action::ApplyConstr(c->name));
    }
  }
  if (field.sequence) {
    bool nonempty_body = owner == "Lambda" && field.name == "body";
    if (!nonempty_body || top.filled > 0) v.closed.push_back(Action::Reduce());
  }
  return v;
}

void Derivation::Advance() {
  while (!stack_.empty()) {
    Frame &top = stack_.back();
    if (top.field < top.constructor->fields.size()) {
      if (!top.constructor->fields[top.field].sequence && top.filled == 1) {
        ++top.field;
        top.filled = 0;
        continue;
      }
      return;
    }
    stack_.pop_back();
  }
}

std::string Derivation::Describe() const {
  if (!started_) return "empty derivation";
  if (complete()) return "complete derivation";
  return "frontier " + FrontierField() + " of type " + FrontierType();
}

bool Derivation::Accepts(const Action &a, const ValidActions &v) const {
  bool ok = v.Allows(a);
  if (ok && a.kind == Action::Kind::kGenToken && v.open_type == "cui") {
    ok = !VarBound(a.value);
  }
  return ok;
}

void Derivation::Apply(const Action &a) {
  ValidActions v = Next();
  bool ok = Accepts(a, v);
  if (!ok) throw IllegalAction(actions_.size(), a.ToString() + " at " + Describe());
  actions_.push_back(a);
  switch (a.kind) {
    case Action::Kind::kApplyConstr: {
      const AsdlConstructor *c = system_->grammar().Find(a.value);
      if (!stack_.empty()) ++stack_.back().filled;
      started_ = true;
      stack_.push_back(Frame{c, 0, 0, {}});
      break;
    }
    case Action::Kind::kGenToken: {
      Frame &top = stack_.back();
      if (top.label.empty()) top.label = a.value;
      ++top.filled;
      break;
    }
    case Action::Kind::kReduce: {
      Frame &top = stack_.back();
      ++top.field;
      top.filled = 0;
      break;
    }
  }
  Advance();
}

std::string Derivation::FrontierField() const {
  if (!started_) return "<root>";
  if (stack_.empty()) return "";
  const Frame &top = stack_.back();
  return top.constructor->name + "." + top.constructor->fields[top.field].name;
}

std::string Derivation::FrontierType() const {
  if (!started_) return system_->grammar().root_type();
  if (stack_.empty()) return "";
  const Frame &top = stack_.back();
  return top.constructor->fields[top.field].type;
}

// ---------------------------------------------------------------------------
// Transition system

TransitionSystem::TransitionSystem(AsdlGrammar grammar, PredicateRegistry registry)
    : grammar_(std::move(grammar)), registry_(std::move(registry)) {}

namespace {

class Oracle {
 public:
  explicit Oracle(const AsdlGrammar &g) : g_(g) {}

  std::vector<Action> Run(const LogicalForm &lf) {
    Form(lf);
    return std::move(out_);
  }

 private:
  void Constr(const std::string &name, const LogicalForm &node) {
    if (g_.Find(name) == nullptr) throw NotDerivable(PrintNode(node));
    out_.push_back(Action::ApplyConstr(name));
  }

  static std::string PrintNode(const LogicalForm &node) {
    return std::string(NodeKindName(node.kind())) + " '" + node.text() + "'";
  }

  void Form(const LogicalForm &lf) {
    if (lf.Is(NodeKind::kLambda)) {
      Constr("Lambda", lf);
      out_.push_back(Action::GenToken(lf.text()));
      const LogicalForm &body = lf.body();
      if (body.Is(NodeKind::kAnd)) {
        for (const LogicalForm &c : body.children()) Form(c);
      } else {
        Form(body);
      }
      out_.push_back(Action::Reduce());
    } else if (lf.Is(NodeKind::kApply)) {
      Constr("Apply", lf);
      out_.push_back(Action::GenToken(lf.text()));
      for (const LogicalForm &arg : lf.children()) Arg(arg);
      out_.push_back(Action::Reduce());
    } else {
      throw NotDerivable(PrintNode(lf));
    }
  }

  void Arg(const LogicalForm &arg) {
    switch (arg.kind()) {
      case NodeKind::kVar:
        Constr("VarArg", arg);
        out_.push_back(Action::GenToken(arg.text()));
        return;
      case NodeKind::kConceptRef:
        Constr("ConceptArg", arg);
        out_.push_back(Action::GenToken(arg.text()));
        return;
      case NodeKind::kLiteral:
        Constr("LiteralArg", arg);
        out_.push_back(Action::GenToken("'" + arg.text() + "'"));
        return;
      case NodeKind::kTimeFrame:
        Constr("TimeFrameArg", arg);
        out_.push_back(Action::GenToken(arg.text()));
        return;
      case NodeKind::kLambda:
      case NodeKind::kApply:
        Constr("FormArg", arg);
        Form(arg);
        return;
      default:
        throw NotDerivable(PrintNode(arg));
    }
  }

  const AsdlGrammar &g_;
  std::vector<Action> out_;
};

class AstBuilder {
 public:
  AstBuilder(const AsdlGrammar &g, const std::vector<Action> &actions)
      : g_(g), actions_(actions) {}

  GrammarAst Node() {
    GrammarAst node;
    const AsdlConstructor *c = g_.Find(actions_[pos_++].value);
    node.constructor = c->name;
    for (const AsdlField &f : c->fields) {
      std::vector<GrammarAst> values;
      bool primitive = AsdlGrammar::IsPrimitiveType(f.type);
      do {
        if (f.sequence && actions_[pos_].kind == Action::Kind::kReduce) {
          ++pos_;
          break;
        }
        if (primitive) {
          GrammarAst leaf;
          leaf.token = actions_[pos_++].value;
          values.push_back(std::move(leaf));
        } else {
          values.push_back(Node());
        }
      } while (f.sequence);
      node.fields.push_back(std::move(values));
    }
    return node;
  }

 private:
  const AsdlGrammar &g_;
  const std::vector<Action> &actions_;
  std::size_t pos_ = 0;
};

std::string Unquote(const std::string &token) {
  if (token.size() >= 2 && token.front() == '\'' && token.back() == '\'') {
    return token.substr(1, token.size() - 2);
  }
  return token;
}

}  // namespace

std::vector<Action> TransitionSystem::LfToActions(const LogicalForm &lf) const {
  std::vector<Action> actions = Oracle(grammar_).Run(lf);
  Derivation d(this);
  try {
    for (const Action &a : actions) d.Apply(a);
  } catch (const IllegalAction &e) {
    throw NotDerivable(PrintLf(lf) + ": " + e.what());
  }
  if (!d.complete()) throw NotDerivable(PrintLf(lf));
  return actions;
}

GrammarAst TransitionSystem::ActionsToAst(const std::vector<Action> &actions) const {
  Derivation d(this);
  for (const Action &a : actions) d.Apply(a);
  if (!d.complete()) {
    throw IncompleteDerivation("derivation incomplete after " +
                               std::to_string(actions.size()) + " actions");
  }
  return AstBuilder(grammar_, actions).Node();
}

LogicalForm TransitionSystem::AstToLf(const GrammarAst &ast) const {
  const std::string &c = ast.constructor;
  auto token = [&](std::size_t field) -> const std::string & {
    return ast.fields[field].front().token;
  };
  if (c == "Lambda") {
    std::vector<LogicalForm> conjuncts;
    for (const GrammarAst &b : ast.fields[1]) conjuncts.push_back(AstToLf(b));
    return LogicalForm::Lambda(token(0), LogicalForm::And(std::move(conjuncts)));
  }
  if (c == "Apply") {
    std::vector<LogicalForm> args;
    for (const GrammarAst &a : ast.fields[1]) args.push_back(AstToLf(a));
    return LogicalForm::Apply(token(0), std::move(args));
  }
  if (c == "VarArg") return LogicalForm::Var(token(0));
  if (c == "ConceptArg") return LogicalForm::ConceptRef(token(0));
  if (c == "LiteralArg") return LogicalForm::Literal(Unquote(token(0)));
  if (c == "TimeFrameArg") return LogicalForm::TimeFrame(token(0));
  if (c == "FormArg") return AstToLf(ast.fields[0].front());
  throw DataError("constructor " + c + " has no logical-form reading");
}

ValidActions TransitionSystem::ValidNextActions(const std::vector<Action> &prefix) const {
  Derivation d(this);
  for (const Action &a : prefix) d.Apply(a);
  return d.Next();
}

// ---------------------------------------------------------------------------
// Sketches

namespace {

bool IsMaskable(const LogicalForm &arg) {
  return arg.Is(NodeKind::kConceptRef) || arg.Is(NodeKind::kLiteral) ||
         arg.Is(NodeKind::kTimeFrame) || arg.Is(NodeKind::kPlaceholder);
}

template <typename ArgFn>
void VisitArgs(const LogicalForm &lf, ArgFn &&fn) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      VisitArgs(lf.body(), fn);
      return;
    case NodeKind::kAnd:
      for (const LogicalForm &c : lf.children()) VisitArgs(c, fn);
      return;
    case NodeKind::kApply:
      for (std::size_t i = 0; i < lf.children().size(); ++i) {
        const LogicalForm &arg = lf.children()[i];
        fn(lf, i, arg);
        if (arg.Is(NodeKind::kLambda) || arg.Is(NodeKind::kApply)) VisitArgs(arg, fn);
      }
      return;
    default:
      return;
  }
}

}  // namespace

LogicalForm Coarsen(const LogicalForm &lf) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      return LogicalForm::Lambda("x", Coarsen(lf.body()));
    case NodeKind::kAnd: {
      std::vector<LogicalForm> kids;
      for (const LogicalForm &c : lf.children()) kids.push_back(Coarsen(c));
      return LogicalForm::And(std::move(kids));
    }
    case NodeKind::kApply: {
      std::vector<LogicalForm> args;
      for (const LogicalForm &a : lf.children()) {
        args.push_back(IsMaskable(a) ? LogicalForm::Placeholder() : Coarsen(a));
      }
      return LogicalForm::Apply(lf.text(), std::move(args));
    }
    case NodeKind::kVar:
      return LogicalForm::Var("x");
    default:
      return LogicalForm::Placeholder();
  }
}

std::vector<std::string> FineTokens(const LogicalForm &lf) {
  std::vector<std::string> out;
  VisitArgs(lf, [&](const LogicalForm &, std::size_t, const LogicalForm &arg) {
    if (arg.Is(NodeKind::kLiteral)) {
      out.push_back("'" + arg.text() + "'");
    } else if (arg.Is(NodeKind::kConceptRef) || arg.Is(NodeKind::kTimeFrame)) {
      out.push_back(arg.text());
    }
  });
  return out;
}

std::size_t CountPlaceholders(const LogicalForm &lf) {
  std::size_t n = 0;
  VisitArgs(lf, [&](const LogicalForm &, std::size_t, const LogicalForm &arg) {
    if (arg.Is(NodeKind::kPlaceholder)) ++n;
  });
  return n;
}

std::string_view SlotKindName(SlotKind k) {
  switch (k) {
    case SlotKind::kCui: return "cui";
    case SlotKind::kLiteral: return "literal";
    case SlotKind::kTimeFrame: return "time_frame";
    case SlotKind::kAny: return "any";
  }
  return "?";
}

std::vector<SlotKind> PlaceholderSlots(const LogicalForm &sketch,
                                       const PredicateRegistry &registry) {
  std::vector<SlotKind> out;
  VisitArgs(sketch, [&](const LogicalForm &apply, std::size_t i, const LogicalForm &arg) {
    if (!arg.Is(NodeKind::kPlaceholder)) return;
    const PredicateSignature *sig = registry.Find(apply.text());
    if (sig == nullptr) throw UnknownPredicate(apply.text());
    if (i >= sig->arity()) {
      if (i == sig->arity() && sig->allows_time_frame) {
        out.push_back(SlotKind::kTimeFrame);
        return;
      }
      throw ArityMismatch(apply.text(), apply.children().size(), sig->arity());
    }
    switch (sig->arg_kinds[i]) {
      case ArgKind::kCui: out.push_back(SlotKind::kCui); break;
      case ArgKind::kLiteral: out.push_back(SlotKind::kLiteral); break;
      case ArgKind::kAny: out.push_back(SlotKind::kAny); break;
      default:
        throw TypeMismatch(out.size(), "placeholder in a " +
                                           std::string(ArgKindName(sig->arg_kinds[i])) +
                                           " slot of " + apply.text());
    }
  });
  return out;
}

bool FitsSlot(std::string_view token, SlotKind kind, const PredicateRegistry &registry) {
  bool literal = WellFormedToken("literal", token);
  bool cui = !literal && WellFormedToken("cui", token);
  switch (kind) {
    case SlotKind::kCui: return cui;
    case SlotKind::kLiteral: return literal;
    case SlotKind::kTimeFrame: return registry.IsTimeFrameToken(token);
    case SlotKind::kAny: return cui || literal;
  }
  return false;
}

LogicalForm FillSketch(const LogicalForm &sketch, const std::vector<std::string> &details,
                       const PredicateRegistry &registry) {
  std::vector<SlotKind> slots = PlaceholderSlots(sketch, registry);
  if (slots.size() != details.size()) {
    throw ArityMismatch("sketch", details.size(), slots.size());
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!FitsSlot(details[i], slots[i], registry)) {
      throw TypeMismatch(i, "'" + details[i] + "' cannot fill a " +
                                std::string(SlotKindName(slots[i])) + " slot");
    }
  }
  std::size_t next = 0;
  std::function<LogicalForm(const LogicalForm &)> fill = [&](const LogicalForm &lf) {
    switch (lf.kind()) {
      case NodeKind::kLambda:
        return LogicalForm::Lambda(lf.text(), fill(lf.body()));
      case NodeKind::kAnd: {
        std::vector<LogicalForm> kids;
        for (const LogicalForm &c : lf.children()) kids.push_back(fill(c));
        return LogicalForm::And(std::move(kids));
      }
      case NodeKind::kApply: {
        std::vector<LogicalForm> args;
        for (const LogicalForm &a : lf.children()) args.push_back(fill(a));
        return LogicalForm::Apply(lf.text(), std::move(args));
      }
      case NodeKind::kPlaceholder: {
        std::size_t i = next++;
        const std::string &t = details[i];
        if (slots[i] == SlotKind::kTimeFrame) return LogicalForm::TimeFrame(t);
        if (WellFormedToken("literal", t)) {
          return LogicalForm::Literal(t.substr(1, t.size() - 2));
        }
        return LogicalForm::ConceptRef(t);
      }
      default:
        return lf;
    }
  };
  return fill(sketch);
}

}  // namespace lambdaehr
