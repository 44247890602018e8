#include "lambdaehr/logical_form.h"

#include <algorithm>
#include <functional>

#include "lambdaehr/errors.h"
#include "lambdaehr/text.h"

namespace lambdaehr {

std::string_view NodeKindName(NodeKind kind) {
  switch (kind) {
    case NodeKind::kLambda: return "Lambda";
    case NodeKind::kAnd: return "And";
    case NodeKind::kApply: return "Apply";
    case NodeKind::kVar: return "Var";
    case NodeKind::kConceptRef: return "ConceptRef";
    case NodeKind::kLiteral: return "Literal";
    case NodeKind::kTimeFrame: return "TimeFrame";
    case NodeKind::kPlaceholder: return "Placeholder";
  }
  return "?";
}

LogicalForm LogicalForm::Make(NodeKind kind, std::string text,
                              std::vector<LogicalForm> children) {
  return LogicalForm(std::make_shared<const Node>(
      Node{kind, std::move(text), std::move(children)}));
}

LogicalForm LogicalForm::Lambda(std::string var, LogicalForm body) {
  return Make(NodeKind::kLambda, std::move(var), {std::move(body)});
}

LogicalForm LogicalForm::And(std::vector<LogicalForm> conjuncts) {
  std::vector<LogicalForm> flat;
  for (auto &c : conjuncts) {
    if (c.Is(NodeKind::kAnd)) {
      flat.insert(flat.end(), c.children().begin(), c.children().end());
    } else {
      flat.push_back(std::move(c));
    }
  }
  if (flat.size() == 1) return flat.front();
  return Make(NodeKind::kAnd, "", std::move(flat));
}

LogicalForm LogicalForm::Apply(std::string predicate,
                               std::vector<LogicalForm> args) {
  return Make(NodeKind::kApply, std::move(predicate), std::move(args));
}

LogicalForm LogicalForm::Var(std::string name) {
  return Make(NodeKind::kVar, std::move(name), {});
}

LogicalForm LogicalForm::ConceptRef(std::string id) {
  return Make(NodeKind::kConceptRef, std::move(id), {});
}

LogicalForm LogicalForm::Literal(std::string value) {
  return Make(NodeKind::kLiteral, std::move(value), {});
}

LogicalForm LogicalForm::TimeFrame(std::string token) {
  return Make(NodeKind::kTimeFrame, std::move(token), {});
}

LogicalForm LogicalForm::Placeholder() {
  static const LogicalForm placeholder = Make(NodeKind::kPlaceholder, "@", {});
  return placeholder;
}

bool operator==(const LogicalForm &a, const LogicalForm &b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind() || a.text() != b.text() ||
      a.children().size() != b.children().size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children().size(); ++i) {
    if (a.children()[i] != b.children()[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool IsWordChar(char c) { return IsIdentChar(c); }

class LfParser {
 public:
  LfParser(std::string_view text, const PredicateRegistry &registry,
           const ParseOptions &options)
      : text_(text), registry_(registry), options_(options) {}

  LogicalForm ParseTop() {
    SkipSpace();
    if (AtEnd()) throw SyntaxError(pos_, "logical form");
    LogicalForm lf = ParseForm();
    SkipSpace();
    if (!AtEnd()) throw SyntaxError(pos_, "end of input");
    return lf;
  }

 private:
  bool AtEnd() const { return pos_ >= text_.size(); }

  void SkipSpace() {
    while (!AtEnd()) {
      std::size_t next = pos_;
      char32_t cp = DecodeUtf8(text_, &next);
      if (!IsSpace(cp)) return;
      pos_ = next;
    }
  }

  bool PeekLambda() const {
    if (text_.substr(pos_, 2) == "\xCE\xBB") return true;  // λ
    std::size_t end = pos_;
    while (end < text_.size() && IsWordChar(text_[end])) ++end;
    return text_.substr(pos_, end - pos_) == "lambda";
  }

  bool PeekAnd() const {
    return text_.substr(pos_, 3) == "\xE2\x88\xA7" ||  // ∧
           (!AtEnd() && text_[pos_] == '^');
  }

  void Expect(char c, const char *what) {
    SkipSpace();
    if (AtEnd() || text_[pos_] != c) throw SyntaxError(pos_, what);
    ++pos_;
  }

  std::string ReadWord(const char *what) {
    SkipSpace();
    std::size_t start = pos_;
    while (!AtEnd() && IsWordChar(text_[pos_])) ++pos_;
    if (pos_ == start) throw SyntaxError(pos_, what);
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string ReadIdentifier(const char *what) {
    SkipSpace();
    if (AtEnd() || !IsIdentStart(text_[pos_])) throw SyntaxError(pos_, what);
    return ReadWord(what);
  }

  LogicalForm ParseForm() {
    SkipSpace();
    if (AtEnd()) throw SyntaxError(pos_, "lambda or predicate");
    if (PeekLambda()) return ParseLambda();
    if (!IsIdentStart(text_[pos_])) {
      throw SyntaxError(pos_, "lambda or predicate");
    }
    return ParseApply();
  }

  LogicalForm ParseLambda() {
    if (text_.substr(pos_, 2) == "\xCE\xBB") {
      pos_ += 2;
    } else {
      pos_ += 6;  // "lambda"
    }
    std::string var = ReadIdentifier("variable");
    Expect('.', "'.'");
    scope_.push_back(var);
    std::vector<LogicalForm> conjuncts;
    conjuncts.push_back(ParseConjunct());
    for (;;) {
      SkipSpace();
      if (!PeekAnd()) break;
      pos_ += text_[pos_] == '^' ? 1 : 3;
      conjuncts.push_back(ParseConjunct());
    }
    scope_.pop_back();
    return LogicalForm::Lambda(std::move(var),
                               LogicalForm::And(std::move(conjuncts)));
  }

  LogicalForm ParseConjunct() {
    SkipSpace();
    if (AtEnd() || !IsIdentStart(text_[pos_]) || PeekLambda()) {
      throw SyntaxError(pos_, "predicate name");
    }
    return ParseApply();
  }

  struct RawArg {
    LogicalForm form;
    bool bare_word;
  };

  LogicalForm ParseApply() {
    std::string name = ReadIdentifier("predicate name");
    SkipSpace();
    if (AtEnd() || text_[pos_] != '(') throw SyntaxError(pos_, "'('");
    ++pos_;
    const PredicateSignature *sig = registry_.Find(name);
    if (sig == nullptr) throw UnknownPredicate(name);

    std::vector<RawArg> raw;
    for (;;) {
      raw.push_back(ParseArg());
      SkipSpace();
      if (AtEnd()) throw SyntaxError(pos_, "',' or ')'");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      throw SyntaxError(pos_, "',' or ')'");
    }

    // Bare words become variables when bound, a time frame when they sit in
    // the optional trailing slot, and concept identifiers otherwise.
    const std::size_t n = raw.size();
    std::vector<LogicalForm> args;
    args.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!raw[i].bare_word) {
        args.push_back(std::move(raw[i].form));
        continue;
      }
      const std::string &word = raw[i].form.text();
      if (std::find(scope_.begin(), scope_.end(), word) != scope_.end()) {
        args.push_back(LogicalForm::Var(word));
      } else if (sig->allows_time_frame && i + 1 == n &&
                 n == sig->arity() + 1 && registry_.IsTimeFrameToken(word)) {
        args.push_back(LogicalForm::TimeFrame(word));
      } else {
        args.push_back(std::move(raw[i].form));
      }
    }
    return LogicalForm::Apply(std::move(name), std::move(args));
  }

  RawArg ParseArg() {
    SkipSpace();
    if (AtEnd()) throw SyntaxError(pos_, "argument");
    char c = text_[pos_];
    if (c == '\'') {
      std::size_t start = ++pos_;
      while (!AtEnd() && text_[pos_] != '\'') ++pos_;
      if (AtEnd()) throw SyntaxError(pos_, "closing quote");
      std::string value(text_.substr(start, pos_ - start));
      ++pos_;
      return {LogicalForm::Literal(std::move(value)), false};
    }
    if (c == '@') {
      if (!options_.allow_placeholders) {
        throw SyntaxError(pos_, "argument (placeholder not allowed)");
      }
      ++pos_;
      return {LogicalForm::Placeholder(), false};
    }
    if (PeekLambda()) return {ParseLambda(), false};
    if (!IsWordChar(c)) throw SyntaxError(pos_, "argument");
    std::size_t save = pos_;
    std::string word = ReadWord("argument");
    SkipSpace();
    if (!AtEnd() && text_[pos_] == '(') {
      if (!IsIdentifier(word)) throw SyntaxError(save, "predicate name");
      pos_ = save;
      return {ParseApply(), false};
    }
    return {LogicalForm::ConceptRef(std::move(word)), true};
  }

  std::string_view text_;
  const PredicateRegistry &registry_;
  const ParseOptions &options_;
  std::size_t pos_ = 0;
  std::vector<std::string> scope_;
};

}  // namespace

LogicalForm ParseLf(std::string_view text, const PredicateRegistry &registry,
                    const ParseOptions &options) {
  LogicalForm lf = LfParser(text, registry, options).ParseTop();
  ValidateLf(lf, registry, options);
  return lf;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class Validator {
 public:
  Validator(const PredicateRegistry &registry, const ParseOptions &options)
      : registry_(registry), options_(options) {}

  void Root(const LogicalForm &lf) {
    if (!lf.Is(NodeKind::kLambda) && !lf.Is(NodeKind::kApply)) {
      throw TypeMismatch(0, "a logical form must be a lambda or a predicate "
                            "application, not " +
                                std::string(NodeKindName(lf.kind())));
    }
    Form(lf);
  }

 private:
  void Form(const LogicalForm &lf) {
    if (lf.Is(NodeKind::kLambda)) {
      Lambda(lf);
    } else {
      Apply(lf);
    }
  }

  void Lambda(const LogicalForm &lf) {
    if (!IsIdentifier(lf.text())) {
      throw TypeMismatch(0, "bad lambda variable '" + lf.text() + "'");
    }
    if (lf.children().size() != 1) {
      throw TypeMismatch(0, "lambda must have exactly one body");
    }
    scope_.push_back(lf.text());
    const LogicalForm &body = lf.body();
    if (body.Is(NodeKind::kAnd)) {
      if (body.children().size() < 2) {
        throw TypeMismatch(0, "conjunction needs at least two conjuncts");
      }
      for (const LogicalForm &c : body.children()) {
        if (!c.Is(NodeKind::kApply)) {
          throw TypeMismatch(0, "conjuncts must be predicate applications");
        }
        Apply(c);
      }
    } else if (body.Is(NodeKind::kApply)) {
      Apply(body);
    } else {
      throw TypeMismatch(0, "lambda body must be a predicate application");
    }
    scope_.pop_back();
  }

  void Apply(const LogicalForm &lf) {
    const PredicateSignature *sig = registry_.Find(lf.text());
    if (sig == nullptr) throw UnknownPredicate(lf.text());
    const auto &args = lf.children();
    std::size_t n = args.size();
    // A sketch masks the time frame too, so an extra trailing '@' counts as
    // one when the predicate takes a frame.
    bool trailing_frame =
        n > 0 && (args.back().Is(NodeKind::kTimeFrame) ||
                  (options_.allow_placeholders && sig->allows_time_frame &&
                   n == sig->arity() + 1 && args.back().Is(NodeKind::kPlaceholder)));
    if (trailing_frame) {
      if (!sig->allows_time_frame) {
        throw TypeMismatch(n - 1, lf.text() + " does not take a time frame");
      }
      --n;
    }
    if (n != sig->arity()) throw ArityMismatch(lf.text(), n, sig->arity());
    for (std::size_t i = 0; i < args.size(); ++i) {
      const LogicalForm &arg = args[i];
      if (i == n) {
        if (arg.Is(NodeKind::kPlaceholder)) continue;
        if (!registry_.IsTimeFrameToken(arg.text())) {
          throw TypeMismatch(i, "unknown time frame '" + arg.text() + "'");
        }
        continue;
      }
      Arg(arg, sig->arg_kinds[i], i);
    }
  }

  bool Bound(const std::string &name) const {
    return std::find(scope_.begin(), scope_.end(), name) != scope_.end();
  }

  void Arg(const LogicalForm &arg, ArgKind kind, std::size_t i) {
    switch (arg.kind()) {
      case NodeKind::kLambda:
      case NodeKind::kApply:
        if (kind != ArgKind::kForm && kind != ArgKind::kAny) {
          throw TypeMismatch(i, "unexpected nested form");
        }
        Form(arg);
        return;
      case NodeKind::kAnd:
        throw TypeMismatch(i, "conjunction outside a lambda body");
      case NodeKind::kVar:
        if (!Bound(arg.text())) throw UnboundVariable(arg.text());
        if (kind != ArgKind::kVar && kind != ArgKind::kAny) {
          throw TypeMismatch(i, "unexpected variable " + arg.text());
        }
        return;
      case NodeKind::kConceptRef:
        if (kind == ArgKind::kVar) throw UnboundVariable(arg.text());
        if (kind != ArgKind::kCui && kind != ArgKind::kAny) {
          throw TypeMismatch(i, "unexpected concept " + arg.text());
        }
        for (char c : arg.text()) {
          if (!IsIdentChar(c)) {
            throw TypeMismatch(i, "bad concept identifier " + arg.text());
          }
        }
        if (arg.text().empty()) throw TypeMismatch(i, "empty concept");
        return;
      case NodeKind::kLiteral:
        if (kind != ArgKind::kLiteral && kind != ArgKind::kAny) {
          throw TypeMismatch(i, "unexpected literal '" + arg.text() + "'");
        }
        if (arg.text().find('\'') != std::string::npos) {
          throw TypeMismatch(i, "literal contains a quote");
        }
        return;
      case NodeKind::kTimeFrame:
        throw TypeMismatch(i, "time frame must be the trailing argument");
      case NodeKind::kPlaceholder:
        if (!options_.allow_placeholders) {
          throw TypeMismatch(i, "placeholder in a gold logical form");
        }
        if (kind == ArgKind::kVar || kind == ArgKind::kForm) {
          throw TypeMismatch(i, "placeholder cannot stand for a " +
                                    std::string(ArgKindName(kind)));
        }
        return;
    }
  }

  const PredicateRegistry &registry_;
  const ParseOptions &options_;
  std::vector<std::string> scope_;
};

}  // namespace

void ValidateLf(const LogicalForm &lf, const PredicateRegistry &registry,
                const ParseOptions &options) {
  Validator(registry, options).Root(lf);
}

// ---------------------------------------------------------------------------
// Printing and comparison

namespace {

void Print(const LogicalForm &lf, std::string *out) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      out->append("\xCE\xBB");
      out->append(lf.text());
      out->push_back('.');
      Print(lf.body(), out);
      return;
    case NodeKind::kAnd:
      for (std::size_t i = 0; i < lf.children().size(); ++i) {
        if (i) out->append(" \xE2\x88\xA7 ");
        Print(lf.children()[i], out);
      }
      return;
    case NodeKind::kApply:
      out->append(lf.text());
      out->push_back('(');
      for (std::size_t i = 0; i < lf.children().size(); ++i) {
        if (i) out->append(", ");
        Print(lf.children()[i], out);
      }
      out->push_back(')');
      return;
    case NodeKind::kLiteral:
      out->push_back('\'');
      out->append(lf.text());
      out->push_back('\'');
      return;
    case NodeKind::kVar:
    case NodeKind::kConceptRef:
    case NodeKind::kTimeFrame:
    case NodeKind::kPlaceholder:
      out->append(lf.text());
      return;
  }
}

LogicalForm SortConjuncts(const LogicalForm &lf) {
  if (lf.children().empty()) return lf;
  std::vector<LogicalForm> kids;
  kids.reserve(lf.children().size());
  for (const auto &c : lf.children()) kids.push_back(SortConjuncts(c));
  switch (lf.kind()) {
    case NodeKind::kLambda:
      return LogicalForm::Lambda(lf.text(), kids.front());
    case NodeKind::kAnd:
      std::sort(kids.begin(), kids.end(),
                [](const LogicalForm &a, const LogicalForm &b) {
                  return PrintLf(a) < PrintLf(b);
                });
      return LogicalForm::And(std::move(kids));
    default:
      return LogicalForm::Apply(lf.text(), std::move(kids));
  }
}

}  // namespace

std::string PrintLf(const LogicalForm &lf) {
  std::string out;
  Print(lf, &out);
  return out;
}

bool ExactMatch(const LogicalForm &a, const LogicalForm &b) {
  return PrintLf(a) == PrintLf(b);
}

bool MatchModAnd(const LogicalForm &a, const LogicalForm &b) {
  return PrintLf(SortConjuncts(a)) == PrintLf(SortConjuncts(b));
}

LogicalForm StripTimeFrames(const LogicalForm &lf) {
  switch (lf.kind()) {
    case NodeKind::kLambda:
      return LogicalForm::Lambda(lf.text(), StripTimeFrames(lf.body()));
    case NodeKind::kAnd: {
      std::vector<LogicalForm> kids;
      for (const auto &c : lf.children()) kids.push_back(StripTimeFrames(c));
      return LogicalForm::And(std::move(kids));
    }
    case NodeKind::kApply: {
      std::vector<LogicalForm> kids;
      for (const auto &c : lf.children()) {
        if (c.Is(NodeKind::kTimeFrame)) continue;
        kids.push_back(StripTimeFrames(c));
      }
      return LogicalForm::Apply(lf.text(), std::move(kids));
    }
    default:
      return lf;
  }
}

std::string OutermostLabel(const LogicalForm &lf, bool grouped) {
  if (lf.Is(NodeKind::kLambda)) return "\xCE\xBB" + lf.text();
  if (grouped && lf.text().rfind("is_", 0) == 0) return "is_*";
  return lf.text();
}

void CollectPredicates(const LogicalForm &lf, std::vector<std::string> *out) {
  if (lf.Is(NodeKind::kApply)) out->push_back(lf.text());
  for (const auto &c : lf.children()) CollectPredicates(c, out);
}

std::size_t CountPredicates(const LogicalForm &lf) {
  std::size_t n = lf.Is(NodeKind::kApply) ? 1 : 0;
  for (const auto &c : lf.children()) n += CountPredicates(c);
  return n;
}

}  // namespace lambdaehr
