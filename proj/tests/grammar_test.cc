#include <algorithm>

#include "doctest.h"
#include "lambdaehr/grammar.h"
#include "lambdaehr/text.h"
#include "support/random_lf.h"

namespace lambdaehr {
namespace {

const PredicateRegistry &Reg() {
  static const PredicateRegistry r = PredicateRegistry::Default();
  return r;
}

const TransitionSystem &Ts() {
  static const TransitionSystem ts(AsdlGrammar::Default(), Reg());
  return ts;
}

LogicalForm P(std::string_view s) { return ParseLf(s, Reg()); }

LogicalForm S(std::string_view s) {
  ParseOptions o;
  o.allow_placeholders = true;
  return ParseLf(s, Reg(), o);
}

std::vector<std::string> Strings(const std::vector<Action> &actions) {
  std::vector<std::string> out;
  for (const Action &a : actions) out.push_back(a.ToString());
  return out;
}

TEST_CASE("shipped grammar file matches the built-in grammar") {
  AsdlGrammar g = AsdlGrammar::LoadFile(std::string(LAMBDAEHR_DATA_DIR) + "/lambda_ehr.asdl");
  CHECK(g.ToText() == AsdlGrammar::Default().ToText());
  CHECK(g.root_type() == "expr");
  REQUIRE(g.Find("Apply") != nullptr);
  CHECK(g.Find("Apply")->fields[1].sequence);
  CHECK(AsdlGrammar::Parse(g.ToText()).ToText() == g.ToText());
}

TEST_CASE("grammar file errors") {
  CHECK_THROWS_AS(AsdlGrammar::Parse("expr = A(thing t)"), DataError);
  CHECK_THROWS_AS(AsdlGrammar::Parse("expr = A(var v) | A(cui c)"), DataError);
  CHECK_THROWS_AS(AsdlGrammar::Parse("expr = A(var v"), SyntaxError);
  CHECK_THROWS_AS(AsdlGrammar::Parse("-- nothing\n"), DataError);
  AsdlGrammar extra = AsdlGrammar::Parse(
      "expr = Dose(expr form) | Leaf(cui id)\n# comment\nunused = Nil");
  CHECK(extra.ConstructorsOf("expr").size() == 2);
  CHECK(extra.Find("Nil")->fields.empty());
}

TEST_CASE("oracle derivation of the microorganism example") {
  std::vector<Action> got = Ts().LfToActions(P("λx.has_concept(x, C2242979)"));
  CHECK(Strings(got) == std::vector<std::string>{
                            "APPLY Lambda", "GEN x", "APPLY Apply", "GEN has_concept",
                            "APPLY VarArg", "GEN x", "APPLY ConceptArg", "GEN C2242979",
                            "REDUCE", "REDUCE"});
  CHECK(ParseActions(SerializeActions(got)) == got);
}

TEST_CASE("round trip of the delta example is byte exact") {
  const std::string text = "delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))";
  std::vector<Action> actions = Ts().LfToActions(P(text));
  GrammarAst ast = Ts().ActionsToAst(actions);
  CHECK(ast.constructor == "Apply");
  CHECK(PrintLf(Ts().AstToLf(ast)) == text);

  const std::string tf = "λx.has_concept(x, C2242979, visit)";
  CHECK(PrintLf(Ts().ActionsToLf(Ts().LfToActions(P(tf)))) == tf);
  const std::string lit = "count(λx.has_concept(x, C0234422) ∧ time_within(x, 'in the past 3 years'))";
  std::vector<Action> la = Ts().LfToActions(P(lit));
  CHECK(std::count(la.begin(), la.end(), Action::GenToken("'in the past 3 years'")) == 1);
  CHECK(PrintLf(Ts().ActionsToLf(ParseActions(SerializeActions(la)))) == lit);
}

TEST_CASE("single predicate derivations") {
  for (const char *text : {"λx.is_healed(x)", "λy.time_within(y, 'today')"}) {
    LogicalForm lf = P(text);
    LogicalForm back = Ts().ActionsToLf(Ts().LfToActions(lf));
    CHECK(CountPredicates(back) == 1);
    CHECK(back == lf);
  }
}

TEST_CASE("replay errors") {
  CHECK_THROWS_AS(Ts().ActionsToAst({}), IncompleteDerivation);
  try {
    Ts().ActionsToAst({Action::GenToken("x")});
    FAIL("expected IllegalAction");
  } catch (const IllegalAction &e) {
    CHECK(e.index() == 0);
  }
  std::vector<Action> full = Ts().LfToActions(P("λx.has_concept(x, C1)"));
  std::vector<Action> cut(full.begin(), full.end() - 1);
  CHECK_THROWS_AS(Ts().ActionsToAst(cut), IncompleteDerivation);
  std::vector<Action> extra = full;
  extra.push_back(Action::Reduce());
  CHECK_THROWS_AS(Ts().ActionsToAst(extra), IllegalAction);

  // Arity is enforced: has_concept cannot close after one argument.
  std::vector<Action> short_args = {Action::ApplyConstr("Lambda"), Action::GenToken("x"),
                                    Action::ApplyConstr("Apply"),
                                    Action::GenToken("has_concept"),
                                    Action::ApplyConstr("VarArg"), Action::GenToken("x"),
                                    Action::Reduce()};
  try {
    Ts().ActionsToAst(short_args);
    FAIL("expected IllegalAction");
  } catch (const IllegalAction &e) {
    CHECK(e.index() == 6);
  }
  // Unbound variables cannot be generated.
  std::vector<Action> unbound = {Action::ApplyConstr("Lambda"), Action::GenToken("x"),
                                 Action::ApplyConstr("Apply"), Action::GenToken("is_healed"),
                                 Action::ApplyConstr("VarArg"), Action::GenToken("y")};
  CHECK_THROWS_AS(Ts().ActionsToAst(unbound), IllegalAction);
}

TEST_CASE("not derivable") {
  LogicalForm unknown = LogicalForm::Lambda(
      "x", LogicalForm::Apply("frobnicate", {LogicalForm::Var("x")}));
  CHECK_THROWS_AS(Ts().LfToActions(unknown), NotDerivable);
  CHECK_THROWS_AS(Ts().LfToActions(S("λx.has_concept(x, @)")), NotDerivable);

  TransitionSystem no_literals(
      AsdlGrammar::Parse("expr = Lambda(var name, expr* body) | Apply(pred_name pred, arg* args)\n"
                         "arg = VarArg(var name) | ConceptArg(cui id)"),
      Reg());
  CHECK_NOTHROW(no_literals.LfToActions(P("λx.has_concept(x, C1)")));
  CHECK_THROWS_AS(no_literals.LfToActions(P("λx.less_than(x, '3')")), NotDerivable);
}

TEST_CASE("valid next actions") {
  ValidActions start = Ts().ValidNextActions({});
  CHECK(start.closed == std::vector<Action>{Action::ApplyConstr("Lambda"),
                                            Action::ApplyConstr("Apply")});
  CHECK(start.open_type.empty());

  ValidActions preds = Ts().ValidNextActions({Action::ApplyConstr("Apply")});
  std::vector<std::string> names;
  for (const Action &a : preds.closed) {
    CHECK(a.kind == Action::Kind::kGenToken);
    names.push_back(a.value);
  }
  std::vector<std::string> want = BuiltinPredicateNames();
  std::sort(want.begin(), want.end());
  std::sort(names.begin(), names.end());
  CHECK(names == want);

  std::vector<Action> full = Ts().LfToActions(P("λx.has_concept(x, C1)"));
  CHECK(Ts().ValidNextActions(full).empty());

  // Lambda variable and concept fields are open.
  CHECK(Ts().ValidNextActions({Action::ApplyConstr("Lambda")}).open_type == "var");
  std::vector<Action> at_cui(full.begin(), full.begin() + 7);
  ValidActions cui = Ts().ValidNextActions(at_cui);
  CHECK(cui.open_type == "cui");
  CHECK(cui.Allows(Action::GenToken("C0005903")));
  CHECK_FALSE(cui.Allows(Action::GenToken("'38C'")));

  // After both has_concept arguments: a time frame or close.
  std::vector<Action> after_args(full.begin(), full.begin() + 8);
  ValidActions tail = Ts().ValidNextActions(after_args);
  CHECK(tail.closed == std::vector<Action>{Action::ApplyConstr("TimeFrameArg"), Action::Reduce()});

  // An empty lambda body cannot be closed.
  ValidActions body = Ts().ValidNextActions({Action::ApplyConstr("Lambda"), Action::GenToken("x")});
  CHECK(body.closed == std::vector<Action>{Action::ApplyConstr("Apply")});
}

TEST_CASE("property: random forms round trip through the transition system") {
  testing::RandomLf gen(99);
  for (int i = 0; i < 1000; ++i) {
    LogicalForm lf = gen.Next();
    std::vector<Action> actions = Ts().LfToActions(lf);
    Derivation d(&Ts());
    for (const Action &a : actions) {
      REQUIRE(d.Next().Allows(a));
      d.Apply(a);
    }
    CHECK(d.complete());
    LogicalForm back = Ts().ActionsToLf(actions);
    REQUIRE_MESSAGE(PrintLf(back) == PrintLf(lf), PrintLf(lf));
  }
}

TEST_CASE("coarsen masks details") {
  LogicalForm fhir = P("count(λx.has_concept(x, C0234422) ∧ time_within(x, 'in the past 3 years'))");
  LogicalForm sketch = Coarsen(fhir);
  CHECK(PrintLf(sketch) == "count(λx.has_concept(x, @) ∧ time_within(x, @))");
  CHECK(Coarsen(sketch) == sketch);
  CHECK(PrintLf(Coarsen(P("λx.has_concept(x, C9)"))) == "λx.has_concept(x, @)");
  CHECK(PrintLf(Coarsen(P("λy.has_concept(y, C9, visit)"))) == "λx.has_concept(x, @, @)");
  CHECK(FineTokens(fhir) == std::vector<std::string>{"C0234422", "'in the past 3 years'"});
  CHECK(PrintLf(FillSketch(sketch, FineTokens(fhir), Reg())) == PrintLf(fhir));
  // The masked sketch is itself a valid placeholder form.
  CHECK(S(PrintLf(Coarsen(P("λy.has_concept(y, C9, visit)")))) ==
        Coarsen(P("λy.has_concept(y, C9, visit)")));
}

TEST_CASE("fill sketch errors") {
  LogicalForm sketch = S("count(λx.has_concept(x, @) ∧ time_within(x, @))");
  try {
    FillSketch(sketch, {"C0234422"}, Reg());
    FAIL("expected ArityMismatch");
  } catch (const ArityMismatch &e) {
    CHECK(e.got() == 1);
    CHECK(e.want() == 2);
  }
  try {
    FillSketch(sketch, {"'38C'", "'in the past 3 years'"}, Reg());
    FAIL("expected TypeMismatch");
  } catch (const TypeMismatch &e) {
    CHECK(e.position() == 0);
  }
  CHECK_THROWS_AS(FillSketch(sketch, {"C1", "C2"}, Reg()), TypeMismatch);
  CHECK(PlaceholderSlots(S("λx.has_concept(x, @, @)"), Reg()) ==
        std::vector<SlotKind>{SlotKind::kCui, SlotKind::kTimeFrame});
  CHECK_THROWS_AS(FillSketch(S("λx.has_concept(x, @, @)"), {"C1", "night"}, Reg()),
                  TypeMismatch);
}

TEST_CASE("property: sketch round trip and label preservation") {
  testing::RandomLf::Options opts;
  opts.single_variable = true;
  testing::RandomLf gen(5, opts);
  for (int i = 0; i < 1000; ++i) {
    LogicalForm lf = gen.Next();
    LogicalForm sketch = Coarsen(lf);
    CHECK(Coarsen(sketch) == sketch);
    CHECK(OutermostLabel(sketch) == OutermostLabel(lf));
    CHECK(FineTokens(lf).size() == CountPlaceholders(sketch));
    CHECK(CountPredicates(sketch) == CountPredicates(lf));
    REQUIRE_MESSAGE(FillSketch(sketch, FineTokens(lf), Reg()) == lf, PrintLf(lf));
  }
}

}  // namespace
}  // namespace lambdaehr
