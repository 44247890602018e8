#include <sstream>

#include "doctest.h"
#include "lambdaehr/errors.h"
#include "lambdaehr/logical_form.h"
#include "support/random_lf.h"

namespace lambdaehr {
namespace {

const PredicateRegistry &Reg() {
  static const PredicateRegistry r = PredicateRegistry::Default();
  return r;
}

LogicalForm P(std::string_view s) { return ParseLf(s, Reg()); }

using LF = LogicalForm;

TEST_CASE("parse builds the delta example tree") {
  LF got = P("delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))");
  LF want = LF::Apply(
      "delta",
      {LF::Lambda("x", LF::And({LF::Apply("has_concept",
                                          {LF::Var("x"), LF::ConceptRef("C0005903")}),
                                LF::Apply("less_than",
                                          {LF::Var("x"), LF::Literal("38C")})}))});
  CHECK(got == want);
}

TEST_CASE("parse recognizes the implicit time frame") {
  LF got = P("λx.has_concept(x, C2242979, visit)");
  LF want = LF::Lambda("x", LF::Apply("has_concept", {LF::Var("x"),
                                                      LF::ConceptRef("C2242979"),
                                                      LF::TimeFrame("visit")}));
  CHECK(got == want);
  CHECK(got.body().children()[2].Is(NodeKind::kTimeFrame));
}

TEST_CASE("truncated input reports the offset") {
  try {
    P("sum(λx.");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError &e) {
    CHECK(e.offset() == 8);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(P("frobnicate(λx.has_concept(x, C1))"), UnknownPredicate);
  CHECK_THROWS_AS(P("λx.has_concept(x)"), ArityMismatch);
  CHECK_THROWS_AS(P("λx.has_concept(x, C1, C2, C3)"), ArityMismatch);
  CHECK_THROWS_AS(P("λx.has_concept(y, C1)"), UnboundVariable);
  CHECK_THROWS_AS(P("λx.has_concept(x, '38C')"), TypeMismatch);
  CHECK_THROWS_AS(P("λx.has_concept(x, @)"), SyntaxError);
  CHECK_THROWS_AS(P(""), SyntaxError);
  CHECK_THROWS_AS(P("λx.has_concept(x, C1) trailing"), SyntaxError);
  CHECK_THROWS_AS(P("λx.has_concept(x, 'open"), SyntaxError);
  CHECK_THROWS_AS(P("λx.time_within(x, 'a', visit)"), ArityMismatch);
  try {
    P("λx.has_concept(x)");
  } catch (const ArityMismatch &e) {
    CHECK(e.name() == "has_concept");
    CHECK(e.got() == 1);
    CHECK(e.want() == 2);
  }
}

TEST_CASE("ascii lambda and whitespace are accepted") {
  CHECK(P("lambda x . has_concept( x , C1 )") == P("λx.has_concept(x, C1)"));
  CHECK(P("  λx.has_concept(x, C1) ^ is_healed(x)  ") ==
        P("λx.has_concept(x, C1) ∧ is_healed(x)"));
}

TEST_CASE("placeholders only when allowed") {
  ParseOptions opts;
  opts.allow_placeholders = true;
  LF s = ParseLf("count(λx.has_concept(x, @) ∧ time_within(x, @))", Reg(), opts);
  CHECK(PrintLf(s) == "count(λx.has_concept(x, @) ∧ time_within(x, @))");
  CHECK_THROWS_AS(ValidateLf(s, Reg()), TypeMismatch);
}

TEST_CASE("print renders canonically") {
  CHECK(PrintLf(LF::Lambda("x", LF::Apply("has_concept", {LF::Var("x"),
                                                          LF::ConceptRef("C0042036")}))) ==
        "λx.has_concept(x, C0042036)");
  CHECK(PrintLf(P("sum( λx.has_concept( x , C0042036 ) ∧ time_within( x , 'last night' ) )")) ==
        "sum(λx.has_concept(x, C0042036) ∧ time_within(x, 'last night'))");
}

TEST_CASE("exact match") {
  LF a = P("delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))");
  CHECK(ExactMatch(a, a));
  CHECK_FALSE(ExactMatch(a, P("delta(λx.has_concept(x, C0005903) ∧ less_than(x, '39C'))")));
  CHECK(ExactMatch(a, P("delta( λx.has_concept(x,C0005903)∧less_than(x,'38C') )")));
}

TEST_CASE("conjunct order matters for exact match but not match_mod_and") {
  LF a = P("λx.has_concept(x, C1) ∧ is_healed(x)");
  LF b = P("λx.is_healed(x) ∧ has_concept(x, C1)");
  CHECK_FALSE(ExactMatch(a, b));
  CHECK(MatchModAnd(a, b));
}

TEST_CASE("strip time frames") {
  CHECK(PrintLf(StripTimeFrames(P("λx.has_concept(x, C2242979, visit)"))) ==
        "λx.has_concept(x, C2242979)");
  LF plain = P("count(λx.has_concept(x, C1))");
  CHECK(StripTimeFrames(plain) == plain);
  CHECK(PrintLf(StripTimeFrames(
            P("sum(λx.has_concept(x, C0042036, visit) ∧ time_within(x, 'last night'))"))) ==
        "sum(λx.has_concept(x, C0042036) ∧ time_within(x, 'last night'))");
}

TEST_CASE("outermost label") {
  CHECK(OutermostLabel(P("sum(λx.has_concept(x, C0042036))")) == "sum");
  CHECK(OutermostLabel(P("λx.has_concept(x, C1)")) == "λx");
  LF neg = P("is_negative(latest(λx.has_concept(x, C1)))");
  CHECK(OutermostLabel(neg) == "is_negative");
  CHECK(OutermostLabel(neg, true) == "is_*");
  CHECK(CountPredicates(P("delta(λx.has_concept(x, C1) ∧ less_than(x, '38C'))")) == 3);
}

TEST_CASE("registry defaults and config loading") {
  const PredicateRegistry &r = Reg();
  for (const auto &name : BuiltinPredicateNames()) CHECK(r.Contains(name));
  CHECK(r.size() == 16);

  std::istringstream in(
      "# extras\n"
      "greater_than\t2\t0\tboolean\tvar,literal\n"
      "status\t1\t0\tattribute\n");
  PredicateRegistry ext = PredicateRegistry::Load(in, "test");
  CHECK(ext.size() == 18);
  CHECK(ext.Find("greater_than")->arg_kinds[1] == ArgKind::kLiteral);
  CHECK(ext.Find("status")->arg_kinds[0] == ArgKind::kAny);

  std::istringstream zero("bad\t0\t0\tset\n");
  CHECK_THROWS_AS(PredicateRegistry::Load(zero, "test"), DataError);
  std::istringstream cat("bad\t1\t0\tweird\n");
  CHECK_THROWS_AS(PredicateRegistry::Load(cat, "test"), DataError);

  std::istringstream round(ext.ToText());
  PredicateRegistry again = PredicateRegistry::Load(round, "round");
  CHECK(again.ToText() == ext.ToText());
}

TEST_CASE("property: print/parse round trip on random forms") {
  testing::RandomLf gen(20240601);
  for (int i = 0; i < 10000; ++i) {
    LF t = gen.Next();
    std::string text = PrintLf(t);
    LF back = ParseLf(text, Reg());
    REQUIRE_MESSAGE(back == t, text);
    CHECK(PrintLf(back) == text);
  }
}

TEST_CASE("property: strip is idempotent and keeps the label") {
  testing::RandomLf gen(7);
  for (int i = 0; i < 500; ++i) {
    LF t = gen.Next();
    LF once = StripTimeFrames(t);
    CHECK(StripTimeFrames(once) == once);
    CHECK(OutermostLabel(once) == OutermostLabel(t));
    ValidateLf(once, Reg());
  }
}

TEST_CASE("property: exact match is an equivalence") {
  testing::RandomLf gen(11);
  std::vector<LF> forms;
  for (int i = 0; i < 60; ++i) forms.push_back(gen.Next());
  forms.push_back(forms[3]);
  for (const LF &a : forms) {
    CHECK(ExactMatch(a, a));
    for (const LF &b : forms) {
      CHECK(ExactMatch(a, b) == ExactMatch(b, a));
      CHECK(ExactMatch(a, b) == (a == b));
      for (int k = 0; k < 5; ++k) {
        const LF &c = forms[(k * 13) % forms.size()];
        if (ExactMatch(a, b) && ExactMatch(b, c)) CHECK(ExactMatch(a, c));
      }
    }
  }
}

}  // namespace
}  // namespace lambdaehr
