#include "doctest.h"
#include "helpers.hpp"
#include "properties.hpp"

using namespace lc;
using lc::unit::verdict;

TEST_CASE("corpus verdicts") {
  for (const auto& f : testing::load_corpus(lc::unit::kRoot + "/corpus")) {
    CAPTURE(f.name);
    CheckResult r = check_program(parse_program(f.text));
    if (f.expect == "accept") {
      CHECK_MESSAGE(r.ok(), (r.ok() ? "" : r.error->render()));
    } else {
      REQUIRE_FALSE(r.ok());
      CHECK(r.error->kind == TypeError::Kind::LinearityViolation);
    }
  }
}

TEST_CASE("specific corpus errors") {
  auto render = [](const char* name) {
    CheckResult r = check_program(parse_program(testing::read_text(lc::unit::kRoot + "/corpus/" + name)));
    return r.ok() ? std::string("ok: ") + pretty_type(r.ty) : r.error->render();
  };
  CHECK(render("f7.lc") == "ok: c");
  CHECK(render("f8.lc") == "LinearityViolation: DoubleUse x");
  CHECK(render("f1.lc").rfind("LinearityViolation", 0) == 0);
}

TEST_CASE("basic rules") {
  CHECK(verdict("\\(x :1 a). x") == "ok: a ->@1 a");
  CHECK(verdict("data Unit = U;\n\\(x :1 a). U") == "LinearityViolation: Discarded x");
  CHECK(verdict("assume w :w a;\nw") == "ok: a");
  // Linear resources cannot flow into an unrestricted argument or field.
  CHECK(verdict("assume x :1 a;\nassume f :w a ->@w a;\nf x").rfind("MultiplicityMismatch", 0) == 0);
  CHECK(verdict("data Box = B a@w;\nassume x :1 a;\nB x").rfind("MultiplicityMismatch", 0) == 0);
  CHECK(verdict("/\\p. \\(x :p a). x") == "ok: forall p. a ->@p a");
  CHECK(verdict("\\(x :q a). x").rfind("IllFormedMult", 0) == 0);
}

TEST_CASE("delta-bound variables consume their environment") {
  const char* both = "data P = MkP a@1 b@1;\nassume x :1 a;\nassume y :1 b;\nlet u = MkP x y in u";
  CHECK(verdict(both) == "ok: P");
  const char* twice =
      "data P = MkP a@1 b@1;\ndata Q = MkQ P@1 P@1;\nassume x :1 a;\nassume y :1 b;\nlet u = MkP x y in MkQ u u";
  CHECK(verdict(twice).rfind("LinearityViolation", 0) == 0);
  const char* mixed = "data P = MkP a@1 b@1;\ndata Q = MkQ P@1 a@1;\nassume x :1 a;\nassume y :1 b;\nlet u = MkP x y in MkQ u x";
  CHECK(verdict(mixed).rfind("LinearityViolation", 0) == 0);
}

TEST_CASE("infer with a delta-bound variable in the context") {
  Name x = fresh_name("x"), y = fresh_name("y"), u = fresh_name("u");
  TypingCtx ctx;
  UsageEnv env;
  env.insert(UsageEntry{ResourceKey{x, 0, {}}, Mult::one()});
  env.insert(UsageEntry{ResourceKey{y, 0, {}}, Mult::one()});
  ctx.gamma[u] = DeltaBound{data_ty("S"), env};
  ctx.delta[ResourceKey{x, 0, {}}] = ResourceInfo{data_ty("a"), Mult::one()};
  ctx.delta[ResourceKey{y, 0, {}}] = ResourceInfo{data_ty("b"), Mult::one()};
  InferOutcome out = infer(Signatures{}, ctx, var_e(u));
  REQUIRE(out.ok());
  CHECK(alpha_eq(out.ty, data_ty("S")));
  CHECK(out.delta_out.empty());
}

TEST_CASE("multiplicity well-formedness") {
  TypingCtx ctx;
  Name p = fresh_name("p"), q = fresh_name("q");
  ctx.gamma[p] = MultVarEntry{};
  CHECK(mult_wf(ctx, Mult::one()));
  CHECK(mult_wf(ctx, Mult::of_var(p)));
  CHECK_FALSE(mult_wf(ctx, Mult::of_var(q)));
}

TEST_CASE("case expressions") {
  // f11: no linear fields, so the binder is unrestricted.
  CHECK(verdict("data Unit = MkUnit;\nassume pair :w Unit ->@1 Unit ->@1 Unit;\nassume x :1 Unit;\n"
                "case x of z { MkUnit => pair z z }") == "ok: Unit");
  // f10: a non-WHNF scrutinee consumed through the binder.
  CHECK(verdict("data P = MkP a@1 b@1;\nassume use :w a ->@1 b ->@1 P;\nassume x :1 a;\nassume y :1 b;\n"
                "case use x y of z { MkP p@1 q@1 => z }") == "ok: P");
  // f12: semantically fine, still rejected.
  CHECK(verdict("data K = K1 a@1 | K2;\nassume x :1 a;\ncase K1 x of z { K2 => x; K1 a@1 => x }")
            .rfind("LinearityViolation", 0) == 0);
  // A branch that drops a resource another branch consumes.
  CHECK(verdict("data Bool = True | False;\nassume b :w Bool;\nassume x :1 a;\nassume d :w a;\n"
                "case b of z { True => x; False => d }") == "LinearityViolation: Discarded x");
  // Direct use of an irrelevant resource.
  CHECK(verdict("data P = MkP a@1 b@1;\nassume use :w a ->@1 b ->@1 P;\nassume x :1 a;\nassume y :1 b;\n"
                "case use x y of z { MkP p@1 q@1 => use x y }")
            .rfind("LinearityViolation", 0) == 0);
}

TEST_CASE("whnf split") {
  SourceProgram p = parse_program("data P = MkP a@1 b@1;\nassume x :1 a;\nassume y :1 b;\nMkP x y");
  TypingCtx ctx = initial_context(p);
  Signatures sigs(p.decls);
  WhnfSplit s = check_whnf_split(sigs, ctx, p.main);
  REQUIRE_FALSE(s.error);
  REQUIRE(s.field_envs.size() == 2);
  CHECK(s.field_envs[0].size() == 1);
  CHECK(s.field_envs[0].entries().front().key.name.text == "x");
  CHECK(s.field_envs[1].entries().front().key.name.text == "y");

  SourceProgram lam = parse_program("data P = MkP a@1 b@1;\nassume x :1 a;\nassume y :1 b;\n\\(u :w c). MkP x y");
  WhnfSplit l = check_whnf_split(Signatures(lam.decls), initial_context(lam), lam.main);
  REQUIRE_FALSE(l.error);
  REQUIRE(l.field_envs.size() == 1);
  CHECK(l.field_envs[0].size() == 2);

  SourceProgram unit = parse_program("data Unit = MkUnit;\nMkUnit");
  CHECK(check_whnf_split(Signatures(unit.decls), {}, unit.main).field_envs.empty());
}

TEST_CASE("on-demand split") {
  Name x = fresh_name("x");
  Delta d;
  d[ResourceKey{x, 0, {}}] = ResourceInfo{data_ty("a"), Mult::one()};
  Delta split = split_on_demand(d, ResourceKey{x, 0, {}}, "K", 2);
  CHECK(split.size() == 2);
  CHECK(split.contains(ResourceKey{x, 0, {Tag{"K", 1, 2}}}));
  CHECK(split.contains(ResourceKey{x, 0, {Tag{"K", 2, 2}}}));
  CHECK(normalize(split).size() == 1);
  CHECK(normalize(split).contains(ResourceKey{x, 0, {}}));

  Delta irr;
  irr[ResourceKey{x, 1, {}}] = ResourceInfo{data_ty("a"), Mult::one()};
  Delta irr_split = split_on_demand(irr, ResourceKey{x, 1, {}}, "K", 2);
  CHECK(irr_split.contains(ResourceKey{x, 1, {Tag{"K", 1, 2}}}));

  CHECK_THROWS(split_on_demand(d, ResourceKey{x, 0, {}}, "K", 0));
}

TEST_CASE("normalize merges a complete fragment set even when it owns the last key") {
  Name x = fresh_name("x");
  Delta d;
  for (int j = 1; j <= 3; ++j) d[ResourceKey{x, 0, {Tag{"K", j, 3}}}] = ResourceInfo{data_ty("a"), Mult::one()};
  Delta n = normalize(d);
  CHECK(n.size() == 1);
  CHECK(n.contains(ResourceKey{x, 0, {}}));
}

TEST_CASE("recursive bindings") {
  CHECK(verdict(testing::read_text(lc::unit::kRoot + "/corpus/f3.lc")) == "ok: a");
  CHECK(verdict("data Bool = True | False;\nassume x :1 a;\nletrec g : Bool ->@w a = \\(b :w Bool). x;\nin g True") ==
        "ok: a");
  // The inferred environment of go is {x}.
  SourceProgram p = parse_program(testing::read_text(lc::unit::kRoot + "/corpus/f3.lc"));
  AnnotationMap anns;
  CheckOptions opts;
  opts.annotations_out = &anns;
  REQUIRE(check_program(p, opts).ok());
  ExprPtr filled = fill_annotations(p.main, anns);
  const auto* rec = std::get_if<LetRec>(&filled->node);
  REQUIRE(rec);
  REQUIRE(rec->binds.at(0).env);
  REQUIRE(rec->binds[0].env->size() == 1);
  CHECK(rec->binds[0].env->entries().front().key.name.text == "x");
}

TEST_CASE("lemma conversions preserve verdicts") {
  auto check = [](const testing::PropertyStats& s) {
    CHECK(s.instances == 100);
    CHECK_MESSAGE(s.failures == 0, s.first_failure);
  };
  check(testing::lemma_linear_delta(42, 100));
  check(testing::lemma_delta_linear(42, 100));
  check(testing::lemma_omega_delta(42, 100));
  check(testing::lemma_irrelevance(42, 100));
}
