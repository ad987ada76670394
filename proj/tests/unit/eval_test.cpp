#include "doctest.h"
#include "generator.hpp"
#include "helpers.hpp"
#include "lc/eval.hpp"
#include "properties.hpp"

using namespace lc;
using lc::unit::free_named;

namespace {

SourceProgram demo(const std::string& name) {
  return parse_program(testing::read_text(lc::unit::kRoot + "/demos/" + name));
}

EvalReport run(const PreparedProgram& p, Semantics s, bool assert_states = false) {
  EvalOptions opts;
  opts.sigs = &p.sigs;
  opts.semantics = s;
  opts.assert_states = assert_states;
  opts.expected_type = p.ty;
  return evaluate(p.main, opts);
}

}  // namespace

TEST_CASE("sharing translation") {
  ExprPtr e = parse_program("f (g y)").main;
  ExprPtr t = introduce_sharing(e);
  const auto* l = std::get_if<Let>(&t->node);
  REQUIRE(l);
  CHECK(pretty_expr(l->bind.rhs) == "g y");
  const auto* app = std::get_if<App>(&l->body->node);
  REQUIRE(app);
  const auto* arg = std::get_if<Var>(&app->arg->node);
  REQUIRE(arg);
  CHECK(arg->name == l->bind.var);

  CHECK(pretty_expr(introduce_sharing(parse_program("x").main)) == "x");

  // Constructor arguments are let-bound and the constructor applied to variables.
  ExprPtr k = introduce_sharing(parse_program("data Pair = MkPair a@1 b@1;\nMkPair (f x) (g y)").main);
  int lets = 0;
  while (const auto* kl = std::get_if<Let>(&k->node)) {
    ++lets;
    k = kl->body;
  }
  CHECK(lets == 2);
  CHECK(is_whnf(k));
}

TEST_CASE("checked sharing translation annotates the new bindings") {
  SourceProgram p = parse_program("data P = MkP a@1 b@1;\nassume f :w a ->@1 a;\nassume x :1 a;\nassume y :1 b;\nMkP (f x) y");
  ExprPtr t = translate_sharing(Signatures(p.decls), initial_context(p), p.main);
  const auto* l = std::get_if<Let>(&t->node);
  REQUIRE(l);
  REQUIRE(l->bind.env);
  CHECK(l->bind.env->size() == 1);
  CHECK(l->bind.env->entries().front().key.name.text == "x");
  CHECK(l->bind.ty);
}

TEST_CASE("natural semantics memoises") {
  SourceProgram p = parse_program("data Unit = MkUnit;\nlet x : Unit = MkUnit in x");
  PreparedProgram prepared = prepare_for_eval(p);
  EvalReport r = run(prepared, Semantics::Natural);
  CHECK(r.readback == "MkUnit");
}

TEST_CASE("instrumented semantics erases a forced linear binding") {
  Name x = fresh_name("x");
  SourceProgram p = parse_program("data Unit = U;\nU");
  Signatures sigs(p.decls);
  EvalEnv theta;
  theta.bindings[x] = HeapBinding{HeapBinding::Ann::LinearOne, {}, data_ty("Unit"), ctor_e("U"), std::nullopt};
  EvalOutcome out = eval_instrumented(sigs, theta, var_e(x), 100);
  const auto* v = std::get_if<Value>(&out);
  REQUIRE(v);
  CHECK(pretty_expr(v->whnf) == "U");
  CHECK_FALSE(v->env.bindings.contains(x));

  EvalOutcome nat = eval_natural(sigs, theta, var_e(x), 100);
  REQUIRE(std::holds_alternative<Value>(nat));
  CHECK(std::get<Value>(nat).env.bindings.contains(x));
}

TEST_CASE("double force gets stuck") {
  SourceProgram p = demo("double_force.lc");
  CHECK_FALSE(check_program(p).ok());
  Signatures sigs(p.decls);
  EvalOutcome out = eval_instrumented(sigs, {}, introduce_sharing(p.main), 1000);
  const auto* s = std::get_if<Stuck>(&out);
  REQUIRE(s);
  CHECK(s->reason == Stuck::Reason::DoubleForce);
  CHECK(s->name == "x");
  // Without linearity the same term evaluates.
  CHECK(std::holds_alternative<Value>(eval_natural(sigs, {}, introduce_sharing(p.main), 1000)));
}

TEST_CASE("a state that uses a linear binding twice is ill typed") {
  SourceProgram p = parse_program("data Unit = U;\ncase x of a { U => x }");
  Signatures sigs(p.decls);
  Name x = free_named(p.main, "x");
  MachineState st;
  st.theta.bindings[x] = HeapBinding{HeapBinding::Ann::LinearOne, {}, data_ty("Unit"), ctor_e("U"), std::nullopt};
  st.focus = p.main;
  CheckResult r = check_state_welltyped(sigs, st, data_ty("Unit"));
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->render() == "LinearityViolation: DoubleUse x");

  MachineState fine;
  fine.theta = st.theta;
  fine.focus = var_e(x);
  CHECK(check_state_welltyped(sigs, fine, data_ty("Unit")).ok());
}

TEST_CASE("heap expansion") {
  Name x = fresh_name("x"), y = fresh_name("y"), a = fresh_name("a");
  ExprPtr body = var_e(x);
  CHECK(expand_env({}, body) == body);

  EvalEnv lin;
  lin.bindings[x] = HeapBinding{HeapBinding::Ann::LinearOne, {}, data_ty("S"), var_e(y), std::nullopt};
  lin.bindings[y] = HeapBinding{HeapBinding::Ann::Omega, {}, data_ty("S"), ctor_e("U"), std::nullopt};
  ExprPtr e = expand_env(lin, body);
  // let y = U in (\(x :1 S). x) y
  const auto* outer = std::get_if<Let>(&e->node);
  REQUIRE(outer);
  CHECK(outer->bind.var == y);
  const auto* app = std::get_if<App>(&outer->body->node);
  REQUIRE(app);
  const auto* lam = std::get_if<Abs>(&app->fun->node);
  REQUIRE(lam);
  CHECK(lam->var == x);
  CHECK(lam->mult.is_one());

  EvalEnv delta;
  UsageEnv env;
  env.insert(UsageEntry{ResourceKey{a, 0, {}}, Mult::one()});
  delta.bindings[x] = HeapBinding{HeapBinding::Ann::Delta, env, data_ty("S"), ctor_e("U"), std::nullopt};
  ExprPtr wrapped = expand_env(delta, body);
  const auto* l = std::get_if<Let>(&wrapped->node);
  REQUIRE(l);
  REQUIRE(l->bind.env);
  CHECK(*l->bind.env == env);
}

TEST_CASE("demos evaluate with every state re-checked") {
  struct Expected {
    const char* file;
    const char* value;
  };
  for (auto [file, value] : {Expected{"f6_closed.lc", "MkBA(B1, A2)"}, Expected{"handle.lc", "Open"},
                             Expected{"letrec.lc", "False"}, Expected{"sharing.lc", "U"},
                             Expected{"shared_result.lc", "True"}, Expected{"shared_thunk.lc", "True"}}) {
    CAPTURE(file);
    PreparedProgram p = prepare_for_eval(demo(file));
    EvalReport nat = run(p, Semantics::Natural);
    EvalReport ins = run(p, Semantics::Instrumented, true);
    CHECK(nat.readback == value);
    CHECK(ins.readback == value);
    CHECK(ins.states_checked > 0);
    CHECK_MESSAGE(ins.state_failures == 0, ins.first_state_failure);
    CHECK(differential_run(p).agree);
  }
}

TEST_CASE("a linear beta result may be shared") {
  // The argument carries no resources, so the result can be duplicated.
  PreparedProgram p = prepare_for_eval(demo("shared_result.lc"));
  EvalReport r = run(p, Semantics::Instrumented, true);
  CHECK(std::holds_alternative<Value>(r.outcome));
}

TEST_CASE("sharing is observable") {
  SourceProgram p = demo("sharing.lc");
  PreparedProgram prepared = prepare_for_eval(p);
  CHECK(run(prepared, Semantics::Natural).rhs_entries.at("shared") == 1);
  CHECK(run(prepared, Semantics::Instrumented).rhs_entries.at("shared") == 1);
  CHECK(testing::call_by_name_rhs_evaluations(p, "shared") == 2);
}

TEST_CASE("fuel is reported") {
  SourceProgram p = parse_program("data Unit = U;\nletrec loop : Unit = loop;\nin loop");
  PreparedProgram prepared = prepare_for_eval(p);
  EvalOptions opts;
  opts.sigs = &prepared.sigs;
  opts.fuel = 50;
  EvalOutcome out = evaluate(prepared.main, opts).outcome;
  CHECK_FALSE(std::holds_alternative<Value>(out));
}

TEST_CASE("generated programs: progress, preservation, bisimulation") {
  std::size_t run_count = 0;
  for (std::uint64_t seed = 500; run_count < 40; ++seed) {
    testing::TypedGenerator g(seed);
    SourceProgram src = g.closed_program();
    if (!check_program(src).ok()) continue;
    ++run_count;
    PreparedProgram p = prepare_for_eval(src);
    EvalReport r = run(p, Semantics::Instrumented, run_count <= 10);
    CAPTURE(pretty_print(src));
    CHECK_FALSE(std::holds_alternative<Stuck>(r.outcome));
    CHECK_MESSAGE(r.state_failures == 0, r.first_state_failure);
    DiffReport d = differential_run(p, 200000);
    CHECK_MESSAGE(d.agree, d.message);
  }
}
