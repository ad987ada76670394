#include "lc/eval.hpp"

namespace lc {

namespace {

struct Translated {
  std::vector<Binding> lets;  // outermost first
  ExprPtr body;
};

ExprPtr wrap_lets(const std::vector<Binding>& lets, ExprPtr body) {
  for (auto it = lets.rbegin(); it != lets.rend(); ++it) body = make_expr(Let{*it, std::move(body)});
  return body;
}

ExprPtr translate(const ExprPtr& e);

// Let-binds the non-variable arguments of an application spine; the lets are
// returned separately so a constructor scrutinee can keep its WHNF shape.
Translated translate_spine(const ExprPtr& e) {
  Spine sp = spine_of(e);
  Translated out;
  ExprPtr cur = translate(sp.head);
  for (const auto& a : sp.args) {
    if (const auto* m = std::get_if<Mult>(&a)) {
      cur = make_expr(MultApp{cur, *m});
      continue;
    }
    const ExprPtr& arg = std::get<ExprPtr>(a);
    if (std::holds_alternative<Var>(arg->node)) {
      cur = app_e(cur, arg);
      continue;
    }
    Name t = fresh_name("t");
    out.lets.push_back(Binding{t, std::nullopt, nullptr, translate(arg)});
    cur = app_e(cur, var_e(t));
  }
  out.body = cur;
  return out;
}

ExprPtr translate(const ExprPtr& e) {
  return std::visit(
      Overload{
          [&](const Var&) { return e; },
          [&](const Ctor&) { return e; },
          [&](const MultAbs& m) { return make_expr(MultAbs{m.binder, translate(m.body)}, e->id); },
          [&](const Abs& a) { return make_expr(Abs{a.var, a.mult, a.ty, translate(a.body)}, e->id); },
          [&](const App&) {
            Translated t = translate_spine(e);
            return wrap_lets(t.lets, t.body);
          },
          [&](const MultApp&) {
            Translated t = translate_spine(e);
            return wrap_lets(t.lets, t.body);
          },
          [&](const Let& l) {
            Binding b = l.bind;
            b.rhs = translate(b.rhs);
            return make_expr(Let{std::move(b), translate(l.body)}, e->id);
          },
          [&](const LetRec& l) {
            std::vector<Binding> binds = l.binds;
            for (auto& b : binds) b.rhs = translate(b.rhs);
            return make_expr(LetRec{std::move(binds), translate(l.body)}, e->id);
          },
          [&](const Case& c) {
            Case out = c;
            out.alts.clear();
            for (const auto& a : c.alts) out.alts.push_back(Alt{a.pat, translate(a.rhs)});
            if (is_whnf_head(c.scrut)) {
              Translated t = translate_spine(c.scrut);
              out.scrut = t.body;
              return wrap_lets(t.lets, make_expr(std::move(out), e->id));
            }
            out.scrut = translate(c.scrut);
            return make_expr(std::move(out), e->id);
          },
      },
      e->node);
}

}  // namespace

ExprPtr introduce_sharing(const ExprPtr& e) { return translate(e); }

ExprPtr translate_sharing(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e) {
  ExprPtr t = strip_usage_annotations(translate(e));
  AnnotationMap anns;
  CheckOptions opts;
  opts.annotations_out = &anns;
  CheckResult r = check_expr(sigs, ctx, t, opts);
  if (!r.ok()) throw std::runtime_error("sharing translation does not re-check: " + r.error->render());
  return fill_annotations(t, anns);
}

PreparedProgram prepare_for_eval(const SourceProgram& p) {
  if (!p.assumptions.empty()) throw std::runtime_error("evaluation needs a closed program (found assumptions)");
  CheckResult r = check_program(p);
  if (!r.ok()) throw std::runtime_error(r.error->render());
  PreparedProgram out;
  out.sigs = Signatures(p.decls);
  out.main = translate_sharing(out.sigs, TypingCtx{}, p.main);
  out.ty = r.ty;
  return out;
}

DiffReport differential_run(const PreparedProgram& p, std::size_t fuel) {
  EvalOptions opts;
  opts.sigs = &p.sigs;
  opts.fuel = fuel;
  opts.semantics = Semantics::Natural;
  EvalReport nat = evaluate(p.main, opts);
  opts.semantics = Semantics::Instrumented;
  EvalReport ins = evaluate(p.main, opts);

  DiffReport d;
  d.natural = nat.readback;
  d.instrumented = ins.readback;
  d.natural_fuel = std::holds_alternative<FuelExhausted>(nat.outcome);
  d.instrumented_fuel = std::holds_alternative<FuelExhausted>(ins.outcome);
  if (const auto* s = std::get_if<Stuck>(&ins.outcome)) d.stuck = *s;
  if (const auto* s = std::get_if<Stuck>(&nat.outcome)) d.stuck = *s;
  if (d.stuck) {
    d.message = "stuck: " + to_string(d.stuck->reason) + " " + d.stuck->name;
  } else if (d.natural_fuel || d.instrumented_fuel) {
    d.agree = d.natural_fuel && d.instrumented_fuel;
    if (!d.agree) d.message = "only one semantics ran out of fuel";
  } else {
    d.agree = d.natural == d.instrumented;
    if (!d.agree) d.message = "natural " + d.natural + " vs instrumented " + d.instrumented;
  }
  return d;
}

}  // namespace lc
