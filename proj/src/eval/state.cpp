#include <algorithm>
#include <functional>

#include "lc/eval.hpp"

namespace lc {

namespace {

using Ann = HeapBinding::Ann;

// Strongly connected components of the binding graph, dependencies first.
std::vector<std::vector<Name>> components(const std::map<Name, HeapBinding>& heap,
                                          const std::map<Name, std::set<Name>>& deps) {
  std::map<Name, int> index;
  std::map<Name, int> low;
  std::set<Name> on_stack;
  std::vector<Name> stack;
  std::vector<std::vector<Name>> out;
  int counter = 0;

  std::function<void(const Name&)> visit = [&](const Name& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& w : deps.at(v)) {
      if (!index.contains(w)) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.contains(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<Name> comp;
      Name w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        comp.push_back(w);
      } while (!(w == v));
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (const auto& [n, _] : heap) {
    if (!index.contains(n)) visit(n);
  }
  return out;
}

ExprPtr wrap(const std::map<Name, HeapBinding>& heap, const std::vector<Name>& comp,
             const std::map<Name, std::set<Name>>& deps, ExprPtr body) {
  const Name& x = comp.front();
  const HeapBinding& b = heap.at(x);
  bool cyclic = comp.size() > 1 || deps.at(x).contains(x);
  if (!cyclic) {
    if (b.ann == Ann::LinearOne) return app_e(abs_e(x, Mult::one(), b.ty, std::move(body)), b.rhs);
    std::optional<UsageEnv> env;
    if (b.ann == Ann::Delta) env = b.env;
    return make_expr(Let{Binding{x, env, b.ty, b.rhs}, std::move(body)});
  }
  std::vector<Binding> binds;
  for (const auto& n : comp) {
    const HeapBinding& m = heap.at(n);
    std::optional<UsageEnv> env;
    if (m.ann == Ann::Delta) env = m.env;
    binds.push_back(Binding{n, env, m.ty, m.rhs});
  }
  return make_expr(LetRec{std::move(binds), std::move(body)});
}

}  // namespace

ExprPtr expand_env(const EvalEnv& theta, const ExprPtr& e) {
  // Unforced linear bindings are always kept: dropping one would hide a
  // resource that was never consumed. Everything else is kept only if reachable.
  std::set<Name> keep;
  std::vector<Name> work;
  auto reach = [&](const Name& n) {
    if (theta.bindings.contains(n) && keep.insert(n).second) work.push_back(n);
  };
  for (const auto& n : free_vars(e)) reach(n);
  for (const auto& [n, b] : theta.bindings) {
    if (b.ann == Ann::LinearOne) reach(n);
  }
  while (!work.empty()) {
    Name n = work.back();
    work.pop_back();
    for (const auto& m : free_vars(theta.bindings.at(n).rhs)) reach(m);
  }

  std::map<Name, HeapBinding> heap;
  std::map<Name, std::set<Name>> deps;
  for (const auto& n : keep) {
    heap.emplace(n, theta.bindings.at(n));
    deps[n];
    for (const auto& m : free_vars(theta.bindings.at(n).rhs)) {
      if (keep.contains(m)) deps[n].insert(m);
    }
  }
  auto comps = components(heap, deps);
  ExprPtr out = e;
  for (auto it = comps.rbegin(); it != comps.rend(); ++it) out = wrap(heap, *it, deps, out);
  return out;
}

// The focus and the continuation are typed as a tuple of segments. A case
// frame whose scrutinee was not in WHNF starts a new segment: its hole becomes
// a free variable standing for the scrutinee's value, linear when the case
// originally consumed resources and unrestricted otherwise. Other frames are
// plugged.
CheckResult check_state_welltyped(const Signatures& sigs, const MachineState& state, const TypePtr& expected) {
  EvalEnv theta = state.theta;
  TypingCtx ctx;
  std::vector<ExprPtr> segments;
  std::vector<TypePtr> segment_types;
  ExprPtr term = state.focus;
  for (auto it = state.stack.rbegin(); it != state.stack.rend(); ++it) {
    switch (it->kind) {
      case Frame::Kind::Arg: term = app_e(term, var_e(it->var)); break;
      case Frame::Kind::MultArg: term = make_expr(MultApp{term, it->mult}); break;
      case Frame::Kind::Case: {
        Case c = std::get<Case>(it->case_node->node);
        bool split = expected && c.ty && !is_whnf(c.scrut);
        if (split) {
          segments.push_back(term);
          segment_types.push_back(c.ty);
          Name hole = fresh_name("hole");
          if (c.env && !c.env->empty()) {
            ctx.delta[ResourceKey{hole, 0, {}}] = ResourceInfo{c.ty, Mult::one()};
          } else {
            ctx.gamma[hole] = Unrestricted{c.ty};
          }
          term = var_e(hole);
        }
        c.scrut = term;
        c.env.reset();
        term = make_expr(std::move(c));
        break;
      }
      case Frame::Kind::Scope: break;
      case Frame::Kind::Update: {
        // The forced occurrence is replaced by the evaluation in progress; the
        // variable keeps its original right-hand side for any other reference.
        if (it->binding.ann != HeapBinding::Ann::LinearOne) theta.bindings[it->var] = it->binding;
        break;
      }
    }
  }

  if (segments.empty()) {
    ExprPtr closed = strip_usage_annotations(expand_env(theta, term));
    CheckResult r = check_expr(sigs, ctx, closed);
    if (r.ok() && expected && !alpha_eq(r.ty, expected)) {
      r.error = TypeError{TypeError::Kind::TypeMismatch, TypeError::Linearity::None, 0, {},
                          "state has type " + show(r.ty) + ", expected " + show(expected)};
    }
    return r;
  }

  segments.push_back(term);
  segment_types.push_back(expected);
  std::vector<DataDecl> decls = sigs.decls();
  DataDecl tuple{"EvalState#", {}, {CtorDecl{"EvalState#", {}}}};
  for (const auto& t : segment_types) tuple.ctors[0].fields.push_back(Field{t, Mult::one()});
  decls.push_back(std::move(tuple));
  Signatures with_tuple(std::move(decls));
  ExprPtr tuple_term = ctor_e("EvalState#");
  for (const auto& seg : segments) tuple_term = app_e(tuple_term, seg);
  ExprPtr closed = strip_usage_annotations(expand_env(theta, tuple_term));
  CheckResult r = check_expr(with_tuple, ctx, closed);
  if (r.ok()) r.ty = expected;
  return r;
}

}  // namespace lc
