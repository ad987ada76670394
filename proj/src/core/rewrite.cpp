#include <algorithm>
#include <functional>

#include "lc/ir.hpp"

namespace lc {

namespace {

void collect_type_mvars(const TypePtr& t, std::set<Name>& bound, std::set<Name>& out);

void collect_mult(const Mult& m, const std::set<Name>& bound, std::set<Name>& out) {
  if (m.is_var() && !bound.contains(m.var)) out.insert(m.var);
}

void collect_type_mvars(const TypePtr& t, std::set<Name>& bound, std::set<Name>& out) {
  if (!t) return;
  std::visit(Overload{
                 [&](const DataType& d) {
                   for (const auto& m : d.args) collect_mult(m, bound, out);
                 },
                 [&](const FunType& f) {
                   collect_type_mvars(f.arg, bound, out);
                   collect_mult(f.mult, bound, out);
                   collect_type_mvars(f.res, bound, out);
                 },
                 [&](const ForallType& f) {
                   bool added = bound.insert(f.binder).second;
                   collect_type_mvars(f.body, bound, out);
                   if (added) bound.erase(f.binder);
                 },
             },
             t->node);
}

// Walks an expression tracking bound term and multiplicity names.
struct FreeCollector {
  std::set<Name> bound_terms;
  std::set<Name> bound_mults;
  std::set<Name> terms;
  std::set<Name> mults;
  bool want_terms = true;
  bool want_mults = true;

  void type(const TypePtr& t) {
    if (want_mults) collect_type_mvars(t, bound_mults, mults);
  }
  void mult(const Mult& m) {
    if (want_mults) collect_mult(m, bound_mults, mults);
  }

  template <class F>
  void with_term(const Name& n, F&& f) {
    bool added = bound_terms.insert(n).second;
    f();
    if (added) bound_terms.erase(n);
  }

  void expr(const ExprPtr& e) {
    std::visit(Overload{
                   [&](const Var& v) {
                     if (want_terms && !bound_terms.contains(v.name)) terms.insert(v.name);
                   },
                   [&](const Ctor&) {},
                   [&](const MultAbs& m) {
                     bool added = bound_mults.insert(m.binder).second;
                     expr(m.body);
                     if (added) bound_mults.erase(m.binder);
                   },
                   [&](const MultApp& m) {
                     expr(m.fun);
                     mult(m.mult);
                   },
                   [&](const Abs& a) {
                     mult(a.mult);
                     type(a.ty);
                     with_term(a.var, [&] { expr(a.body); });
                   },
                   [&](const App& a) {
                     expr(a.fun);
                     expr(a.arg);
                   },
                   [&](const Let& l) {
                     type(l.bind.ty);
                     expr(l.bind.rhs);
                     with_term(l.bind.var, [&] { expr(l.body); });
                   },
                   [&](const LetRec& l) {
                     std::vector<Name> added;
                     for (const auto& b : l.binds) {
                       if (bound_terms.insert(b.var).second) added.push_back(b.var);
                     }
                     for (const auto& b : l.binds) {
                       type(b.ty);
                       expr(b.rhs);
                     }
                     expr(l.body);
                     for (const auto& n : added) bound_terms.erase(n);
                   },
                   [&](const Case& c) {
                     expr(c.scrut);
                     type(c.ty);
                     with_term(c.binder, [&] {
                       for (const auto& alt : c.alts) {
                         std::vector<Name> added;
                         if (const auto* con = std::get_if<ConPat>(&alt.pat)) {
                           for (const auto& b : con->binders) {
                             mult(b.mult);
                             if (bound_terms.insert(b.var).second) added.push_back(b.var);
                           }
                         }
                         expr(alt.rhs);
                         for (const auto& n : added) bound_terms.erase(n);
                       }
                     });
                   },
               },
               e->node);
  }
};

// Capture-avoiding simultaneous substitution of terms and multiplicities,
// optionally renaming every binder.
class Rewriter {
 public:
  bool freshen_all = false;
  bool strip_envs = false;
  std::map<Name, ExprPtr> terms;
  std::map<Name, Mult> mults;

  void prepare() {
    for (const auto& [_, s] : terms) {
      FreeCollector fc;
      fc.expr(s);
      avoid_.insert(fc.terms.begin(), fc.terms.end());
      avoid_.insert(fc.mults.begin(), fc.mults.end());
    }
    for (const auto& [_, m] : mults) {
      if (m.is_var()) avoid_.insert(m.var);
    }
  }

  Mult mult(const Mult& m) const {
    if (!m.is_var()) return m;
    auto it = mults.find(m.var);
    return it == mults.end() ? m : it->second;
  }

  TypePtr type(const TypePtr& t) {
    if (!t || mults.empty()) return t;
    return std::visit(Overload{
                          [&](const DataType& d) -> TypePtr {
                            std::vector<Mult> args;
                            for (const auto& m : d.args) args.push_back(mult(m));
                            return data_ty(d.tycon, std::move(args));
                          },
                          [&](const FunType& f) -> TypePtr {
                            return fun_ty(type(f.arg), mult(f.mult), type(f.res));
                          },
                          [&](const ForallType& f) -> TypePtr {
                            auto scope = enter_mult(f.binder);
                            TypePtr body = type(f.body);
                            Name b = scope.name;
                            leave_mult(scope);
                            return forall_ty(b, body);
                          },
                      },
                      t->node);
  }

  std::optional<UsageEnv> env(const std::optional<UsageEnv>& env) const {
    if (strip_envs || !env) return std::nullopt;
    UsageEnv out;
    for (auto e : env->entries()) {
      auto it = terms.find(e.key.name);
      if (it != terms.end()) {
        if (const auto* v = std::get_if<Var>(&it->second->node)) e.key.name = v->name;
      }
      e.mult = mult(e.mult);
      out.insert(std::move(e));
    }
    return out;
  }

  ExprPtr expr(const ExprPtr& e) {
    return std::visit(
        Overload{
            [&](const Var& v) -> ExprPtr {
              auto it = terms.find(v.name);
              return it == terms.end() ? e : it->second;
            },
            [&](const Ctor&) -> ExprPtr { return e; },
            [&](const MultAbs& m) -> ExprPtr {
              auto scope = enter_mult(m.binder);
              ExprPtr body = expr(m.body);
              Name b = scope.name;
              leave_mult(scope);
              return make_expr(MultAbs{b, body}, e->id);
            },
            [&](const MultApp& m) -> ExprPtr {
              return make_expr(MultApp{expr(m.fun), mult(m.mult)}, e->id);
            },
            [&](const Abs& a) -> ExprPtr {
              Mult m = mult(a.mult);
              TypePtr ty = type(a.ty);
              auto scope = enter_term(a.var);
              ExprPtr body = expr(a.body);
              Name x = scope.name;
              leave_term(scope);
              return make_expr(Abs{x, m, ty, body}, e->id);
            },
            [&](const App& a) -> ExprPtr { return make_expr(App{expr(a.fun), expr(a.arg)}, e->id); },
            [&](const Let& l) -> ExprPtr {
              Binding b{l.bind.var, env(l.bind.env), type(l.bind.ty), expr(l.bind.rhs)};
              auto scope = enter_term(l.bind.var);
              ExprPtr body = expr(l.body);
              b.var = scope.name;
              leave_term(scope);
              return make_expr(Let{std::move(b), body}, e->id);
            },
            [&](const LetRec& l) -> ExprPtr {
              std::vector<TermScope> scopes;
              for (const auto& b : l.binds) scopes.push_back(enter_term(b.var));
              std::vector<Binding> binds;
              for (std::size_t i = 0; i < l.binds.size(); ++i) {
                const auto& b = l.binds[i];
                binds.push_back(Binding{scopes[i].name, env(b.env), type(b.ty), expr(b.rhs)});
              }
              ExprPtr body = expr(l.body);
              for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) leave_term(*it);
              return make_expr(LetRec{std::move(binds), body}, e->id);
            },
            [&](const Case& c) -> ExprPtr {
              ExprPtr scrut = expr(c.scrut);
              auto cenv = env(c.env);
              TypePtr ty = type(c.ty);
              auto zscope = enter_term(c.binder);
              std::vector<Alt> alts;
              for (const auto& alt : c.alts) {
                if (const auto* con = std::get_if<ConPat>(&alt.pat)) {
                  std::vector<TermScope> scopes;
                  ConPat pat{con->ctor, {}};
                  for (const auto& b : con->binders) {
                    scopes.push_back(enter_term(b.var));
                    pat.binders.push_back(PatBinder{scopes.back().name, mult(b.mult)});
                  }
                  ExprPtr rhs = expr(alt.rhs);
                  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) leave_term(*it);
                  alts.push_back(Alt{std::move(pat), rhs});
                } else {
                  alts.push_back(Alt{WildPat{}, expr(alt.rhs)});
                }
              }
              Name z = zscope.name;
              leave_term(zscope);
              return make_expr(Case{scrut, z, std::move(cenv), ty, std::move(alts)}, e->id);
            },
        },
        e->node);
  }

 private:
  struct TermScope {
    Name original;
    Name name;
    std::optional<ExprPtr> saved;
  };
  struct MultScope {
    Name original;
    Name name;
    std::optional<Mult> saved;
  };

  std::set<Name> avoid_;

  TermScope enter_term(const Name& b) {
    TermScope s{b, b, std::nullopt};
    if (auto it = terms.find(b); it != terms.end()) {
      s.saved = it->second;
      terms.erase(it);
    }
    if (freshen_all || avoid_.contains(b)) {
      s.name = fresh_name(b.text);
      terms[b] = var_e(s.name);
    }
    return s;
  }
  void leave_term(const TermScope& s) {
    terms.erase(s.original);
    if (s.saved) terms[s.original] = *s.saved;
  }

  MultScope enter_mult(const Name& b) {
    MultScope s{b, b, std::nullopt};
    if (auto it = mults.find(b); it != mults.end()) {
      s.saved = it->second;
      mults.erase(it);
    }
    if (freshen_all || avoid_.contains(b)) {
      s.name = fresh_name(b.text);
      mults[b] = Mult::of_var(s.name);
    }
    return s;
  }
  void leave_mult(const MultScope& s) {
    mults.erase(s.original);
    if (s.saved) mults[s.original] = *s.saved;
  }
};

}  // namespace

std::set<Name> free_vars(const ExprPtr& e) {
  FreeCollector fc;
  fc.want_mults = false;
  fc.expr(e);
  return fc.terms;
}

std::set<Name> free_mult_vars(const ExprPtr& e) {
  FreeCollector fc;
  fc.want_terms = false;
  fc.expr(e);
  return fc.mults;
}

std::set<Name> free_mult_vars(const TypePtr& t) {
  std::set<Name> bound, out;
  collect_type_mvars(t, bound, out);
  return out;
}

std::set<Name> bound_vars(const ExprPtr& e) {
  std::set<Name> out;
  std::function<void(const ExprPtr&)> go = [&](const ExprPtr& x) {
    std::visit(Overload{
                   [&](const Var&) {},
                   [&](const Ctor&) {},
                   [&](const MultAbs& m) { go(m.body); },
                   [&](const MultApp& m) { go(m.fun); },
                   [&](const Abs& a) {
                     out.insert(a.var);
                     go(a.body);
                   },
                   [&](const App& a) {
                     go(a.fun);
                     go(a.arg);
                   },
                   [&](const Let& l) {
                     out.insert(l.bind.var);
                     go(l.bind.rhs);
                     go(l.body);
                   },
                   [&](const LetRec& l) {
                     for (const auto& b : l.binds) {
                       out.insert(b.var);
                       go(b.rhs);
                     }
                     go(l.body);
                   },
                   [&](const Case& c) {
                     go(c.scrut);
                     out.insert(c.binder);
                     for (const auto& alt : c.alts) {
                       if (const auto* con = std::get_if<ConPat>(&alt.pat)) {
                         for (const auto& b : con->binders) out.insert(b.var);
                       }
                       go(alt.rhs);
                     }
                   },
               },
               x->node);
  };
  go(e);
  return out;
}

ExprPtr subst_expr(const ExprPtr& e, const Name& x, const ExprPtr& s) {
  Rewriter r;
  r.terms[x] = s;
  r.prepare();
  return r.expr(e);
}

ExprPtr subst_exprs(const ExprPtr& e, const std::map<Name, ExprPtr>& s) {
  if (s.empty()) return e;
  Rewriter r;
  r.terms = s;
  r.prepare();
  return r.expr(e);
}

ExprPtr subst_mult(const ExprPtr& e, const Name& p, const Mult& pi) {
  Rewriter r;
  r.mults[p] = pi;
  r.prepare();
  return r.expr(e);
}

TypePtr subst_mult(const TypePtr& t, const Name& p, const Mult& pi) {
  Rewriter r;
  r.mults[p] = pi;
  r.prepare();
  return r.type(t);
}

Mult subst_mult(const Mult& m, const Name& p, const Mult& pi) {
  return m.is_var() && m.var == p ? pi : m;
}

ExprPtr freshen(const ExprPtr& e) {
  Rewriter r;
  r.freshen_all = true;
  return r.expr(e);
}

ExprPtr strip_usage_annotations(const ExprPtr& e) {
  Rewriter r;
  r.strip_envs = true;
  return r.expr(e);
}

bool is_whnf(const ExprPtr& e) {
  return std::visit(Overload{
                        [](const MultAbs&) { return true; },
                        [](const Abs&) { return true; },
                        [](const Ctor&) { return true; },
                        [](const App& a) { return is_whnf_head(a.fun); },
                        [](const MultApp& m) { return is_whnf_head(m.fun); },
                        [](const auto&) { return false; },
                    },
                    e->node);
}

bool is_whnf_head(const ExprPtr& e) {
  return std::visit(Overload{
                        [](const Ctor&) { return true; },
                        [](const App& a) { return is_whnf_head(a.fun); },
                        [](const MultApp& m) { return is_whnf_head(m.fun); },
                        [](const auto&) { return false; },
                    },
                    e->node);
}

Spine spine_of(const ExprPtr& e) {
  Spine s;
  ExprPtr cur = e;
  while (true) {
    if (const auto* a = std::get_if<App>(&cur->node)) {
      s.args.emplace_back(a->arg);
      cur = a->fun;
    } else if (const auto* m = std::get_if<MultApp>(&cur->node)) {
      s.args.emplace_back(m->mult);
      cur = m->fun;
    } else {
      break;
    }
  }
  std::reverse(s.args.begin(), s.args.end());
  s.head = cur;
  return s;
}

std::size_t expr_size(const ExprPtr& e) {
  return std::visit(Overload{
                        [](const Var&) -> std::size_t { return 1; },
                        [](const Ctor&) -> std::size_t { return 1; },
                        [](const MultAbs& m) { return 1 + expr_size(m.body); },
                        [](const MultApp& m) { return 1 + expr_size(m.fun); },
                        [](const Abs& a) { return 1 + expr_size(a.body); },
                        [](const App& a) { return 1 + expr_size(a.fun) + expr_size(a.arg); },
                        [](const Let& l) { return 1 + expr_size(l.bind.rhs) + expr_size(l.body); },
                        [](const LetRec& l) {
                          std::size_t n = 1 + expr_size(l.body);
                          for (const auto& b : l.binds) n += expr_size(b.rhs);
                          return n;
                        },
                        [](const Case& c) {
                          std::size_t n = 1 + expr_size(c.scrut);
                          for (const auto& a : c.alts) n += expr_size(a.rhs);
                          return n;
                        },
                    },
                    e->node);
}

}  // namespace lc
