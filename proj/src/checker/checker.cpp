#include "lc/checker.hpp"

#include <algorithm>

namespace lc {

std::string to_string(TypeError::Kind k) {
  switch (k) {
    case TypeError::Kind::UnboundVariable: return "UnboundVariable";
    case TypeError::Kind::LinearityViolation: return "LinearityViolation";
    case TypeError::Kind::UsageEnvMismatch: return "UsageEnvMismatch";
    case TypeError::Kind::MultiplicityMismatch: return "MultiplicityMismatch";
    case TypeError::Kind::NonExhaustiveCase: return "NonExhaustiveCase";
    case TypeError::Kind::TagMismatch: return "TagMismatch";
    case TypeError::Kind::IllFormedMult: return "IllFormedMult";
    case TypeError::Kind::TypeMismatch: return "TypeMismatch";
    case TypeError::Kind::WHNFRequired: return "WHNFRequired";
  }
  return "?";
}

std::string to_string(TypeError::Linearity l) {
  switch (l) {
    case TypeError::Linearity::None: return "";
    case TypeError::Linearity::DoubleUse: return "DoubleUse";
    case TypeError::Linearity::Discarded: return "Discarded";
    case TypeError::Linearity::LeftOver: return "LeftOver";
  }
  return "?";
}

std::string TypeError::kind_name() const { return to_string(kind); }

std::string TypeError::render() const {
  if (kind == Kind::LinearityViolation) {
    return kind_name() + ": " + to_string(linearity) + " " + subject;
  }
  return kind_name() + ": " + message;
}

namespace {

struct Failure {
  TypeError err;
};

[[noreturn]] void fail(TypeError::Kind k, NodeId node, std::string msg, std::string subject = {}) {
  throw Failure{TypeError{k, TypeError::Linearity::None, node, std::move(subject), std::move(msg)}};
}

[[noreturn]] void fail_lin(TypeError::Linearity l, NodeId node, const std::string& subject) {
  std::string msg;
  switch (l) {
    case TypeError::Linearity::DoubleUse: msg = "resource " + subject + " is used more than once"; break;
    case TypeError::Linearity::Discarded: msg = "resource " + subject + " is not consumed"; break;
    default: msg = "resource " + subject + " is left unconsumed"; break;
  }
  throw Failure{TypeError{TypeError::Kind::LinearityViolation, l, node, subject, msg}};
}

bool same_keys(const Delta& a, const Delta& b) {
  if (a.size() != b.size()) return false;
  return std::equal(a.begin(), a.end(), b.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; });
}

ResourceKey with_tag(ResourceKey k, const Tag& t) {
  k.tags.push_back(t);
  return k;
}

void collect_consumed(const ResourceKey& k, const ResourceInfo& info, const Delta& after, Delta& out) {
  if (after.contains(k)) return;
  const ResourceKey* desc = nullptr;
  for (auto it = after.lower_bound(k); it != after.end() && it->first.name == k.name; ++it) {
    if (it->first.tags.size() > k.tags.size() && is_prefix_of(k, it->first)) {
      desc = &it->first;
      break;
    }
  }
  if (!desc) {
    out.emplace(k, info);
    return;
  }
  const Tag& t = desc->tags[k.tags.size()];
  for (int j = 1; j <= t.arity; ++j) {
    collect_consumed(with_tag(k, Tag{t.ctor, j, t.arity}), info, after, out);
  }
}

// Resources of `before` that are absent from `after`, as maximal fragments.
Delta consumed_between(const Delta& before, const Delta& after) {
  Delta b = normalize(before);
  Delta a = normalize(after);
  Delta out;
  for (const auto& [k, info] : b) collect_consumed(k, info, a, out);
  return out;
}

class Checker {
 public:
  Checker(const Signatures& sigs, TypingCtx ctx, const CheckOptions& opts)
      : ctx(std::move(ctx)), sigs_(sigs), opts_(opts) {
    for (const auto& [k, _] : this->ctx.delta) linear_known_.insert(k.name);
  }

  TypingCtx ctx;

  TypePtr infer(const ExprPtr& e) {
    std::string din = opts_.trace ? show(ctx.delta) : std::string();
    const char* rule = "?";
    TypePtr ty = infer_node(e, rule);
    if (opts_.types_out) (*opts_.types_out)[e.get()] = ty;
    if (opts_.trace) opts_.trace->push_back(TraceRecord{rule, e->id, din, show(ctx.delta)});
    return ty;
  }

  WhnfSplit whnf_split(const ExprPtr& e) {
    WhnfSplit out;
    if (std::holds_alternative<Abs>(e->node) || std::holds_alternative<MultAbs>(e->node)) {
      Delta before = ctx.delta;
      out.ty = infer(e);
      out.field_envs.push_back(to_env(consumed_between(before, ctx.delta)));
      return out;
    }
    if (!is_whnf(e)) fail(TypeError::Kind::WHNFRequired, e->id, "expression is not in weak head normal form");
    std::vector<ExprPtr> nodes;
    ExprPtr head = e;
    while (true) {
      if (const auto* a = std::get_if<App>(&head->node)) {
        nodes.push_back(head);
        head = a->fun;
      } else if (const auto* m = std::get_if<MultApp>(&head->node)) {
        nodes.push_back(head);
        head = m->fun;
      } else {
        break;
      }
    }
    std::reverse(nodes.begin(), nodes.end());
    const auto& ctor = std::get<Ctor>(head->node);
    TypePtr t = infer(head);
    std::vector<UsageEnv> envs;
    Delta start = ctx.delta;
    for (const auto& n : nodes) {
      if (const auto* m = std::get_if<MultApp>(&n->node)) {
        t = instantiate(t, m->mult, n->id);
      } else {
        const auto& app = std::get<App>(n->node);
        const auto* ft = std::get_if<FunType>(&t->node);
        if (!ft) fail(TypeError::Kind::TypeMismatch, n->id, "constructor " + ctor.name + " applied to too many arguments");
        Delta before = ctx.delta;
        TypePtr ta = infer(app.arg);
        if (!alpha_eq(ta, ft->arg)) {
          fail(TypeError::Kind::TypeMismatch, app.arg->id,
               "constructor argument has type " + show(ta) + ", expected " + show(ft->arg));
        }
        if (ft->mult.is_many()) {
          if (!same_keys(normalize(before), normalize(ctx.delta))) {
            fail(TypeError::Kind::MultiplicityMismatch, app.arg->id,
                 "unrestricted field of " + ctor.name + " uses linear resources");
          }
        } else {
          envs.push_back(to_env(consumed_between(before, ctx.delta)));
        }
        t = ft->res;
      }
      if (opts_.types_out) (*opts_.types_out)[n.get()] = t;
    }
    out.ty = t;
    out.ctor = ctor.name;
    out.saturated_ctor = std::holds_alternative<DataType>(t->node);
    if (out.saturated_ctor) {
      out.field_envs = std::move(envs);
    } else {
      out.field_envs.push_back(to_env(consumed_between(start, ctx.delta)));
    }
    return out;
  }

  // Checks one alternative against the current context (the one after the
  // scrutinee). Returns the alternative's type; ctx.delta is its output.
  TypePtr alt(const Alt& alt, const AltMode& mode, const Name& z, const TypePtr& scrut_ty,
              const Delta& scrut_res, NodeId node) {
    TypingCtx outer = ctx;
    Delta added = mode.whnf ? scrut_res : incremented(scrut_res);
    for (const auto& [k, info] : added) ctx.delta[k] = info;
    UsageEnv z_env = to_env(added);
    std::vector<Name> scoped{z};
    std::vector<std::optional<GammaEntry>> saved{save(z)};
    if (const auto* con = std::get_if<ConPat>(&alt.pat)) {
      const auto* dt = std::get_if<DataType>(&scrut_ty->node);
      auto ref = sigs_.ctor(con->ctor);
      if (!dt || !ref || ref->decl->tycon != dt->tycon) {
        fail(TypeError::Kind::TypeMismatch, node,
             "pattern " + con->ctor + " does not match scrutinee type " + show(scrut_ty));
      }
      CtorSignature sig = sigs_.instantiate(con->ctor, dt->args);
      if (sig.fields.size() != con->binders.size()) {
        fail(TypeError::Kind::TypeMismatch, node,
             "pattern " + con->ctor + " binds " + std::to_string(con->binders.size()) + " variables, constructor has " +
                 std::to_string(sig.fields.size()) + " fields");
      }
      int n = static_cast<int>(sig.linear_indices.size());
      if (mode.whnf && static_cast<int>(mode.field_envs.size()) != n) {
        fail(TypeError::Kind::TypeMismatch, node, "scrutinee does not provide one environment per linear field");
      }
      if (n == 0) {
        for (const auto& [k, _] : added) ctx.delta.erase(k);
        z_env = UsageEnv{};
      }
      int j = 0;
      for (std::size_t i = 0; i < con->binders.size(); ++i) {
        const auto& b = con->binders[i];
        const auto& f = sig.fields[i];
        if (!(b.mult == f.mult)) {
          fail(TypeError::Kind::MultiplicityMismatch, node,
               "pattern variable " + b.var.text + " has multiplicity " + show(b.mult) + ", field has " + show(f.mult));
        }
        scoped.push_back(b.var);
        saved.push_back(save(b.var));
        if (f.mult.is_many()) {
          ctx.gamma[b.var] = Unrestricted{f.ty};
        } else {
          UsageEnv env = mode.whnf ? mode.field_envs[static_cast<std::size_t>(j)]
                                   : to_env(added).tagged(Tag{con->ctor, j + 1, n});
          ctx.gamma[b.var] = DeltaBound{f.ty, std::move(env)};
          ++j;
        }
      }
    }
    ctx.gamma[z] = DeltaBound{scrut_ty, z_env};

    AltSnapshot snap;
    if (opts_.on_alt) {
      snap.outer = outer;
      snap.at_rhs = ctx;
      snap.alt = alt;
      snap.mode = mode;
      snap.binder = z;
      snap.scrut_ty = scrut_ty;
      snap.scrut_resources = scrut_res;
    }
    TypePtr ty;
    try {
      ty = infer(alt.rhs);
      if (opts_.on_alt) snap.outcome = InferOutcome{ty, ctx.delta, std::nullopt};
      discharge(added, alt.rhs->id);
    } catch (const Failure& f) {
      if (opts_.on_alt) {
        if (!snap.outcome.ty) snap.outcome.error = f.err;
        opts_.on_alt(snap);
      }
      throw;
    }
    if (opts_.on_alt) {
      snap.accepted = true;
      opts_.on_alt(snap);
    }
    for (std::size_t i = scoped.size(); i-- > 0;) restore(scoped[i], saved[i]);
    return ty;
  }

  const Signatures& sigs() const { return sigs_; }

 private:
  const Signatures& sigs_;
  const CheckOptions& opts_;
  bool lenient_ = false;
  std::set<Name> linear_known_;

  std::optional<GammaEntry> save(const Name& n) const {
    auto it = ctx.gamma.find(n);
    if (it == ctx.gamma.end()) return std::nullopt;
    return it->second;
  }
  void restore(const Name& n, const std::optional<GammaEntry>& e) {
    if (e) {
      ctx.gamma[n] = *e;
    } else {
      ctx.gamma.erase(n);
    }
  }

  // Every scrutinee resource re-added for an alternative must be gone at its exit.
  void discharge(const Delta& added, NodeId node) {
    ctx.delta = normalize(std::move(ctx.delta));
    for (const auto& [k, _] : ctx.delta) {
      for (const auto& [a, _2] : added) {
        if (k.name != a.name || k.depth != a.depth) continue;
        if (is_prefix_of(k, a)) fail_lin(TypeError::Linearity::Discarded, node, a.name.text);
        if (is_prefix_of(a, k)) {
          fail(TypeError::Kind::TagMismatch, node,
               "fragment " + show(k) + " of " + a.name.text + " is left while its siblings were consumed",
               a.name.text);
        }
      }
    }
  }

  bool mult_ok(const Mult& m, const std::set<Name>& local) const {
    if (!m.is_var()) return true;
    if (local.contains(m.var)) return true;
    auto it = ctx.gamma.find(m.var);
    return it != ctx.gamma.end() && std::holds_alternative<MultVarEntry>(it->second);
  }

  void check_type(const TypePtr& t, NodeId node, std::set<Name>& local) const {
    std::visit(Overload{
                   [&](const DataType& d) {
                     const DataDecl* decl = sigs_.data(d.tycon);
                     std::size_t want = decl ? decl->params.size() : 0;
                     if (d.args.size() != want) {
                       fail(TypeError::Kind::TypeMismatch, node,
                            d.tycon + " expects " + std::to_string(want) + " multiplicity arguments");
                     }
                     for (const auto& m : d.args) {
                       if (!mult_ok(m, local)) fail(TypeError::Kind::IllFormedMult, node, "multiplicity " + show(m) + " is not in scope");
                     }
                   },
                   [&](const FunType& f) {
                     check_type(f.arg, node, local);
                     if (!mult_ok(f.mult, local)) fail(TypeError::Kind::IllFormedMult, node, "multiplicity " + show(f.mult) + " is not in scope");
                     check_type(f.res, node, local);
                   },
                   [&](const ForallType& f) {
                     bool added = local.insert(f.binder).second;
                     check_type(f.body, node, local);
                     if (added) local.erase(f.binder);
                   },
               },
               t->node);
  }
  void check_type(const TypePtr& t, NodeId node) const {
    std::set<Name> local;
    check_type(t, node, local);
  }

  TypePtr instantiate(const TypePtr& t, const Mult& m, NodeId node) {
    const auto* fa = std::get_if<ForallType>(&t->node);
    if (!fa) fail(TypeError::Kind::TypeMismatch, node, "multiplicity application to a term of type " + show(t));
    if (!mult_wf(ctx, m)) fail(TypeError::Kind::IllFormedMult, node, "multiplicity " + show(m) + " is not in scope");
    return subst_mult(fa->body, fa->binder, m);
  }

  // Removes exactly `k` from the linear context, splitting an ancestor if needed.
  void consume_key(const ResourceKey& k, NodeId node) {
    ctx.delta = normalize(std::move(ctx.delta));
    auto& d = ctx.delta;
    if (d.erase(k)) return;
    for (std::size_t len = k.tags.size(); len-- > 0;) {
      ResourceKey anc{k.name, k.depth, {k.tags.begin(), k.tags.begin() + static_cast<std::ptrdiff_t>(len)}};
      if (!d.contains(anc)) continue;
      ResourceKey cur = anc;
      for (std::size_t i = len; i < k.tags.size(); ++i) {
        try {
          d = split_on_demand(d, cur, k.tags[i].ctor, k.tags[i].arity);
        } catch (TypeError& e) {
          e.node = node;
          throw Failure{e};
        }
        cur.tags.push_back(k.tags[i]);
      }
      d.erase(k);
      return;
    }
    bool lower = false, other = false;
    for (const auto& [key, _] : d) {
      if (key.name != k.name) continue;
      if (key.depth == k.depth) {
        std::size_t p = 0;
        while (p < key.tags.size() && p < k.tags.size() && key.tags[p] == k.tags[p]) ++p;
        if (p < key.tags.size() && p < k.tags.size() && key.tags[p].ctor != k.tags[p].ctor) {
          fail(TypeError::Kind::TagMismatch, node,
               "resource " + show(k) + " was split at " + key.tags[p].ctor + ", not " + k.tags[p].ctor, k.name.text);
        }
      }
      if (key.depth < k.depth) {
        lower = true;
      } else {
        other = true;
      }
    }
    if (lower && !other) {
      fail(TypeError::Kind::UsageEnvMismatch, node,
           "usage environment expects " + show(k) + " but the resource is still relevant", k.name.text);
    }
    if (!linear_known_.contains(k.name) && !other && !lower) {
      fail(TypeError::Kind::UnboundVariable, node, "resource " + k.name.text + " is not in scope", k.name.text);
    }
    fail_lin(TypeError::Linearity::DoubleUse, node, k.name.text);
  }

  TypePtr infer_var(const Var& v, NodeId node, const char*& rule) {
    auto it = ctx.gamma.find(v.name);
    if (it != ctx.gamma.end()) {
      return std::visit(Overload{
                            [&](const Unrestricted& u) -> TypePtr {
                              rule = "Var_w";
                              return u.ty;
                            },
                            [&](const DeltaBound& b) -> TypePtr {
                              rule = "Var_Delta";
                              UsageEnv env = b.env;
                              TypePtr ty = b.ty;
                              for (const auto& e : env.entries()) consume_key(e.key, node);
                              return ty;
                            },
                            [&](const MultVarEntry&) -> TypePtr {
                              fail(TypeError::Kind::TypeMismatch, node, v.name.text + " is a multiplicity variable");
                            },
                        },
                        it->second);
    }
    ctx.delta = normalize(std::move(ctx.delta));
    ResourceKey k{v.name, 0, {}};
    auto d = ctx.delta.find(k);
    if (d != ctx.delta.end()) {
      rule = d->second.mult.is_var() ? "Var_p" : "Var_1";
      TypePtr ty = d->second.ty;
      ctx.delta.erase(d);
      return ty;
    }
    bool present = std::any_of(ctx.delta.begin(), ctx.delta.end(),
                               [&](const auto& kv) { return kv.first.name == v.name; });
    if (present || linear_known_.contains(v.name)) fail_lin(TypeError::Linearity::DoubleUse, node, v.name.text);
    fail(TypeError::Kind::UnboundVariable, node, "variable " + v.name.text + " is not in scope", v.name.text);
  }

  TypePtr infer_node(const ExprPtr& e, const char*& rule) {
    NodeId node = e->id;
    return std::visit(
        Overload{
            [&](const Var& v) { return infer_var(v, node, rule); },
            [&](const Ctor& c) -> TypePtr {
              rule = "Ctor";
              TypePtr t = sigs_.ctor_type(c.name);
              if (!t) fail(TypeError::Kind::UnboundVariable, node, "constructor " + c.name + " is not declared", c.name);
              return t;
            },
            [&](const MultAbs& m) -> TypePtr {
              rule = "MultAbs";
              auto old = save(m.binder);
              ctx.gamma[m.binder] = MultVarEntry{};
              TypePtr body = infer(m.body);
              restore(m.binder, old);
              return forall_ty(m.binder, body);
            },
            [&](const MultApp& m) -> TypePtr {
              rule = "MultApp";
              return instantiate(infer(m.fun), m.mult, node);
            },
            [&](const Abs& a) { return infer_abs(a, node, rule); },
            [&](const App& a) -> TypePtr {
              rule = "App";
              TypePtr tf = infer(a.fun);
              const auto* ft = std::get_if<FunType>(&tf->node);
              if (!ft) fail(TypeError::Kind::TypeMismatch, node, "applying a term of type " + show(tf));
              FunType f = *ft;
              Delta before = ctx.delta;
              TypePtr ta = infer(a.arg);
              if (f.mult.is_many() && !same_keys(normalize(before), normalize(ctx.delta))) {
                fail(TypeError::Kind::MultiplicityMismatch, a.arg->id,
                     "argument of an unrestricted function uses linear resources");
              }
              if (!alpha_eq(ta, f.arg)) {
                fail(TypeError::Kind::TypeMismatch, a.arg->id,
                     "argument has type " + show(ta) + ", expected " + show(f.arg));
              }
              return f.res;
            },
            [&](const Let& l) { return infer_let(l, e, rule); },
            [&](const LetRec& l) { return infer_letrec(l, e, rule); },
            [&](const Case& c) { return infer_case(c, e, rule); },
        },
        e->node);
  }

  TypePtr infer_abs(const Abs& a, NodeId node, const char*& rule) {
    rule = "Abs";
    check_type(a.ty, node);
    if (!mult_wf(ctx, a.mult)) fail(TypeError::Kind::IllFormedMult, node, "multiplicity " + show(a.mult) + " is not in scope");
    auto old = save(a.var);
    if (a.mult.is_many()) {
      ctx.gamma[a.var] = Unrestricted{a.ty};
    } else {
      ctx.gamma.erase(a.var);
      ctx.delta[ResourceKey{a.var, 0, {}}] = ResourceInfo{a.ty, a.mult};
      linear_known_.insert(a.var);
    }
    ScopeSnapshot snap;
    if (opts_.on_scope) snap = ScopeSnapshot{ctx, a.body, a.var, a.mult, a.ty, {}};
    TypePtr body;
    try {
      body = infer(a.body);
      ctx.delta = normalize(std::move(ctx.delta));
      if (opts_.on_scope) snap.outcome = InferOutcome{body, ctx.delta, std::nullopt};
      for (const auto& [k, _] : ctx.delta) {
        if (k.name == a.var) fail_lin(TypeError::Linearity::Discarded, node, a.var.text);
      }
    } catch (const Failure& f) {
      if (opts_.on_scope) {
        if (!snap.outcome.ty) snap.outcome.error = f.err;
        opts_.on_scope(snap);
      }
      throw;
    }
    if (opts_.on_scope) opts_.on_scope(snap);
    restore(a.var, old);
    return fun_ty(a.ty, a.mult, body);
  }

  void annotate(const ExprPtr& e, NodeAnnotation ann) {
    if (opts_.annotations_out) (*opts_.annotations_out)[e.get()] = std::move(ann);
  }

  TypePtr infer_let(const Let& l, const ExprPtr& e, const char*& rule) {
    rule = "Let";
    NodeId node = e->id;
    if (l.bind.ty) check_type(l.bind.ty, node);
    Delta before = ctx.delta;
    TypePtr ty = infer(l.bind.rhs);
    UsageEnv env = to_env(consumed_between(before, ctx.delta));
    ctx.delta = std::move(before);
    if (l.bind.ty && !alpha_eq(ty, l.bind.ty)) {
      fail(TypeError::Kind::TypeMismatch, node,
           "let binder " + l.bind.var.text + " is annotated " + show(l.bind.ty) + " but bound to " + show(ty));
    }
    if (l.bind.env && !(*l.bind.env == env)) {
      fail(TypeError::Kind::UsageEnvMismatch, node,
           "let binder " + l.bind.var.text + " is annotated " + show(*l.bind.env) + " but its right-hand side uses " +
               show(env),
           l.bind.var.text);
    }
    annotate(e, NodeAnnotation{{env}, {ty}});
    auto old = save(l.bind.var);
    ctx.gamma[l.bind.var] = DeltaBound{ty, env};
    TypePtr body = infer(l.body);
    restore(l.bind.var, old);
    return body;
  }

  TypePtr infer_letrec(const LetRec& l, const ExprPtr& e, const char*& rule) {
    rule = "LetRec";
    NodeId node = e->id;
    std::vector<std::optional<GammaEntry>> saved;
    for (const auto& b : l.binds) {
      if (!b.ty) fail(TypeError::Kind::TypeMismatch, node, "letrec binder " + b.var.text + " needs a type annotation");
      check_type(b.ty, node);
      saved.push_back(save(b.var));
    }
    auto bind_all = [&](const UsageEnv& env) {
      for (const auto& b : l.binds) ctx.gamma[b.var] = DeltaBound{b.ty, env};
    };
    auto check_rhs = [&](const Binding& b) {
      Delta before = ctx.delta;
      TypePtr ty = infer(b.rhs);
      if (!alpha_eq(ty, b.ty)) {
        fail(TypeError::Kind::TypeMismatch, b.rhs->id,
             "letrec binder " + b.var.text + " is annotated " + show(b.ty) + " but bound to " + show(ty));
      }
      Delta used = consumed_between(before, ctx.delta);
      ctx.delta = std::move(before);
      return used;
    };

    // Least fixed point of the shared environment; joins are relaxed to
    // intersections while the approximation is still growing.
    Delta shared;
    bool outer_lenient = lenient_;
    lenient_ = true;
    std::size_t limit = ctx.delta.size() + 2;
    for (std::size_t iter = 0;; ++iter) {
      if (iter > limit) {
        lenient_ = outer_lenient;
        fail(TypeError::Kind::UsageEnvMismatch, node, "usage environment of recursive group does not stabilise");
      }
      bind_all(to_env(shared));
      Delta next = shared;
      try {
        for (const auto& b : l.binds) {
          for (auto& kv : check_rhs(b)) next.insert(kv);
        }
      } catch (...) {
        lenient_ = outer_lenient;
        throw;
      }
      if (same_keys(next, shared)) break;
      shared = std::move(next);
    }
    lenient_ = outer_lenient;

    UsageEnv env = to_env(shared);
    bind_all(env);
    NodeAnnotation ann;
    for (const auto& b : l.binds) {
      Delta used = check_rhs(b);
      if (!same_keys(used, shared)) {
        fail(TypeError::Kind::UsageEnvMismatch, b.rhs->id,
             "letrec binder " + b.var.text + " uses " + show(to_env(used)) + " but the group uses " + show(env),
             b.var.text);
      }
      if (b.env && !(*b.env == env)) {
        fail(TypeError::Kind::UsageEnvMismatch, node,
             "letrec binder " + b.var.text + " is annotated " + show(*b.env) + " but the group uses " + show(env),
             b.var.text);
      }
      ann.envs.push_back(env);
      ann.tys.push_back(b.ty);
    }
    annotate(e, std::move(ann));
    TypePtr body = infer(l.body);
    for (std::size_t i = 0; i < l.binds.size(); ++i) restore(l.binds[i].var, saved[i]);
    return body;
  }

  TypePtr infer_case(const Case& c, const ExprPtr& e, const char*& rule) {
    NodeId node = e->id;
    Delta before = ctx.delta;
    bool whnf = is_whnf(c.scrut);
    rule = whnf ? "Case_WHNF" : "Case_NotWHNF";
    TypePtr scrut_ty;
    WhnfSplit split;
    if (whnf) {
      split = whnf_split(c.scrut);
      scrut_ty = split.ty;
    } else {
      scrut_ty = infer(c.scrut);
    }
    Delta scrut_res = consumed_between(before, ctx.delta);
    Delta mid = ctx.delta;

    if (c.ty) {
      check_type(c.ty, node);
      if (!alpha_eq(c.ty, scrut_ty)) {
        fail(TypeError::Kind::TypeMismatch, node,
             "case binder is annotated " + show(c.ty) + " but the scrutinee has type " + show(scrut_ty));
      }
    }
    UsageEnv case_env = whnf ? to_env(scrut_res) : to_env(incremented(scrut_res));
    if (c.env && !(*c.env == case_env)) {
      fail(TypeError::Kind::UsageEnvMismatch, node,
           "case binder is annotated " + show(*c.env) + " but the scrutinee uses " + show(case_env), c.binder.text);
    }
    annotate(e, NodeAnnotation{{case_env}, {scrut_ty}});

    const auto* dt = std::get_if<DataType>(&scrut_ty->node);
    bool has_wild = false;
    std::set<std::string> covered;
    for (const auto& a : c.alts) {
      if (const auto* con = std::get_if<ConPat>(&a.pat)) {
        covered.insert(con->ctor);
      } else {
        has_wild = true;
      }
    }
    if (!has_wild) {
      const DataDecl* decl = dt ? sigs_.data(dt->tycon) : nullptr;
      if (!decl) fail(TypeError::Kind::TypeMismatch, node, "case on " + show(scrut_ty) + " needs a wildcard alternative");
      for (const auto& k : decl->ctors) {
        if (!covered.contains(k.name)) fail(TypeError::Kind::NonExhaustiveCase, node, "no alternative for " + k.name);
      }
    }

    // The alternative selected by a WHNF scrutinee, if any.
    std::optional<std::size_t> matching;
    if (whnf) {
      for (std::size_t i = 0; i < c.alts.size() && !matching; ++i) {
        const auto* con = std::get_if<ConPat>(&c.alts[i].pat);
        if (split.saturated_ctor && con && con->ctor == split.ctor) matching = i;
      }
      for (std::size_t i = 0; i < c.alts.size() && !matching; ++i) {
        if (std::holds_alternative<WildPat>(c.alts[i].pat)) matching = i;
      }
    }

    TypePtr result;
    std::vector<Delta> outs;
    for (std::size_t i = 0; i < c.alts.size(); ++i) {
      ctx.delta = mid;
      AltMode mode;
      if (matching && *matching == i) {
        mode.whnf = true;
        mode.field_envs = split.field_envs;
      }
      TypePtr ty = alt(c.alts[i], mode, c.binder, scrut_ty, scrut_res, c.alts[i].rhs->id);
      if (!result) {
        result = ty;
      } else if (!alpha_eq(result, ty)) {
        fail(TypeError::Kind::TypeMismatch, c.alts[i].rhs->id,
             "alternatives have types " + show(result) + " and " + show(ty));
      }
      outs.push_back(normalize(ctx.delta));
    }
    Delta joined = outs.front();
    for (std::size_t i = 1; i < outs.size(); ++i) {
      if (lenient_) {
        Delta meet;
        for (const auto& kv : joined) {
          if (outs[i].contains(kv.first)) meet.insert(kv);
        }
        joined = std::move(meet);
        continue;
      }
      if (same_keys(joined, outs[i])) continue;
      for (const auto& [k, _] : joined) {
        if (!outs[i].contains(k)) fail_lin(TypeError::Linearity::Discarded, c.alts[i].rhs->id, k.name.text);
      }
      for (const auto& [k, _] : outs[i]) {
        if (!joined.contains(k)) fail_lin(TypeError::Linearity::Discarded, c.alts[0].rhs->id, k.name.text);
      }
    }
    ctx.delta = std::move(joined);
    return result;
  }
};

InferOutcome run_infer(Checker& ch, const ExprPtr& e) {
  try {
    TypePtr ty = ch.infer(e);
    return InferOutcome{ty, normalize(ch.ctx.delta), std::nullopt};
  } catch (const Failure& f) {
    return InferOutcome{nullptr, {}, f.err};
  } catch (const SignatureError& s) {
    return InferOutcome{nullptr, {}, TypeError{TypeError::Kind::TypeMismatch, TypeError::Linearity::None, e->id, {}, s.what()}};
  }
}

}  // namespace

UsageEnv to_env(const Delta& d) {
  UsageEnv env;
  for (const auto& [k, info] : d) env.insert(UsageEntry{k, info.mult});
  return env;
}

Delta incremented(const Delta& d) {
  Delta out;
  for (const auto& [k, info] : d) {
    ResourceKey inc = k;
    inc.depth += 1;
    out.emplace(std::move(inc), info);
  }
  return out;
}

Delta split_on_demand(const Delta& delta, const ResourceKey& x, const std::string& ctor, int n) {
  auto fail_tag = [&](const std::string& msg) {
    throw TypeError{TypeError::Kind::TagMismatch, TypeError::Linearity::None, 0, x.name.text, msg};
  };
  if (n <= 0) fail_tag("constructor " + ctor + " has no linear fields to split " + show(x) + " into");
  auto it = delta.find(x);
  if (it == delta.end()) fail_tag("resource " + show(x) + " is not available to split");
  for (const auto& [k, _] : delta) {
    if (k.tags.size() > x.tags.size() && is_prefix_of(x, k) && k.tags[x.tags.size()].ctor != ctor) {
      fail_tag("resource " + show(x) + " was already split at " + k.tags[x.tags.size()].ctor);
    }
  }
  Delta out = delta;
  ResourceInfo info = it->second;
  out.erase(x);
  for (int j = 1; j <= n; ++j) out.emplace(with_tag(x, Tag{ctor, j, n}), info);
  return out;
}

Delta normalize(Delta delta) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [k, info] : delta) {
      if (k.tags.empty()) continue;
      const Tag last = k.tags.back();  // by value: k may be erased below
      ResourceKey parent{k.name, k.depth, {k.tags.begin(), k.tags.end() - 1}};
      bool complete = true;
      for (int j = 1; j <= last.arity && complete; ++j) {
        complete = delta.contains(with_tag(parent, Tag{last.ctor, j, last.arity}));
      }
      if (!complete || delta.contains(parent)) continue;
      ResourceInfo keep = info;
      for (int j = 1; j <= last.arity; ++j) delta.erase(with_tag(parent, Tag{last.ctor, j, last.arity}));
      delta.emplace(parent, keep);
      changed = true;
      break;
    }
  }
  return delta;
}

bool mult_wf(const TypingCtx& ctx, const Mult& m) {
  if (!m.is_var()) return true;
  auto it = ctx.gamma.find(m.var);
  return it != ctx.gamma.end() && std::holds_alternative<MultVarEntry>(it->second);
}

TypingCtx initial_context(const SourceProgram& p) {
  TypingCtx ctx;
  for (const auto& a : p.assumptions) {
    if (a.mult.is_many()) {
      ctx.gamma[a.name] = Unrestricted{a.ty};
    } else {
      ctx.delta[ResourceKey{a.name, 0, {}}] = ResourceInfo{a.ty, a.mult};
    }
  }
  return ctx;
}

InferOutcome infer(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, const CheckOptions& opts) {
  Checker ch(sigs, ctx, opts);
  return run_infer(ch, e);
}

CheckResult check_expr(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, const CheckOptions& opts) {
  InferOutcome out = infer(sigs, ctx, e, opts);
  if (out.error) return CheckResult{nullptr, out.error};
  if (!out.delta_out.empty()) {
    const ResourceKey& k = out.delta_out.begin()->first;
    return CheckResult{nullptr, TypeError{TypeError::Kind::LinearityViolation, TypeError::Linearity::LeftOver, e->id,
                                          k.name.text, "resource " + k.name.text + " is left unconsumed"}};
  }
  return CheckResult{out.ty, std::nullopt};
}

namespace {

std::optional<TypeError> check_decls(const SourceProgram& p) {
  std::set<std::string> tycons, ctors;
  auto err = [](TypeError::Kind k, std::string msg) {
    return TypeError{k, TypeError::Linearity::None, 0, {}, std::move(msg)};
  };
  for (const auto& d : p.decls) {
    if (!tycons.insert(d.tycon).second) return err(TypeError::Kind::TypeMismatch, "datatype " + d.tycon + " declared twice");
    std::set<Name> params(d.params.begin(), d.params.end());
    for (const auto& c : d.ctors) {
      if (!ctors.insert(c.name).second) return err(TypeError::Kind::TypeMismatch, "constructor " + c.name + " declared twice");
      for (const auto& f : c.fields) {
        if (f.mult.is_var() && !params.contains(f.mult.var)) {
          return err(TypeError::Kind::IllFormedMult, "field multiplicity " + show(f.mult) + " of " + c.name + " is not a parameter");
        }
        for (const auto& m : free_mult_vars(f.ty)) {
          if (!params.contains(m)) return err(TypeError::Kind::IllFormedMult, "multiplicity " + m.text + " in " + c.name + " is not a parameter");
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

CheckResult check_program(const SourceProgram& p, const CheckOptions& opts) {
  if (auto e = check_decls(p)) return CheckResult{nullptr, e};
  Signatures sigs(p.decls);
  return check_expr(sigs, initial_context(p), p.main, opts);
}

WhnfSplit check_whnf_split(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, const CheckOptions& opts) {
  Checker ch(sigs, ctx, opts);
  try {
    WhnfSplit out = ch.whnf_split(e);
    out.delta_out = normalize(ch.ctx.delta);
    return out;
  } catch (const Failure& f) {
    WhnfSplit out;
    out.error = f.err;
    return out;
  }
}

InferOutcome check_alt(const Signatures& sigs, const TypingCtx& outer, const Alt& alt, const AltMode& mode,
                       const Name& binder, const TypePtr& scrut_ty, const Delta& scrut_resources,
                       const TypePtr& result_ty, const CheckOptions& opts) {
  Checker ch(sigs, outer, opts);
  try {
    TypePtr ty = ch.alt(alt, mode, binder, scrut_ty, scrut_resources, alt.rhs->id);
    if (result_ty && !alpha_eq(ty, result_ty)) {
      return InferOutcome{nullptr, {}, TypeError{TypeError::Kind::TypeMismatch, TypeError::Linearity::None, alt.rhs->id, {},
                                                 "alternative has type " + show(ty) + ", expected " + show(result_ty)}};
    }
    return InferOutcome{ty, normalize(ch.ctx.delta), std::nullopt};
  } catch (const Failure& f) {
    return InferOutcome{nullptr, {}, f.err};
  } catch (const SignatureError& s) {
    return InferOutcome{nullptr, {}, TypeError{TypeError::Kind::TypeMismatch, TypeError::Linearity::None, alt.rhs->id, {}, s.what()}};
  }
}

ExprPtr fill_annotations(const ExprPtr& e, const AnnotationMap& anns) {
  auto find = [&](const ExprPtr& x) -> const NodeAnnotation* {
    auto it = anns.find(x.get());
    return it == anns.end() ? nullptr : &it->second;
  };
  return std::visit(
      Overload{
          [&](const Var&) { return e; },
          [&](const Ctor&) { return e; },
          [&](const MultAbs& m) { return make_expr(MultAbs{m.binder, fill_annotations(m.body, anns)}, e->id); },
          [&](const MultApp& m) { return make_expr(MultApp{fill_annotations(m.fun, anns), m.mult}, e->id); },
          [&](const Abs& a) { return make_expr(Abs{a.var, a.mult, a.ty, fill_annotations(a.body, anns)}, e->id); },
          [&](const App& a) {
            return make_expr(App{fill_annotations(a.fun, anns), fill_annotations(a.arg, anns)}, e->id);
          },
          [&](const Let& l) {
            Binding b = l.bind;
            b.rhs = fill_annotations(l.bind.rhs, anns);
            if (const auto* ann = find(e)) {
              b.env = ann->envs.at(0);
              b.ty = ann->tys.at(0);
            }
            return make_expr(Let{std::move(b), fill_annotations(l.body, anns)}, e->id);
          },
          [&](const LetRec& l) {
            std::vector<Binding> binds = l.binds;
            const auto* ann = find(e);
            for (std::size_t i = 0; i < binds.size(); ++i) {
              binds[i].rhs = fill_annotations(l.binds[i].rhs, anns);
              if (ann && i < ann->envs.size()) {
                binds[i].env = ann->envs[i];
                binds[i].ty = ann->tys[i];
              }
            }
            return make_expr(LetRec{std::move(binds), fill_annotations(l.body, anns)}, e->id);
          },
          [&](const Case& c) {
            Case out{fill_annotations(c.scrut, anns), c.binder, c.env, c.ty, {}};
            if (const auto* ann = find(e)) {
              out.env = ann->envs.at(0);
              out.ty = ann->tys.at(0);
            }
            for (const auto& a : c.alts) out.alts.push_back(Alt{a.pat, fill_annotations(a.rhs, anns)});
            return make_expr(std::move(out), e->id);
          },
      },
      e->node);
}

}  // namespace lc
