#include "lc/transforms.hpp"

#include <array>
#include <charconv>
#include <functional>

namespace lc {

namespace {

constexpr std::array<std::pair<Pass, std::string_view>, 15> kPassNames{{
    {Pass::Inline, "inline"},
    {Pass::Beta, "beta"},
    {Pass::BetaSharing, "beta-sharing"},
    {Pass::BetaMult, "beta-mult"},
    {Pass::CaseKnown, "case-known"},
    {Pass::CaseOfCase, "case-of-case"},
    {Pass::LetLam, "let-lam"},
    {Pass::LetApp, "let-app"},
    {Pass::LetCase, "let-case"},
    {Pass::CaseLet, "case-let"},
    {Pass::LetLet, "let-let"},
    {Pass::EtaExpand, "eta-expand"},
    {Pass::EtaReduce, "eta-reduce"},
    {Pass::BinderSwap, "binder-swap"},
    {Pass::ReverseBinderSwap, "reverse-binder-swap"},
}};

using Status = RewriteResult::Status;

RewriteResult not_applicable(std::string why) { return {Status::NotApplicable, nullptr, std::move(why), {}}; }
RewriteResult guard_failed(std::string why) { return {Status::GuardFailed, nullptr, std::move(why), {}}; }
RewriteResult applied(ExprPtr e, std::vector<std::string> conds = {}) {
  return {Status::Applied, std::move(e), {}, std::move(conds)};
}

bool is_scrutinee_position(const ExprPtr& root, const Path& path) {
  if (path.empty() || path.back() != 0) return false;
  Path parent(path.begin(), path.end() - 1);
  ExprPtr p = subterm(root, parent);
  return p && std::holds_alternative<Case>(p->node);
}

// True if `path` is a WHNF case scrutinee or a prefix of its constructor spine.
// Replacing such a subterm by anything but a value would leave the case stuck
// on a non-WHNF scrutinee in a position the typing rule treats as a value.
bool on_whnf_scrutinee_spine(const ExprPtr& root, const Path& path) {
  Path p = path;
  while (!p.empty()) {
    Path parent(p.begin(), p.end() - 1);
    ExprPtr par = subterm(root, parent);
    if (!par) return false;
    const std::size_t idx = p.back();
    if (const auto* c = std::get_if<Case>(&par->node)) return idx == 0 && is_whnf(c->scrut);
    const bool spine = idx == 0 && (std::holds_alternative<App>(par->node) || std::holds_alternative<MultApp>(par->node));
    if (!spine) return false;
    p = std::move(parent);
  }
  return false;
}

std::set<Name> pattern_vars(const Alt& a) {
  std::set<Name> out;
  if (const auto* con = std::get_if<ConPat>(&a.pat)) {
    for (const auto& b : con->binders) out.insert(b.var);
  }
  return out;
}

// Names bound by `e` for the child with the given index.
void binders_for_child(const ExprPtr& e, std::size_t child, std::set<Name>& terms, std::set<Name>& mults) {
  std::visit(Overload{
                 [&](const MultAbs& m) { mults.insert(m.binder); },
                 [&](const Abs& a) { terms.insert(a.var); },
                 [&](const Let& l) {
                   if (child == 1) terms.insert(l.bind.var);
                 },
                 [&](const LetRec& l) {
                   for (const auto& b : l.binds) terms.insert(b.var);
                 },
                 [&](const Case& c) {
                   if (child == 0) return;
                   terms.insert(c.binder);
                   for (const auto& n : pattern_vars(c.alts[child - 1])) terms.insert(n);
                 },
                 [&](const auto&) {},
             },
             e->node);
}

class Rewriter {
 public:
  Rewriter(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& root)
      : sigs_(sigs), ctx_(ctx), root_(root) {}

  RewriteResult run(Pass pass, const Path& path) {
    ExprPtr e = subterm(root_, path);
    if (!e) return not_applicable("no node at " + show_path(path));
    if (pass == Pass::CaseLet) return case_let(path);
    RewriteResult r = local(pass, e, path);
    if (r.status == Status::Applied) r.after = replace_subterm(root_, path, r.after);
    return r;
  }

 private:
  RewriteResult local(Pass pass, const ExprPtr& e, const Path& path) {
    switch (pass) {
      case Pass::Inline: return inline_let(e);
      case Pass::Beta: return beta(e);
      case Pass::BetaSharing: return beta_sharing(e);
      case Pass::BetaMult: return beta_mult(e);
      case Pass::CaseKnown: return case_known(e);
      case Pass::CaseOfCase: return case_of_case(e);
      case Pass::LetLam: return let_lam(e, path);
      case Pass::LetApp: return let_app(e);
      case Pass::LetCase: return let_case(e);
      case Pass::LetLet: return let_let(e);
      case Pass::EtaExpand: return eta_expand(e, path);
      case Pass::EtaReduce: return eta_reduce(e, path);
      case Pass::BinderSwap: return binder_swap(e, false);
      case Pass::ReverseBinderSwap: return binder_swap(e, true);
      case Pass::CaseLet: break;
    }
    return not_applicable("unknown pass");
  }

  RewriteResult inline_let(const ExprPtr& e) {
    const auto* l = std::get_if<Let>(&e->node);
    if (!l) return not_applicable("not a let");
    Let out = *l;
    out.body = subst_expr(l->body, l->bind.var, freshen(l->bind.rhs));
    return applied(make_expr(std::move(out), e->id));
  }

  RewriteResult beta(const ExprPtr& e) {
    const auto* a = std::get_if<App>(&e->node);
    const Abs* lam = a ? std::get_if<Abs>(&a->fun->node) : nullptr;
    if (!lam) return not_applicable("not a lambda applied to an argument");
    return applied(subst_expr(lam->body, lam->var, a->arg));
  }

  RewriteResult beta_sharing(const ExprPtr& e) {
    const auto* a = std::get_if<App>(&e->node);
    const Abs* lam = a ? std::get_if<Abs>(&a->fun->node) : nullptr;
    if (!lam) return not_applicable("not a lambda applied to an argument");
    if (!lam->mult.is_many()) return guard_failed("binder is not unrestricted");
    return applied(make_expr(Let{Binding{lam->var, std::nullopt, lam->ty, a->arg}, lam->body}),
                   {"unrestricted binder"});
  }

  RewriteResult beta_mult(const ExprPtr& e) {
    const auto* m = std::get_if<MultApp>(&e->node);
    const MultAbs* lam = m ? std::get_if<MultAbs>(&m->fun->node) : nullptr;
    if (!lam) return not_applicable("not a multiplicity abstraction applied to a multiplicity");
    return applied(subst_mult(lam->body, lam->binder, m->mult));
  }

  RewriteResult case_known(const ExprPtr& e) {
    const auto* c = std::get_if<Case>(&e->node);
    if (!c || !is_whnf_head(c->scrut)) return not_applicable("scrutinee is not a constructor application");
    Spine sp = spine_of(c->scrut);
    const auto& k = std::get<Ctor>(sp.head->node);
    std::vector<ExprPtr> args;
    for (const auto& a : sp.args) {
      if (const auto* t = std::get_if<ExprPtr>(&a)) args.push_back(*t);
    }
    auto ref = sigs_.ctor(k.name);
    if (!ref || ref->ctor->fields.size() != args.size()) return not_applicable("constructor is not saturated");
    const Alt* chosen = nullptr;
    for (const auto& a : c->alts) {
      const auto* con = std::get_if<ConPat>(&a.pat);
      if (con && con->ctor == k.name) {
        chosen = &a;
        break;
      }
    }
    for (const auto& a : c->alts) {
      if (!chosen && std::holds_alternative<WildPat>(a.pat)) chosen = &a;
    }
    if (!chosen) return not_applicable("no alternative matches " + k.name);
    std::map<Name, ExprPtr> s;
    if (const auto* con = std::get_if<ConPat>(&chosen->pat)) {
      for (std::size_t i = 0; i < args.size(); ++i) s[con->binders[i].var] = args[i];
    }
    s[c->binder] = c->scrut;
    return applied(subst_exprs(chosen->rhs, s));
  }

  RewriteResult case_of_case(const ExprPtr& e) {
    const auto* outer = std::get_if<Case>(&e->node);
    const Case* inner = outer ? std::get_if<Case>(&outer->scrut->node) : nullptr;
    if (!inner) return not_applicable("scrutinee is not a case");
    Case out = *inner;
    out.env.reset();
    out.alts.clear();
    for (const auto& a : inner->alts) {
      Case copy = *outer;
      copy.scrut = a.rhs;
      copy.env.reset();
      // Each alternative gets its own copy of the outer case, with fresh binders.
      out.alts.push_back(Alt{a.pat, freshen(make_expr(std::move(copy)))});
    }
    return applied(make_expr(std::move(out), e->id));
  }

  RewriteResult let_lam(const ExprPtr& e, const Path& path) {
    const auto* lam = std::get_if<Abs>(&e->node);
    const Let* l = lam ? std::get_if<Let>(&lam->body->node) : nullptr;
    if (!l) return not_applicable("not a lambda over a let");
    if (free_vars(l->bind.rhs).contains(lam->var)) return guard_failed("let right-hand side mentions the lambda binder");
    if (is_scrutinee_position(root_, path)) return guard_failed("lambda is a case scrutinee (WHNF position)");
    Let out = *l;
    out.body = make_expr(Abs{lam->var, lam->mult, lam->ty, l->body});
    return applied(make_expr(std::move(out)), {"binder not free in right-hand side", "not a scrutinee"});
  }

  RewriteResult let_app(const ExprPtr& e) {
    const auto* a = std::get_if<App>(&e->node);
    const Let* l = a ? std::get_if<Let>(&a->fun->node) : nullptr;
    if (!l) return not_applicable("not a let applied to an argument");
    if (free_vars(a->arg).contains(l->bind.var)) return guard_failed("argument mentions the let binder");
    Let out = *l;
    out.body = app_e(l->body, a->arg);
    return applied(make_expr(std::move(out)));
  }

  RewriteResult let_case(const ExprPtr& e) {
    const auto* c = std::get_if<Case>(&e->node);
    const Let* l = c ? std::get_if<Let>(&c->scrut->node) : nullptr;
    if (!l) return not_applicable("scrutinee is not a let");
    Case inner = *c;
    inner.scrut = l->body;
    inner.env.reset();
    for (const auto& a : c->alts) {
      if (free_vars(a.rhs).contains(l->bind.var)) return guard_failed("alternative mentions the let binder");
    }
    Let out = *l;
    out.body = make_expr(std::move(inner), e->id);
    return applied(make_expr(std::move(out)));
  }

  RewriteResult let_let(const ExprPtr& e) {
    const auto* l = std::get_if<Let>(&e->node);
    const Let* in = l ? std::get_if<Let>(&l->bind.rhs->node) : nullptr;
    if (!in) return not_applicable("let right-hand side is not a let");
    if (free_vars(l->body).contains(in->bind.var)) return guard_failed("outer body mentions the inner binder");
    Binding outer = l->bind;
    outer.rhs = in->body;
    outer.env.reset();
    Let out = *in;
    out.body = make_expr(Let{std::move(outer), l->body}, e->id);
    return applied(make_expr(std::move(out)));
  }

  const TypeMap& types() {
    if (!types_) {
      types_.emplace();
      typed_root_ = strip_usage_annotations(root_);
      CheckOptions opts;
      opts.types_out = &*types_;
      infer(sigs_, ctx_, typed_root_, opts);
    }
    return *types_;
  }

  TypePtr type_at(const Path& path) {
    const TypeMap& t = types();
    ExprPtr n = subterm(typed_root_, path);
    if (!n) return nullptr;
    auto it = t.find(n.get());
    return it == t.end() ? nullptr : it->second;
  }

  RewriteResult eta_expand(const ExprPtr& e, const Path& path) {
    TypePtr ty = type_at(path);
    const FunType* f = ty ? std::get_if<FunType>(&ty->node) : nullptr;
    if (!f) return not_applicable("not of function type");
    if (!std::holds_alternative<Abs>(e->node) && on_whnf_scrutinee_spine(root_, path)) {
      return guard_failed("subterm is part of a WHNF case scrutinee");
    }
    Name x = fresh_name("x");
    return applied(abs_e(x, f->mult, f->arg, app_e(e, var_e(x))), {"function type"});
  }

  RewriteResult eta_reduce(const ExprPtr& e, const Path& path) {
    const auto* lam = std::get_if<Abs>(&e->node);
    const App* a = lam ? std::get_if<App>(&lam->body->node) : nullptr;
    const Var* v = a ? std::get_if<Var>(&a->arg->node) : nullptr;
    if (!v || !(v->name == lam->var)) return not_applicable("not of the form \\x. f x");
    if (free_vars(a->fun).contains(lam->var)) return not_applicable("function mentions the binder");
    Path fun_path = path;
    fun_path.push_back(0);
    fun_path.push_back(0);
    TypePtr fty = type_at(fun_path);
    const FunType* f = fty ? std::get_if<FunType>(&fty->node) : nullptr;
    if (!f || !(f->mult == lam->mult) || !alpha_eq(f->arg, lam->ty)) {
      return guard_failed("function type does not match the binder");
    }
    if (is_scrutinee_position(root_, path)) return guard_failed("lambda is a case scrutinee (WHNF position)");
    return applied(a->fun, {"binder not free in function", "binder matches arrow", "not a scrutinee"});
  }

  RewriteResult binder_swap(const ExprPtr& e, bool reverse) {
    const auto* c = std::get_if<Case>(&e->node);
    const Var* x = c ? std::get_if<Var>(&c->scrut->node) : nullptr;
    if (!x) return not_applicable("scrutinee is not a variable");
    Case out = *c;
    out.env.reset();
    for (auto& a : out.alts) {
      a.rhs = reverse ? subst_expr(a.rhs, c->binder, c->scrut) : subst_expr(a.rhs, x->name, var_e(c->binder));
    }
    return applied(make_expr(std::move(out), e->id));
  }

  // The path addresses the lifted subterm; the nearest enclosing case whose
  // alternative contains it is rewritten.
  RewriteResult case_let(const Path& path) {
    std::optional<std::size_t> case_depth;
    for (std::size_t d = path.size(); d-- > 0;) {
      ExprPtr n = subterm(root_, Path(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(d)));
      if (std::holds_alternative<Case>(n->node) && path[d] >= 1) {
        case_depth = d;
        break;
      }
    }
    if (!case_depth) return not_applicable("not inside a case alternative");
    Path case_path(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(*case_depth));
    ExprPtr case_node = subterm(root_, case_path);
    ExprPtr hole = subterm(root_, path);
    if (std::holds_alternative<Var>(hole->node)) return not_applicable("subterm is already a variable");

    std::set<Name> bound_terms, bound_mults;
    ExprPtr cur = case_node;
    for (std::size_t d = *case_depth; d < path.size(); ++d) {
      binders_for_child(cur, path[d], bound_terms, bound_mults);
      cur = children(cur)[path[d]];
    }
    for (const auto& n : free_vars(hole)) {
      if (bound_terms.contains(n)) return guard_failed("subterm captures " + n.text);
    }
    for (const auto& n : free_mult_vars(hole)) {
      if (bound_mults.contains(n)) return guard_failed("subterm captures multiplicity " + n.text);
    }
    if (on_whnf_scrutinee_spine(root_, path)) {
      return guard_failed("subterm is part of a WHNF case scrutinee");
    }
    Name x = fresh_name("x");
    Path rel(path.begin() + static_cast<std::ptrdiff_t>(*case_depth), path.end());
    ExprPtr new_case = replace_subterm(case_node, rel, var_e(x));
    ExprPtr lifted = make_expr(Let{Binding{x, std::nullopt, nullptr, hole}, new_case});
    return applied(replace_subterm(root_, case_path, lifted),
                   {"no capture of case binder, pattern or context variables"});
  }

  const Signatures& sigs_;
  const TypingCtx& ctx_;
  ExprPtr root_;
  std::optional<TypeMap> types_;
  ExprPtr typed_root_;
};

void preorder(const ExprPtr& e, Path& path, const std::function<void(const Path&, const ExprPtr&)>& f) {
  f(path, e);
  auto kids = children(e);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    path.push_back(i);
    preorder(kids[i], path, f);
    path.pop_back();
  }
}

}  // namespace

std::string_view pass_name(Pass p) {
  for (const auto& [pass, name] : kPassNames) {
    if (pass == p) return name;
  }
  return "?";
}

std::optional<Pass> pass_from_name(std::string_view name) {
  for (const auto& [pass, n] : kPassNames) {
    if (n == name) return pass;
  }
  return std::nullopt;
}

const std::vector<Pass>& all_passes() {
  static const std::vector<Pass> passes = [] {
    std::vector<Pass> out;
    for (const auto& [p, _] : kPassNames) out.push_back(p);
    return out;
  }();
  return passes;
}

bool is_type_preserving(Pass p) { return p != Pass::ReverseBinderSwap; }

std::string show_path(const Path& p) {
  if (p.empty()) return ".";
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ".";
    s += std::to_string(p[i]);
  }
  return s;
}

std::optional<Path> parse_path(std::string_view s) {
  Path out;
  if (s.empty() || s == ".") return out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find('.', pos);
    if (end == std::string_view::npos) end = s.size();
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + end, v);
    if (ec != std::errc{} || ptr != s.data() + end || end == pos) return std::nullopt;
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::vector<ExprPtr> children(const ExprPtr& e) {
  return std::visit(Overload{
                        [](const Var&) { return std::vector<ExprPtr>{}; },
                        [](const Ctor&) { return std::vector<ExprPtr>{}; },
                        [](const MultAbs& m) { return std::vector<ExprPtr>{m.body}; },
                        [](const MultApp& m) { return std::vector<ExprPtr>{m.fun}; },
                        [](const Abs& a) { return std::vector<ExprPtr>{a.body}; },
                        [](const App& a) { return std::vector<ExprPtr>{a.fun, a.arg}; },
                        [](const Let& l) { return std::vector<ExprPtr>{l.bind.rhs, l.body}; },
                        [](const LetRec& l) {
                          std::vector<ExprPtr> out;
                          for (const auto& b : l.binds) out.push_back(b.rhs);
                          out.push_back(l.body);
                          return out;
                        },
                        [](const Case& c) {
                          std::vector<ExprPtr> out{c.scrut};
                          for (const auto& a : c.alts) out.push_back(a.rhs);
                          return out;
                        },
                    },
                    e->node);
}

ExprPtr subterm(const ExprPtr& e, const Path& p) {
  ExprPtr cur = e;
  for (std::size_t i : p) {
    auto kids = children(cur);
    if (i >= kids.size()) return nullptr;
    cur = kids[i];
  }
  return cur;
}

namespace {

ExprPtr with_child(const ExprPtr& e, std::size_t i, const ExprPtr& c) {
  return std::visit(Overload{
                        [&](const MultAbs& m) { return make_expr(MultAbs{m.binder, c}, e->id); },
                        [&](const MultApp& m) { return make_expr(MultApp{c, m.mult}, e->id); },
                        [&](const Abs& a) { return make_expr(Abs{a.var, a.mult, a.ty, c}, e->id); },
                        [&](const App& a) {
                          return i == 0 ? make_expr(App{c, a.arg}, e->id) : make_expr(App{a.fun, c}, e->id);
                        },
                        [&](const Let& l) {
                          Let out = l;
                          (i == 0 ? out.bind.rhs : out.body) = c;
                          return make_expr(std::move(out), e->id);
                        },
                        [&](const LetRec& l) {
                          LetRec out = l;
                          (i < out.binds.size() ? out.binds[i].rhs : out.body) = c;
                          return make_expr(std::move(out), e->id);
                        },
                        [&](const Case& cs) {
                          Case out = cs;
                          (i == 0 ? out.scrut : out.alts[i - 1].rhs) = c;
                          return make_expr(std::move(out), e->id);
                        },
                        [&](const auto&) { return e; },
                    },
                    e->node);
}

}  // namespace

ExprPtr replace_subterm(const ExprPtr& e, const Path& p, const ExprPtr& with) {
  if (p.empty()) return with;
  Path rest(p.begin() + 1, p.end());
  return with_child(e, p.front(), replace_subterm(children(e).at(p.front()), rest, with));
}

RewriteResult rewrite_at(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass,
                         const Path& path) {
  return Rewriter(sigs, ctx, e).run(pass, path);
}

std::vector<RewriteSite> find_sites(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass) {
  Rewriter rw(sigs, ctx, e);
  std::vector<RewriteSite> out;
  Path path;
  preorder(e, path, [&](const Path& p, const ExprPtr&) {
    RewriteResult r = rw.run(pass, p);
    if (r.status == Status::Applied) out.push_back(RewriteSite{p, pass, r.side_conditions});
  });
  return out;
}

ExprPtr rewrite_everywhere(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass,
                           std::size_t* applied_count) {
  // Sites are the nodes of the input; a node is identified by its position
  // among the input nodes, which rewriting never renumbers.
  std::map<const Expr*, bool> input_nodes;
  Path scratch;
  preorder(e, scratch, [&](const Path&, const ExprPtr& n) { input_nodes.emplace(n.get(), false); });

  ExprPtr cur = e;
  std::size_t count = 0;
  std::function<void(Path&)> visit = [&](Path& path) {
    ExprPtr node = subterm(cur, path);
    auto it = input_nodes.find(node.get());
    if (it != input_nodes.end() && !it->second) {
      it->second = true;
      if (pass == Pass::CaseLet) {
        // Lift the first liftable subterm of each case's alternatives.
        if (std::holds_alternative<Case>(node->node)) {
          Rewriter rw(sigs, ctx, cur);
          Path sub;
          auto kids = children(node);
          for (std::size_t i = 1; i < kids.size(); ++i) {
            bool done = false;
            preorder(kids[i], sub, [&](const Path& rel, const ExprPtr&) {
              if (done) return;
              Path full = path;
              full.push_back(i);
              full.insert(full.end(), rel.begin(), rel.end());
              RewriteResult r = rw.run(Pass::CaseLet, full);
              ExprPtr at = r.status == Status::Applied ? subterm(r.after, path) : nullptr;
              if (at && std::holds_alternative<Let>(at->node)) {
                cur = r.after;
                ++count;
                done = true;
              }
            });
            if (done) break;
          }
        }
      } else {
        RewriteResult r = rewrite_at(sigs, ctx, cur, pass, path);
        if (r.status == Status::Applied) {
          cur = r.after;
          ++count;
        }
      }
    }
    node = subterm(cur, path);
    for (std::size_t i = 0; i < children(node).size(); ++i) {
      path.push_back(i);
      visit(path);
      path.pop_back();
    }
  };
  Path root;
  visit(root);
  if (applied_count) *applied_count = count;
  return cur;
}

std::string to_string(TransformOutcome::Verdict v) {
  switch (v) {
    case TransformOutcome::Verdict::Preserved: return "Preserved";
    case TransformOutcome::Verdict::Rejected: return "Rejected";
    case TransformOutcome::Verdict::NotApplicable: return "NotApplicable";
    case TransformOutcome::Verdict::GuardFailed: return "GuardFailed";
  }
  return "?";
}

TransformOutcome verify(const SourceProgram& p, const TypePtr& ty_before, Pass pass, const ExprPtr& after) {
  TransformOutcome out;
  out.pass = pass;
  out.before = p.main;
  out.after = after;
  out.ty_before = ty_before;
  SourceProgram q = p;
  q.main = strip_usage_annotations(after);
  CheckResult r = check_program(q);
  out.ty_after = r.ty;
  if (!r.ok()) {
    out.verdict = TransformOutcome::Verdict::Rejected;
    out.error = r.error;
  } else if (!alpha_eq(r.ty, ty_before)) {
    out.verdict = TransformOutcome::Verdict::Rejected;
    out.error = TypeError{TypeError::Kind::TypeMismatch, TypeError::Linearity::None, 0, {},
                          "type changed from " + show(ty_before) + " to " + show(r.ty)};
  } else {
    out.verdict = TransformOutcome::Verdict::Preserved;
  }
  return out;
}

std::vector<TransformOutcome> preservation_check(const SourceProgram& p, const std::vector<PipelineStep>& pipeline) {
  std::vector<TransformOutcome> out;
  CheckResult base = check_program(p);
  if (!base.ok()) throw std::runtime_error("input does not check: " + base.error->render());
  Signatures sigs(p.decls);
  TypingCtx ctx = initial_context(p);
  SourceProgram cur = p;
  for (const auto& step : pipeline) {
    ExprPtr after;
    TransformOutcome o;
    if (step.at) {
      RewriteResult r = rewrite_at(sigs, ctx, cur.main, step.pass, *step.at);
      if (r.status != Status::Applied) {
        o.pass = step.pass;
        o.path = step.at;
        o.before = o.after = cur.main;
        o.ty_before = o.ty_after = base.ty;
        o.verdict = r.status == Status::GuardFailed ? TransformOutcome::Verdict::GuardFailed
                                                    : TransformOutcome::Verdict::NotApplicable;
        o.note = r.reason;
        out.push_back(std::move(o));
        continue;
      }
      after = r.after;
    } else {
      std::size_t n = 0;
      after = rewrite_everywhere(sigs, ctx, cur.main, step.pass, &n);
      if (n == 0) {
        o.pass = step.pass;
        o.before = o.after = cur.main;
        o.ty_before = o.ty_after = base.ty;
        o.verdict = TransformOutcome::Verdict::NotApplicable;
        o.note = "no site";
        out.push_back(std::move(o));
        continue;
      }
      o.note = std::to_string(n) + " site(s)";
    }
    std::string note = o.note;
    o = verify(cur, base.ty, step.pass, after);
    o.path = step.at;
    o.note = note;
    out.push_back(o);
    // Later steps work on the rewritten term only when it still checks.
    if (o.verdict == TransformOutcome::Verdict::Preserved) cur.main = after;
  }
  return out;
}

std::vector<TransformOutcome> check_all_sites(const SourceProgram& p, Pass pass) {
  std::vector<TransformOutcome> out;
  CheckResult base = check_program(p);
  if (!base.ok()) throw std::runtime_error("input does not check: " + base.error->render());
  Signatures sigs(p.decls);
  TypingCtx ctx = initial_context(p);
  for (const auto& site : find_sites(sigs, ctx, p.main, pass)) {
    RewriteResult r = rewrite_at(sigs, ctx, p.main, pass, site.path);
    TransformOutcome o = verify(p, base.ty, pass, r.after);
    o.path = site.path;
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace lc
