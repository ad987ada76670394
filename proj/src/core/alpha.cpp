#include <algorithm>

#include "lc/ir.hpp"

namespace lc {

namespace {

// Bound names are paired positionally; free names compare by id, or by
// source text when the two sides come from independent parses.
class AlphaCmp {
 public:
  explicit AlphaCmp(bool free_by_text) : free_by_text_(free_by_text) {}

  bool names(const Name& a, const Name& b, bool mult) const {
    const auto& l = mult ? mult_left_ : term_left_;
    const auto& r = mult ? mult_right_ : term_right_;
    auto la = l.find(a);
    auto rb = r.find(b);
    if (la != l.end() || rb != r.end()) {
      return la != l.end() && rb != r.end() && la->second == b && rb->second == a;
    }
    return free_by_text_ ? a.text == b.text : a == b;
  }

  bool mult(const Mult& a, const Mult& b) const {
    if (a.kind != b.kind) return false;
    return !a.is_var() || names(a.var, b.var, true);
  }

  bool type(const TypePtr& a, const TypePtr& b) {
    if (!a || !b) return !a && !b;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        Overload{
            [&](const DataType& x) {
              const auto& y = std::get<DataType>(b->node);
              if (x.tycon != y.tycon || x.args.size() != y.args.size()) return false;
              for (std::size_t i = 0; i < x.args.size(); ++i) {
                if (!mult(x.args[i], y.args[i])) return false;
              }
              return true;
            },
            [&](const FunType& x) {
              const auto& y = std::get<FunType>(b->node);
              return mult(x.mult, y.mult) && type(x.arg, y.arg) && type(x.res, y.res);
            },
            [&](const ForallType& x) {
              const auto& y = std::get<ForallType>(b->node);
              auto s = bind(x.binder, y.binder, true);
              bool ok = type(x.body, y.body);
              unbind(s);
              return ok;
            },
        },
        a->node);
  }

  bool env(const std::optional<UsageEnv>& a, const std::optional<UsageEnv>& b) const {
    if (!a || !b) return !a && !b;
    if (a->size() != b->size()) return false;
    std::vector<bool> used(b->size(), false);
    for (const auto& ea : a->entries()) {
      bool found = false;
      for (std::size_t j = 0; j < b->size(); ++j) {
        const auto& eb = b->entries()[j];
        if (used[j]) continue;
        if (ea.key.depth == eb.key.depth && ea.key.tags == eb.key.tags && mult(ea.mult, eb.mult) &&
            names(ea.key.name, eb.key.name, false)) {
          used[j] = true;
          found = true;
          break;
        }
      }
      if (!found) return false;
    }
    return true;
  }

  bool expr(const ExprPtr& a, const ExprPtr& b) {
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        Overload{
            [&](const Var& x) { return names(x.name, std::get<Var>(b->node).name, false); },
            [&](const Ctor& x) { return x.name == std::get<Ctor>(b->node).name; },
            [&](const MultAbs& x) {
              const auto& y = std::get<MultAbs>(b->node);
              auto s = bind(x.binder, y.binder, true);
              bool ok = expr(x.body, y.body);
              unbind(s);
              return ok;
            },
            [&](const MultApp& x) {
              const auto& y = std::get<MultApp>(b->node);
              return mult(x.mult, y.mult) && expr(x.fun, y.fun);
            },
            [&](const Abs& x) {
              const auto& y = std::get<Abs>(b->node);
              if (!mult(x.mult, y.mult) || !type(x.ty, y.ty)) return false;
              auto s = bind(x.var, y.var, false);
              bool ok = expr(x.body, y.body);
              unbind(s);
              return ok;
            },
            [&](const App& x) {
              const auto& y = std::get<App>(b->node);
              return expr(x.fun, y.fun) && expr(x.arg, y.arg);
            },
            [&](const Let& x) {
              const auto& y = std::get<Let>(b->node);
              if (!env(x.bind.env, y.bind.env) || !type(x.bind.ty, y.bind.ty)) return false;
              if (!expr(x.bind.rhs, y.bind.rhs)) return false;
              auto s = bind(x.bind.var, y.bind.var, false);
              bool ok = expr(x.body, y.body);
              unbind(s);
              return ok;
            },
            [&](const LetRec& x) {
              const auto& y = std::get<LetRec>(b->node);
              if (x.binds.size() != y.binds.size()) return false;
              std::vector<Saved> saved;
              for (std::size_t i = 0; i < x.binds.size(); ++i) {
                saved.push_back(bind(x.binds[i].var, y.binds[i].var, false));
              }
              bool ok = true;
              for (std::size_t i = 0; ok && i < x.binds.size(); ++i) {
                ok = env(x.binds[i].env, y.binds[i].env) && type(x.binds[i].ty, y.binds[i].ty) &&
                     expr(x.binds[i].rhs, y.binds[i].rhs);
              }
              ok = ok && expr(x.body, y.body);
              for (auto it = saved.rbegin(); it != saved.rend(); ++it) unbind(*it);
              return ok;
            },
            [&](const Case& x) {
              const auto& y = std::get<Case>(b->node);
              if (x.alts.size() != y.alts.size()) return false;
              if (!expr(x.scrut, y.scrut) || !env(x.env, y.env) || !type(x.ty, y.ty)) return false;
              auto zs = bind(x.binder, y.binder, false);
              bool ok = true;
              for (std::size_t i = 0; ok && i < x.alts.size(); ++i) ok = alt(x.alts[i], y.alts[i]);
              unbind(zs);
              return ok;
            },
        },
        a->node);
  }

 private:
  struct Saved {
    bool mult;
    Name a, b;
    std::optional<Name> old_left, old_right;
  };

  bool free_by_text_;
  std::map<Name, Name> term_left_, term_right_, mult_left_, mult_right_;

  Saved bind(const Name& a, const Name& b, bool mult) {
    auto& l = mult ? mult_left_ : term_left_;
    auto& r = mult ? mult_right_ : term_right_;
    Saved s{mult, a, b, std::nullopt, std::nullopt};
    if (auto it = l.find(a); it != l.end()) s.old_left = it->second;
    if (auto it = r.find(b); it != r.end()) s.old_right = it->second;
    l[a] = b;
    r[b] = a;
    return s;
  }
  void unbind(const Saved& s) {
    auto& l = s.mult ? mult_left_ : term_left_;
    auto& r = s.mult ? mult_right_ : term_right_;
    if (s.old_left) l[s.a] = *s.old_left; else l.erase(s.a);
    if (s.old_right) r[s.b] = *s.old_right; else r.erase(s.b);
  }

  bool alt(const Alt& a, const Alt& b) {
    if (a.pat.index() != b.pat.index()) return false;
    const auto* ca = std::get_if<ConPat>(&a.pat);
    if (!ca) return expr(a.rhs, b.rhs);
    const auto& cb = std::get<ConPat>(b.pat);
    if (ca->ctor != cb.ctor || ca->binders.size() != cb.binders.size()) return false;
    std::vector<Saved> saved;
    bool ok = true;
    for (std::size_t i = 0; i < ca->binders.size(); ++i) {
      ok = ok && mult(ca->binders[i].mult, cb.binders[i].mult);
      saved.push_back(bind(ca->binders[i].var, cb.binders[i].var, false));
    }
    ok = ok && expr(a.rhs, b.rhs);
    for (auto it = saved.rbegin(); it != saved.rend(); ++it) unbind(*it);
    return ok;
  }
};

}  // namespace

bool alpha_eq(const ExprPtr& a, const ExprPtr& b) { return AlphaCmp(true).expr(a, b); }

bool alpha_eq(const TypePtr& a, const TypePtr& b) { return AlphaCmp(false).type(a, b); }

}  // namespace lc
