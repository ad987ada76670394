#include "lc/parser.hpp"

namespace lc {

namespace {

class Printer {
 public:
  explicit Printer(std::set<std::string> reserved) : used_(std::move(reserved)) {
    for (const char* kw : {"data", "assume", "let", "letrec", "in", "case", "of", "forall", "w", "_"}) {
      used_.insert(kw);
    }
  }

  // Free names keep their source text.
  void pin(const Name& n) {
    if (disp_.contains(n)) return;
    disp_[n] = n.text;
    used_.insert(n.text);
  }

  const std::string& name(const Name& n) {
    auto it = disp_.find(n);
    if (it != disp_.end()) return it->second;
    std::string cand = n.text.empty() ? "v" : n.text;
    while (used_.contains(cand)) cand += "'";
    used_.insert(cand);
    return disp_.emplace(n, cand).first->second;
  }

  std::string mult(const Mult& m) { return m.is_var() ? name(m.var) : show(m); }

  std::string type(const TypePtr& t) {
    if (!t) return "?";
    return std::visit(Overload{
                          [&](const DataType& d) {
                            std::string s = d.tycon;
                            for (const auto& m : d.args) s += " " + mult(m);
                            return s;
                          },
                          [&](const FunType& f) {
                            std::string arg = type(f.arg);
                            if (!std::holds_alternative<DataType>(f.arg->node)) arg = "(" + arg + ")";
                            return arg + " ->@" + mult(f.mult) + " " + type(f.res);
                          },
                          [&](const ForallType& f) {
                            std::string b = name(f.binder);
                            return "forall " + b + ". " + type(f.body);
                          },
                      },
                      t->node);
  }

  std::string field_type(const TypePtr& t) {
    const auto* d = std::get_if<DataType>(&t->node);
    if (d && d->args.empty()) return d->tycon;
    return "(" + type(t) + ")";
  }

  std::string env(const UsageEnv& env) {
    std::string s = ":\xCE\x94{";
    bool first = true;
    for (const auto& e : env.entries()) {
      if (!first) s += ", ";
      first = false;
      s += std::string(static_cast<std::size_t>(e.key.depth), '[');
      s += name(e.key.name) + ":" + mult(e.mult);
      s += std::string(static_cast<std::size_t>(e.key.depth), ']');
      for (const auto& t : e.key.tags) s += "#" + t.ctor + "." + std::to_string(t.index);
    }
    return s + "}";
  }

  enum class Pos { Top, Fun, Arg };

  std::string expr(const ExprPtr& e, Pos pos = Pos::Top) {
    auto wrap = [&](std::string s, bool atomic_enough) {
      return atomic_enough ? s : "(" + s + ")";
    };
    return std::visit(
        Overload{
            [&](const Var& v) { return name(v.name); },
            [&](const Ctor& c) { return c.name; },
            [&](const MultAbs& m) {
              std::string s = "/\\" + name(m.binder) + ". " + expr(m.body);
              return wrap(s, pos == Pos::Top);
            },
            [&](const MultApp& m) {
              std::string s = expr(m.fun, Pos::Fun) + " @" + mult(m.mult);
              return wrap(s, pos != Pos::Arg);
            },
            [&](const Abs& a) {
              std::string s = "\\(" + name(a.var) + " :" + mult(a.mult) + " " + type(a.ty) + "). " +
                              expr(a.body);
              return wrap(s, pos == Pos::Top);
            },
            [&](const App& a) {
              std::string s = expr(a.fun, Pos::Fun) + " " + expr(a.arg, Pos::Arg);
              return wrap(s, pos != Pos::Arg);
            },
            [&](const Let& l) {
              std::string s = "let " + binding(l.bind) + " in " + expr(l.body);
              return wrap(s, pos == Pos::Top);
            },
            [&](const LetRec& l) {
              for (const auto& b : l.binds) name(b.var);
              std::string s = "letrec ";
              for (const auto& b : l.binds) s += binding(b) + "; ";
              s += "in " + expr(l.body);
              return wrap(s, pos == Pos::Top);
            },
            [&](const Case& c) {
              std::string s = "case " + expr(c.scrut) + " of " + name(c.binder);
              if (c.env) s += " " + env(*c.env);
              if (c.ty) s += " : " + type(c.ty);
              s += " { ";
              for (std::size_t i = 0; i < c.alts.size(); ++i) {
                if (i) s += "; ";
                s += alt(c.alts[i]);
              }
              s += " }";
              return wrap(s, pos == Pos::Top);
            },
        },
        e->node);
  }

  std::string binding(const Binding& b) {
    std::string s = name(b.var);
    if (b.env) s += " " + env(*b.env);
    if (b.ty) s += " : " + type(b.ty);
    return s + " = " + expr(b.rhs);
  }

  std::string alt(const Alt& a) {
    std::string s;
    if (const auto* con = std::get_if<ConPat>(&a.pat)) {
      s = con->ctor;
      for (const auto& b : con->binders) s += " " + name(b.var) + "@" + mult(b.mult);
    } else {
      s = "_";
    }
    return s + " => " + expr(a.rhs);
  }

 private:
  std::map<Name, std::string> disp_;
  std::set<std::string> used_;
};

std::set<std::string> ctor_names(const std::vector<DataDecl>& decls) {
  std::set<std::string> out;
  for (const auto& d : decls) {
    for (const auto& c : d.ctors) out.insert(c.name);
  }
  return out;
}

void pin_free(Printer& pr, const ExprPtr& e) {
  for (const auto& n : free_vars(e)) pr.pin(n);
  for (const auto& n : free_mult_vars(e)) pr.pin(n);
}

}  // namespace

std::string pretty_print(const SourceProgram& p) {
  Printer pr(ctor_names(p.decls));
  for (const auto& a : p.assumptions) pr.pin(a.name);
  pin_free(pr, p.main);
  std::string out;
  for (const auto& d : p.decls) {
    out += "data " + d.tycon;
    for (const auto& param : d.params) out += " " + pr.name(param);
    out += " =";
    for (std::size_t i = 0; i < d.ctors.size(); ++i) {
      out += i ? " | " : " ";
      out += d.ctors[i].name;
      for (const auto& f : d.ctors[i].fields) out += " " + pr.field_type(f.ty) + "@" + pr.mult(f.mult);
    }
    out += ";\n";
  }
  for (const auto& a : p.assumptions) {
    out += "assume " + pr.name(a.name) + " :" + pr.mult(a.mult) + " " + pr.type(a.ty) + ";\n";
  }
  out += pr.expr(p.main) + "\n";
  return out;
}

std::string pretty_expr(const ExprPtr& e) {
  Printer pr({});
  pin_free(pr, e);
  return pr.expr(e);
}

std::string pretty_type(const TypePtr& t) {
  Printer pr({});
  for (const auto& n : free_mult_vars(t)) pr.pin(n);
  return pr.type(t);
}

}  // namespace lc
