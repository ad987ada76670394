#include <sstream>

#include "lc/eval.hpp"
#include "lc/parser.hpp"

namespace lc {

std::string to_string(Stuck::Reason r) {
  switch (r) {
    case Stuck::Reason::DoubleForce: return "DoubleForce";
    case Stuck::Reason::UnboundVariable: return "UnboundVariable";
    case Stuck::Reason::UnmatchedPattern: return "UnmatchedPattern";
    case Stuck::Reason::BadApplication: return "BadApplication";
  }
  return "?";
}

namespace {

using Ann = HeapBinding::Ann;

// Raised inside the machine to abandon a run.
struct Halt {
  std::variant<Stuck, FuelExhausted> why;
};

class Machine {
 public:
  Machine(const Signatures& sigs, Semantics sem, EvalEnv theta, std::size_t fuel)
      : sigs_(sigs), sem_(sem), theta_(std::move(theta)), fuel_(fuel) {}

  std::function<void(const std::string&)> trace;
  // Called after every transition while `checking_` is set.
  std::function<void(const MachineState&)> on_state;

  std::size_t steps() const { return steps_; }
  const EvalEnv& theta() const { return theta_; }
  EvalEnv& theta() { return theta_; }
  std::map<std::string, std::size_t>& rhs_entries() { return rhs_entries_; }

  // Evaluates e to weak head normal form against the current heap.
  ExprPtr whnf(const ExprPtr& e, bool check_states) {
    std::vector<Frame> saved;
    saved.swap(stack_);
    focus_ = e;
    checking_ = check_states;
    if (checking_) emit_state();
    while (true) {
      if (is_whnf(focus_)) {
        if (stack_.empty()) break;
        ret();
      } else {
        enter();
      }
    }
    checking_ = false;
    stack_.swap(saved);
    return focus_;
  }

  // Deep rendering; constructor fields are forced up to a fixed depth.
  std::string readback(const ExprPtr& v, int depth = 0) {
    Spine sp = spine_of(v);
    const auto* k = std::get_if<Ctor>(&sp.head->node);
    if (!k) return "<fun>";
    auto ref = sigs_.ctor(k->name);
    std::vector<ExprPtr> fields;
    std::size_t mults = 0;
    for (const auto& a : sp.args) {
      if (const auto* t = std::get_if<ExprPtr>(&a)) {
        fields.push_back(*t);
      } else {
        ++mults;
      }
    }
    if (!ref || fields.size() != ref->ctor->fields.size() || mults != ref->decl->params.size()) {
      return "<fun>";
    }
    if (fields.empty()) return k->name;
    if (depth >= kMaxReadbackDepth) return k->name + "(...)";
    std::string out = k->name + "(";
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ", ";
      out += readback(whnf(fields[i], false), depth + 1);
    }
    return out + ")";
  }

 private:
  static constexpr int kMaxReadbackDepth = 32;

  bool instrumented() const { return sem_ == Semantics::Instrumented; }

  void tick(const char* rule) {
    if (steps_ >= fuel_) throw Halt{FuelExhausted{steps_}};
    ++steps_;
    if (trace) {
      std::ostringstream os;
      os << "step " << steps_ << " " << rule << " | " << pretty_expr(focus_) << " | heap "
         << theta_.bindings.size();
      trace(os.str());
    }
  }

  void emit_state() {
    if (!on_state) return;
    on_state(MachineState{theta_, focus_, stack_});
  }

  void stuck(Stuck::Reason r, const std::string& name) { throw Halt{Stuck{r, name, steps_}}; }

  Name bind(const Name& like, HeapBinding b) {
    Name n = fresh_name(like.text);
    theta_.bindings.emplace(n, std::move(b));
    return n;
  }

  // Arguments are variables after the sharing translation; anything else (only
  // possible for unchecked input) is allocated on the heap.
  Name atom(const ExprPtr& e) {
    if (const auto* v = std::get_if<Var>(&e->node)) return v->name;
    HeapBinding b;
    b.ann = instrumented() ? Ann::Delta : Ann::Omega;
    b.rhs = e;
    return bind(Name{"t", 0}, std::move(b));
  }

  Ann let_ann() const { return instrumented() ? Ann::Delta : Ann::Omega; }

  void enter() {
    std::visit(Overload{
                   [&](const Var& v) { force(v.name); },
                   [&](const App& a) {
                     tick("App");
                     Frame f;
                     f.kind = Frame::Kind::Arg;
                     f.var = atom(a.arg);
                     stack_.push_back(std::move(f));
                     focus_ = a.fun;
                   },
                   [&](const MultApp& m) {
                     tick("MultApp");
                     Frame f;
                     f.kind = Frame::Kind::MultArg;
                     f.mult = m.mult;
                     stack_.push_back(std::move(f));
                     focus_ = m.fun;
                   },
                   [&](const Let& l) {
                     tick("Let");
                     Name x = fresh_name(l.bind.var.text);
                     HeapBinding b{let_ann(), l.bind.env.value_or(UsageEnv{}), l.bind.ty, l.bind.rhs, std::nullopt};
                     theta_.bindings.emplace(x, std::move(b));
                     focus_ = subst_expr(l.body, l.bind.var, var_e(x));
                   },
                   [&](const LetRec& l) {
                     tick("LetRec");
                     std::map<Name, ExprPtr> ren;
                     std::vector<Name> fresh;
                     for (const auto& b : l.binds) {
                       fresh.push_back(fresh_name(b.var.text));
                       ren[b.var] = var_e(fresh.back());
                     }
                     int group = next_group_++;
                     for (std::size_t i = 0; i < l.binds.size(); ++i) {
                       const auto& b = l.binds[i];
                       theta_.bindings.emplace(fresh[i], HeapBinding{let_ann(), b.env.value_or(UsageEnv{}), b.ty,
                                                                     subst_exprs(b.rhs, ren), group});
                     }
                     focus_ = subst_exprs(l.body, ren);
                   },
                   [&](const Case& c) {
                     tick("Case");
                     Frame f;
                     f.kind = Frame::Kind::Case;
                     f.case_node = focus_;
                     stack_.push_back(std::move(f));
                     focus_ = c.scrut;
                   },
                   [&](const auto&) { stuck(Stuck::Reason::BadApplication, pretty_expr(focus_)); },
               },
               focus_->node);
    if (checking_) emit_state();
  }

  void force(const Name& x) {
    auto it = theta_.bindings.find(x);
    if (it == theta_.bindings.end()) {
      if (theta_.erased_set.contains(x)) stuck(Stuck::Reason::DoubleForce, x.text);
      // A binding under evaluation that is demanded again: the program loops.
      if (in_progress_.contains(x)) throw Halt{FuelExhausted{steps_}};
      stuck(Stuck::Reason::UnboundVariable, x.text);
    }
    HeapBinding b = it->second;
    bool value = is_whnf(b.rhs);
    if (b.ann == Ann::LinearOne && instrumented()) {
      tick("Var_1");
      theta_.bindings.erase(it);
      theta_.erased.push_back(x);
      theta_.erased_set.insert(x);
    } else {
      tick(b.ann == Ann::Delta ? "Var_Delta" : "Var_w");
      if (!value) theta_.bindings.erase(it);
    }
    if (!value) {
      ++rhs_entries_[x.text];
      Frame f;
      f.kind = Frame::Kind::Update;
      f.var = x;
      f.binding = b;
      f.erased_mark = theta_.erased.size();
      stack_.push_back(std::move(f));
      in_progress_.insert(x);
    }
    focus_ = b.rhs;
  }

  // Returns the value in focus to the innermost frame.
  void ret() {
    Frame f = std::move(stack_.back());
    stack_.pop_back();
    switch (f.kind) {
      case Frame::Kind::Update: update(f); break;
      case Frame::Kind::Arg: apply(f.var); break;
      case Frame::Kind::MultArg: apply_mult(f.mult); break;
      case Frame::Kind::Case: match(f.case_node); break;
      case Frame::Kind::Scope: close_scope(f); break;
    }
    if (checking_) emit_state();
  }

  void update(const Frame& f) {
    tick("Update");
    in_progress_.erase(f.var);
    if (f.binding.ann == Ann::LinearOne && instrumented()) return;
    HeapBinding b = f.binding;
    b.rhs = focus_;
    if (b.ann == Ann::Delta) {
      // Drop the resources that were consumed while producing the value.
      UsageEnv env;
      std::set<Name> gone(theta_.erased.begin() + static_cast<std::ptrdiff_t>(f.erased_mark), theta_.erased.end());
      for (const auto& e : b.env.entries()) {
        if (!gone.contains(e.key.name)) env.insert(e);
      }
      b.env = std::move(env);
    }
    theta_.bindings[f.var] = std::move(b);
  }

  // The body of a linear lambda reached WHNF. A linear binding it did not
  // force may now be reachable from a value that the caller is free to share
  // (when the argument carried no resources), so it becomes a Delta binding
  // over the argument's resources instead of a one-shot binding.
  void close_scope(const Frame& f) {
    for (const auto& [x, arg] : f.scoped) {
      auto it = theta_.bindings.find(x);
      if (it == theta_.bindings.end() || it->second.ann != Ann::LinearOne) continue;
      UsageEnv env;
      if (auto a = theta_.bindings.find(arg); a != theta_.bindings.end()) {
        if (a->second.ann == Ann::LinearOne) env.insert(UsageEntry{ResourceKey{arg, 0, {}}, Mult::one()});
        if (a->second.ann == Ann::Delta) env = a->second.env;
      }
      it->second.ann = Ann::Delta;
      it->second.env = std::move(env);
    }
  }

  void apply(const Name& arg) {
    if (const auto* a = std::get_if<Abs>(&focus_->node)) {
      if (instrumented() && a->mult.is_linear()) {
        tick("Beta_1");
        Name x = bind(a->var, HeapBinding{Ann::LinearOne, {}, a->ty, var_e(arg), std::nullopt});
        focus_ = subst_expr(a->body, a->var, var_e(x));
        // Consecutive scopes share one frame so tail calls run in constant stack.
        if (stack_.empty() || stack_.back().kind != Frame::Kind::Scope) {
          Frame f;
          f.kind = Frame::Kind::Scope;
          stack_.push_back(std::move(f));
        }
        stack_.back().scoped.emplace_back(x, arg);
      } else {
        tick("Beta");
        focus_ = subst_expr(a->body, a->var, var_e(arg));
      }
      return;
    }
    if (is_whnf_head(focus_)) {
      tick("CtorArg");
      focus_ = app_e(focus_, var_e(arg));
      return;
    }
    stuck(Stuck::Reason::BadApplication, pretty_expr(focus_));
  }

  void apply_mult(const Mult& m) {
    if (const auto* a = std::get_if<MultAbs>(&focus_->node)) {
      tick("MultBeta");
      focus_ = subst_mult(a->body, a->binder, m);
      return;
    }
    if (is_whnf_head(focus_)) {
      tick("CtorMult");
      focus_ = make_expr(MultApp{focus_, m});
      return;
    }
    stuck(Stuck::Reason::BadApplication, pretty_expr(focus_));
  }

  void match(const ExprPtr& node) {
    const auto& c = std::get<Case>(node->node);
    Spine sp = spine_of(focus_);
    const auto* k = std::get_if<Ctor>(&sp.head->node);
    std::vector<ExprPtr> fields;
    for (const auto& a : sp.args) {
      if (const auto* t = std::get_if<ExprPtr>(&a)) fields.push_back(*t);
    }
    const Alt* chosen = nullptr;
    for (const auto& alt : c.alts) {
      const auto* con = std::get_if<ConPat>(&alt.pat);
      if (con && k && con->ctor == k->name && con->binders.size() == fields.size()) {
        chosen = &alt;
        break;
      }
    }
    if (!chosen) {
      for (const auto& alt : c.alts) {
        if (std::holds_alternative<WildPat>(alt.pat)) {
          chosen = &alt;
          break;
        }
      }
    }
    if (!chosen) stuck(Stuck::Reason::UnmatchedPattern, pretty_expr(focus_));
    tick("Match");
    std::map<Name, ExprPtr> s;
    if (const auto* con = std::get_if<ConPat>(&chosen->pat)) {
      for (std::size_t i = 0; i < fields.size(); ++i) s[con->binders[i].var] = var_e(atom(fields[i]));
    }
    // The case binder names the scrutinee's value through the heap.
    HeapBinding zb{let_ann(), c.env.value_or(UsageEnv{}), c.ty, focus_, std::nullopt};
    s[c.binder] = var_e(bind(c.binder, std::move(zb)));
    focus_ = subst_exprs(chosen->rhs, s);
  }

  const Signatures& sigs_;
  Semantics sem_;
  EvalEnv theta_;
  std::size_t fuel_;
  std::size_t steps_ = 0;
  int next_group_ = 0;
  bool checking_ = false;
  ExprPtr focus_;
  std::vector<Frame> stack_;
  std::set<Name> in_progress_;
  std::map<std::string, std::size_t> rhs_entries_;
};

EvalOutcome run(const Signatures& sigs, Semantics sem, EvalEnv theta, const ExprPtr& e, std::size_t fuel) {
  Machine m(sigs, sem, std::move(theta), fuel);
  try {
    ExprPtr v = m.whnf(e, false);
    return Value{v, m.theta()};
  } catch (const Halt& h) {
    return std::visit([](const auto& w) -> EvalOutcome { return w; }, h.why);
  }
}

}  // namespace

EvalOutcome eval_natural(const Signatures& sigs, EvalEnv theta, const ExprPtr& e, std::size_t fuel) {
  return run(sigs, Semantics::Natural, std::move(theta), e, fuel);
}

EvalOutcome eval_instrumented(const Signatures& sigs, EvalEnv theta, const ExprPtr& e, std::size_t fuel) {
  return run(sigs, Semantics::Instrumented, std::move(theta), e, fuel);
}

EvalReport evaluate(const ExprPtr& e, const EvalOptions& opts) {
  static const Signatures empty;
  const Signatures& sigs = opts.sigs ? *opts.sigs : empty;
  Machine m(sigs, opts.semantics, {}, opts.fuel);
  m.trace = opts.trace;
  EvalReport rep;
  bool check = opts.assert_states && opts.semantics == Semantics::Instrumented && opts.expected_type;
  if (check) {
    m.on_state = [&](const MachineState& st) {
      ++rep.states_checked;
      CheckResult r = check_state_welltyped(sigs, st, opts.expected_type);
      if (!r.ok()) {
        if (rep.state_failures++ == 0) {
          rep.first_state_failure = "after step " + std::to_string(m.steps()) + ": " + r.error->render();
        }
      }
    };
  }
  try {
    ExprPtr v = m.whnf(e, check);
    if (opts.readback) rep.readback = m.readback(v);
    rep.outcome = Value{v, m.theta()};
  } catch (const Halt& h) {
    rep.outcome = std::visit([](const auto& w) -> EvalOutcome { return w; }, h.why);
  }
  rep.steps = m.steps();
  rep.rhs_entries = m.rhs_entries();
  return rep;
}

}  // namespace lc
