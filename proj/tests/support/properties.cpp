#include "properties.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "generator.hpp"
#include "lc/checker.hpp"
#include "lc/parser.hpp"

namespace lc::testing {

namespace {

using Item = TypedGenerator::Item;

// One generated open term together with the variables it was built against.
struct Instance {
  ExprPtr term;
  TypePtr ty;
  Item subject;
  std::vector<Item> linear;  // excluding the subject
  std::vector<Item> omega;
};

TypingCtx context_of(const std::vector<Item>& linear, const std::vector<Item>& omega) {
  TypingCtx ctx;
  for (const auto& o : omega) ctx.gamma[o.name] = Unrestricted{o.ty};
  for (const auto& l : linear) ctx.delta[ResourceKey{l.name, 0, {}}] = ResourceInfo{l.ty, Mult::one()};
  return ctx;
}

std::vector<Item> fresh_items(TypedGenerator& g, std::size_t n, const char* stem) {
  std::vector<Item> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Item{fresh_name(stem), g.random_type()});
  return out;
}

std::size_t uniform(TypedGenerator& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g.rng());
}

bool coin(TypedGenerator& g, double p) { return std::bernoulli_distribution(p)(g.rng()); }

// A term consuming the subject linearly. About a third are broken on purpose
// so the comparison also sees rejected terms: either the subject is left
// unused, or another linear variable is replaced by the subject.
Instance linear_instance(TypedGenerator& g) {
  Instance in;
  in.ty = g.types()[uniform(g, 0, 6)];
  in.subject = Item{fresh_name("x"), g.random_type()};
  in.linear = fresh_items(g, uniform(g, 0, 2), "y");
  in.omega = fresh_items(g, uniform(g, 0, 1), "w");
  std::vector<Item> consumed = in.linear;
  const double roll = std::uniform_real_distribution<double>(0, 1)(g.rng());
  if (roll >= 0.15) consumed.push_back(in.subject);
  ExprPtr e = g.expr(in.ty, consumed, in.omega, 3);
  if (roll >= 0.15 && roll < 0.3 && !in.linear.empty()) e = subst_expr(e, in.linear.front().name, var_e(in.subject.name));
  in.term = g.with_prelude(e);
  return in;
}

std::string describe(const Instance& in, const CheckResult& a, const CheckResult& b) {
  auto verdict = [](const CheckResult& r) { return r.ok() ? std::string("accepted") : r.error->render(); };
  return pretty_expr(in.term) + "\n  before: " + verdict(a) + "\n  after: " + verdict(b);
}

UsageEnv env_of(const std::vector<Item>& items, int depth) {
  UsageEnv env;
  for (const auto& i : items) env.insert(UsageEntry{ResourceKey{i.name, depth, {}}, Mult::one()});
  return env;
}

std::vector<Item> unit_resources(TypedGenerator& g, std::size_t n) {
  std::vector<Item> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Item{fresh_name("d"), g.types()[1]});
  return out;
}

}  // namespace

PropertyStats lemma_linear_delta(std::uint64_t seed, std::size_t n) {
  PropertyStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    TypedGenerator g(seed + i);
    Signatures sigs(g.decls());
    Instance in = linear_instance(g);
    std::vector<Item> lin = in.linear;
    lin.push_back(in.subject);
    CheckResult before = check_expr(sigs, context_of(lin, in.omega), in.term);

    std::vector<Item> delta = unit_resources(g, uniform(g, 1, 2));
    std::vector<Item> lin_after = in.linear;
    lin_after.insert(lin_after.end(), delta.begin(), delta.end());
    TypingCtx ctx = context_of(lin_after, in.omega);
    ctx.gamma[in.subject.name] = DeltaBound{in.subject.ty, env_of(delta, 0)};
    CheckResult after = check_expr(sigs, ctx, in.term);

    ++stats.instances;
    if (before.ok() != after.ok()) stats.fail(describe(in, before, after));
  }
  return stats;
}

PropertyStats lemma_delta_linear(std::uint64_t seed, std::size_t n) {
  PropertyStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    TypedGenerator g(seed + i);
    Signatures sigs(g.decls());
    Instance in = linear_instance(g);

    // x bound to irrelevant resources that nothing else can reach.
    std::vector<Item> delta = unit_resources(g, uniform(g, 1, 2));
    TypingCtx ctx = context_of(in.linear, in.omega);
    for (const auto& d : delta) ctx.delta[ResourceKey{d.name, 1, {}}] = ResourceInfo{d.ty, Mult::one()};
    ctx.gamma[in.subject.name] = DeltaBound{in.subject.ty, env_of(delta, 1)};
    CheckResult before = check_expr(sigs, ctx, in.term);

    std::vector<Item> lin = in.linear;
    lin.push_back(in.subject);
    CheckResult after = check_expr(sigs, context_of(lin, in.omega), in.term);

    ++stats.instances;
    if (before.ok() != after.ok()) stats.fail(describe(in, before, after));
  }
  return stats;
}

PropertyStats lemma_omega_delta(std::uint64_t seed, std::size_t n) {
  PropertyStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    TypedGenerator g(seed + i);
    Signatures sigs(g.decls());
    Instance in;
    in.ty = g.types()[uniform(g, 0, 6)];
    in.subject = Item{fresh_name("w"), g.types()[uniform(g, 0, 6)]};
    in.linear = fresh_items(g, uniform(g, 0, 2), "y");
    in.omega = fresh_items(g, uniform(g, 0, 1), "v");
    std::vector<Item> omega = in.omega;
    omega.push_back(in.subject);
    ExprPtr e = g.expr(in.ty, in.linear, omega, 3);
    // Occasionally use the subject in place of a linear variable: the term
    // then leaves that variable unconsumed under both bindings.
    if (coin(g, 0.2) && !in.linear.empty()) e = subst_expr(e, in.linear.front().name, var_e(in.subject.name));
    in.term = g.with_prelude(e);

    CheckResult before = check_expr(sigs, context_of(in.linear, omega), in.term);
    TypingCtx ctx = context_of(in.linear, in.omega);
    ctx.gamma[in.subject.name] = DeltaBound{in.subject.ty, UsageEnv{}};
    CheckResult after = check_expr(sigs, ctx, in.term);

    ++stats.instances;
    if (before.ok() != after.ok()) stats.fail(describe(in, before, after));
  }
  return stats;
}

PropertyStats lemma_irrelevance(std::uint64_t seed, std::size_t n) {
  PropertyStats stats;
  // Scrutinee types by generator index, with a constructor to match on.
  static const std::vector<std::pair<std::size_t, const char*>> shapes = {
      {2, "MkPair"}, {4, "S"}, {5, "Some"}, {0, "True"}, {1, "U"}, {3, "Box"}, {2, ""}};
  for (std::uint64_t s = seed; stats.instances < n && s < seed + 20 * n; ++s) {
    TypedGenerator g(s);
    Signatures sigs(g.decls());
    const auto& [type_index, ctor] = shapes[uniform(g, 0, shapes.size() - 1)];
    TypePtr scrut_ty = g.types()[type_index];
    TypePtr result_ty = g.types()[uniform(g, 0, 6)];
    std::vector<Item> resources = unit_resources(g, uniform(g, 1, 3));
    std::vector<Item> others = fresh_items(g, uniform(g, 0, 1), "y");
    std::vector<Item> outer_omega = fresh_items(g, uniform(g, 0, 1), "w");
    std::vector<Item> in_scope = outer_omega;  // unrestricted inside the alternative
    Name z = fresh_name("z");

    Alt alt{WildPat{}, nullptr};
    std::vector<Item> consumed = others;
    std::vector<Item> fields_linear;
    std::size_t linear_fields = 0;
    if (*ctor != '\0') {
      const auto* dt = std::get_if<DataType>(&scrut_ty->node);
      CtorSignature sig = sigs.instantiate(ctor, dt->args);
      ConPat pat{ctor, {}};
      for (const auto& f : sig.fields) {
        Item v{fresh_name("p"), f.ty};
        pat.binders.push_back(PatBinder{v.name, f.mult});
        (f.mult.is_many() ? in_scope : fields_linear).push_back(v);
      }
      linear_fields = sig.linear_indices.size();
      alt.pat = pat;
    }
    if (*ctor == '\0') {
      consumed.push_back(Item{z, scrut_ty});
    } else if (linear_fields == 0) {
      in_scope.push_back(Item{z, scrut_ty});  // the binder carries no resources
    } else if (coin(g, 0.3)) {
      consumed.push_back(Item{z, scrut_ty});
    } else {
      consumed.insert(consumed.end(), fields_linear.begin(), fields_linear.end());
    }
    alt.rhs = g.with_prelude(g.expr(result_ty, consumed, in_scope, 3));
    TypingCtx outer = context_of(others, outer_omega);
    Delta scrut_resources;
    for (const auto& r : resources) scrut_resources[ResourceKey{r.name, 0, {}}] = ResourceInfo{r.ty, Mult::one()};

    InferOutcome irrelevant = check_alt(sigs, outer, alt, AltMode{false, {}}, z, scrut_ty, scrut_resources, result_ty);
    if (!irrelevant.ok()) continue;
    ++stats.instances;

    // Every assignment of the resources to the linear fields.
    const std::size_t parts = std::max<std::size_t>(linear_fields, 1);
    std::vector<std::size_t> owner(resources.size(), 0);
    while (true) {
      AltMode mode{true, std::vector<UsageEnv>(linear_fields)};
      for (std::size_t r = 0; r < resources.size() && linear_fields > 0; ++r) {
        mode.field_envs[owner[r]].insert(UsageEntry{ResourceKey{resources[r].name, 0, {}}, Mult::one()});
      }
      InferOutcome whnf = check_alt(sigs, outer, alt, mode, z, scrut_ty, scrut_resources, result_ty);
      ++stats.checks;
      if (!whnf.ok()) {
        std::string split;
        for (const auto& env : mode.field_envs) split += " " + show(env);
        stats.fail(pretty_expr(alt.rhs) + "\n  fields:" + split + "\n  " + whnf.error->render());
        break;
      }
      std::size_t r = 0;
      while (r < owner.size() && ++owner[r] == parts) owner[r++] = 0;
      if (r == owner.size() || linear_fields <= 1) break;
    }
  }
  return stats;
}

PropertyStats parser_round_trip(std::uint64_t seed, std::size_t n) {
  PropertyStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    SourceProgram p = random_syntax_program(seed + i);
    ++stats.instances;
    std::string text = pretty_print(p);
    try {
      SourceProgram q = parse_program(text);
      bool same = alpha_eq(p.main, q.main) && p.assumptions.size() == q.assumptions.size() &&
                  p.decls.size() == q.decls.size() && pretty_print(q) == text;
      for (std::size_t k = 0; same && k < p.assumptions.size(); ++k) {
        same = p.assumptions[k].name.text == q.assumptions[k].name.text &&
               p.assumptions[k].mult == q.assumptions[k].mult ? alpha_eq(p.assumptions[k].ty, q.assumptions[k].ty)
                                                               : false;
      }
      if (!same) stats.fail(text + "\n  reprinted as\n" + pretty_print(q));
    } catch (const ParseError& e) {
      stats.fail(text + "\n  " + e.what());
    }
  }
  return stats;
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<CorpusFile> load_corpus(const std::filesystem::path& dir) {
  std::vector<CorpusFile> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".lc") continue;
    CorpusFile f{entry.path().filename().string(), "", read_text(entry.path())};
    std::istringstream lines(f.text);
    std::string line;
    while (std::getline(lines, line) && line.rfind("--", 0) == 0) {
      if (auto pos = line.find("EXPECT:"); pos != std::string::npos) {
        std::istringstream(line.substr(pos + 7)) >> f.expect;
        break;
      }
    }
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

}  // namespace lc::testing
