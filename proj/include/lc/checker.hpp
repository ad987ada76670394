#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lc/ir.hpp"

namespace lc {

struct TypeError {
  enum class Kind {
    UnboundVariable,
    LinearityViolation,
    UsageEnvMismatch,
    MultiplicityMismatch,
    NonExhaustiveCase,
    TagMismatch,
    IllFormedMult,
    TypeMismatch,
    WHNFRequired,
  };
  enum class Linearity { None, DoubleUse, Discarded, LeftOver };

  Kind kind = Kind::TypeMismatch;
  Linearity linearity = Linearity::None;
  NodeId node = 0;
  std::string subject;  // offending name, when there is one
  std::string message;

  // "LinearityViolation: DoubleUse x" for linearity errors, "Kind: message" otherwise.
  std::string render() const;
  std::string kind_name() const;
};

std::string to_string(TypeError::Kind k);
std::string to_string(TypeError::Linearity l);

struct TraceRecord {
  std::string rule;
  NodeId node = 0;
  std::string delta_in;
  std::string delta_out;
};

struct InferOutcome {
  TypePtr ty;
  Delta delta_out;
  std::optional<TypeError> error;
  bool ok() const { return !error; }
};

// How a case alternative is checked: with per-linear-field environments when the
// scrutinee is a matching WHNF, otherwise against the irrelevant scrutinee resources.
struct AltMode {
  bool whnf = false;
  std::vector<UsageEnv> field_envs;
};

struct AltSnapshot {
  TypingCtx outer;   // context after the scrutinee, before its resources are re-added
  TypingCtx at_rhs;  // context the right-hand side is checked in
  Alt alt;
  AltMode mode;
  Name binder;
  TypePtr scrut_ty;
  Delta scrut_resources;
  InferOutcome outcome;  // of the right-hand side, before the exit obligations
  bool accepted = false;  // alternative as a whole, including exit obligations
};

struct ScopeSnapshot {
  TypingCtx at_body;
  ExprPtr body;
  Name var;
  Mult mult;
  TypePtr ty;
  InferOutcome outcome;
};

// Inferred annotations for let, letrec and case nodes.
struct NodeAnnotation {
  std::vector<UsageEnv> envs;
  std::vector<TypePtr> tys;
};
using AnnotationMap = std::unordered_map<const Expr*, NodeAnnotation>;
using TypeMap = std::unordered_map<const Expr*, TypePtr>;

struct CheckOptions {
  std::vector<TraceRecord>* trace = nullptr;
  TypeMap* types_out = nullptr;
  AnnotationMap* annotations_out = nullptr;
  std::function<void(const AltSnapshot&)> on_alt;
  std::function<void(const ScopeSnapshot&)> on_scope;
};

struct CheckResult {
  TypePtr ty;
  std::optional<TypeError> error;
  bool ok() const { return !error; }
};

bool mult_wf(const TypingCtx& ctx, const Mult& m);

TypingCtx initial_context(const SourceProgram& p);

InferOutcome infer(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e,
                   const CheckOptions& opts = {});

// Checks e and requires every linear resource to be consumed.
CheckResult check_expr(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e,
                       const CheckOptions& opts = {});

CheckResult check_program(const SourceProgram& p, const CheckOptions& opts = {});

struct WhnfSplit {
  TypePtr ty;
  std::vector<UsageEnv> field_envs;  // one per linear field, or one for a lambda
  bool saturated_ctor = false;
  std::string ctor;
  Delta delta_out;
  std::optional<TypeError> error;
};
WhnfSplit check_whnf_split(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e,
                           const CheckOptions& opts = {});

// Checks a single alternative. `outer` is the context after the scrutinee; the
// scrutinee resources are re-added according to `mode`.
InferOutcome check_alt(const Signatures& sigs, const TypingCtx& outer, const Alt& alt,
                       const AltMode& mode, const Name& binder, const TypePtr& scrut_ty,
                       const Delta& scrut_resources, const TypePtr& result_ty,
                       const CheckOptions& opts = {});

// Replaces x by its n fragments tagged with ctor. Throws TypeError (TagMismatch)
// if x was already split at a different constructor or n is zero.
Delta split_on_demand(const Delta& delta, const ResourceKey& x, const std::string& ctor, int n);

// Merges complete sibling fragment sets back into their parent.
Delta normalize(Delta delta);

UsageEnv to_env(const Delta& d);
Delta incremented(const Delta& d);

// Rebuilds e with let, letrec and case annotations taken from `anns`.
ExprPtr fill_annotations(const ExprPtr& e, const AnnotationMap& anns);

}  // namespace lc
