#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lc/checker.hpp"
#include "lc/ir.hpp"

namespace lc {

enum class Pass {
  Inline,
  Beta,
  BetaSharing,
  BetaMult,
  CaseKnown,
  CaseOfCase,
  LetLam,
  LetApp,
  LetCase,
  CaseLet,
  LetLet,
  EtaExpand,
  EtaReduce,
  BinderSwap,
  ReverseBinderSwap,
};

std::string_view pass_name(Pass p);
std::optional<Pass> pass_from_name(std::string_view name);
const std::vector<Pass>& all_passes();
// Every pass except the reverse binder swap is expected to preserve types.
bool is_type_preserving(Pass p);

// Child indices from the root. Abs, MultAbs and MultApp have one child (0);
// App: 0 function, 1 argument; Let: 0 rhs, 1 body; LetRec: 0..n-1 rhs, n body;
// Case: 0 scrutinee, 1.. alternative right-hand sides.
using Path = std::vector<std::size_t>;
std::string show_path(const Path& p);  // "0.1.2", root is "."
std::optional<Path> parse_path(std::string_view s);

std::vector<ExprPtr> children(const ExprPtr& e);
ExprPtr subterm(const ExprPtr& e, const Path& p);  // null if the path is invalid
ExprPtr replace_subterm(const ExprPtr& e, const Path& p, const ExprPtr& with);

struct RewriteSite {
  Path path;
  Pass pass;
  std::vector<std::string> side_conditions;  // guards that were checked
};

struct RewriteResult {
  enum class Status { Applied, NotApplicable, GuardFailed };
  Status status = Status::NotApplicable;
  ExprPtr after;
  std::string reason;
  std::vector<std::string> side_conditions;
};

// Applies one pass at one site. The context is only used to compute types
// (eta conversions). For case-let the path addresses the lifted subterm.
RewriteResult rewrite_at(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass,
                         const Path& path);

// Sites, in pre-order, where the pass applies.
std::vector<RewriteSite> find_sites(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass);

// Outermost-first, at most once per node of the input.
ExprPtr rewrite_everywhere(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e, Pass pass,
                           std::size_t* applied = nullptr);

struct TransformOutcome {
  enum class Verdict { Preserved, Rejected, NotApplicable, GuardFailed };
  Verdict verdict = Verdict::NotApplicable;
  Pass pass = Pass::Inline;
  std::optional<Path> path;  // empty for whole-program application
  ExprPtr before;
  ExprPtr after;
  TypePtr ty_before;
  TypePtr ty_after;
  std::optional<TypeError> error;  // for Rejected
  std::string note;
};
std::string to_string(TransformOutcome::Verdict v);

// Re-checks `after` in place of the program's main; Preserved iff it checks at
// a type alpha-equivalent to `ty_before`.
TransformOutcome verify(const SourceProgram& p, const TypePtr& ty_before, Pass pass, const ExprPtr& after);

struct PipelineStep {
  Pass pass;
  std::optional<Path> at;  // none: everywhere
};

// Applies the steps in order, re-checking after each one. The program must check.
std::vector<TransformOutcome> preservation_check(const SourceProgram& p, const std::vector<PipelineStep>& pipeline);

// Applies the pass at every site of the input independently and verifies each.
std::vector<TransformOutcome> check_all_sites(const SourceProgram& p, Pass pass);

}  // namespace lc
