#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lc/checker.hpp"
#include "lc/ir.hpp"

namespace lc {

enum class Semantics { Natural, Instrumented };

struct HeapBinding {
  enum class Ann { Omega, LinearOne, Delta };
  Ann ann = Ann::Omega;
  UsageEnv env;  // for Delta bindings
  TypePtr ty;
  ExprPtr rhs;
  std::optional<int> group;  // letrec group
};

struct EvalEnv {
  std::map<Name, HeapBinding> bindings;
  // Linear bindings removed after being forced, in order.
  std::vector<Name> erased;
  std::set<Name> erased_set;
};

struct Frame {
  enum class Kind { Arg, MultArg, Case, Update, Scope };
  Kind kind = Kind::Arg;
  Name var;                     // Arg, Update
  Mult mult;                    // MultArg
  ExprPtr case_node;            // Case
  HeapBinding binding;          // Update: the binding being evaluated
  std::size_t erased_mark = 0;  // Update: erasures before the binding was entered
  // Scope: linear bindings made by beta steps whose bodies are still being
  // evaluated, each with the argument it was bound to.
  std::vector<std::pair<Name, Name>> scoped;
};

// The continuation stack plays the role of the pending-terms list in the
// well-typed-state definition.
struct MachineState {
  EvalEnv theta;
  ExprPtr focus;
  std::vector<Frame> stack;  // back is the innermost frame
};

struct Stuck {
  enum class Reason { DoubleForce, UnboundVariable, UnmatchedPattern, BadApplication };
  Reason reason = Reason::DoubleForce;
  std::string name;
  std::size_t step = 0;
};
std::string to_string(Stuck::Reason r);

struct FuelExhausted {
  std::size_t steps = 0;
};

struct Value {
  ExprPtr whnf;
  EvalEnv env;
};

using EvalOutcome = std::variant<Value, Stuck, FuelExhausted>;

struct EvalOptions {
  Semantics semantics = Semantics::Instrumented;
  std::size_t fuel = 1'000'000;
  // Re-check the expanded state after every transition (instrumented only).
  bool assert_states = false;
  TypePtr expected_type;  // required by assert_states
  bool readback = true;
  const Signatures* sigs = nullptr;
  std::function<void(const std::string&)> trace;
};

struct EvalReport {
  EvalOutcome outcome;
  std::string readback;  // deep rendering of the result, forcing constructor fields
  std::size_t steps = 0;
  std::map<std::string, std::size_t> rhs_entries;  // by binder source text
  std::size_t states_checked = 0;
  std::size_t state_failures = 0;
  std::string first_state_failure;
};

// Let-binds every non-variable argument; types and environments of the new
// bindings come from re-checking. Lets introduced for the arguments of a
// constructor scrutinee are floated outside the case so it stays in WHNF.
ExprPtr translate_sharing(const Signatures& sigs, const TypingCtx& ctx, const ExprPtr& e);
// The same rewrite without re-checking; the new lets carry no annotations.
ExprPtr introduce_sharing(const ExprPtr& e);

EvalOutcome eval_natural(const Signatures& sigs, EvalEnv theta, const ExprPtr& e, std::size_t fuel);
EvalOutcome eval_instrumented(const Signatures& sigs, EvalEnv theta, const ExprPtr& e, std::size_t fuel);

// Evaluates to WHNF and then reads the result back deeply.
EvalReport evaluate(const ExprPtr& e, const EvalOptions& opts);

// Wraps e in the heap bindings it (transitively) refers to: linear bindings as
// applied lambdas, the rest as lets, cyclic groups as letrec.
ExprPtr expand_env(const EvalEnv& theta, const ExprPtr& e);

// Plugs the focus into the stack, expands the heap around it and type checks the
// closed result at the expected type.
CheckResult check_state_welltyped(const Signatures& sigs, const MachineState& state, const TypePtr& expected);

struct PreparedProgram {
  Signatures sigs;
  ExprPtr main;  // sharing-translated, annotated
  TypePtr ty;
};
// Checks a closed program and applies the sharing translation. Throws
// std::runtime_error if the program does not check or has assumptions.
PreparedProgram prepare_for_eval(const SourceProgram& p);

struct DiffReport {
  bool agree = false;
  std::string natural;
  std::string instrumented;
  bool natural_fuel = false;
  bool instrumented_fuel = false;
  std::optional<Stuck> stuck;
  std::string message;
};
DiffReport differential_run(const PreparedProgram& p, std::size_t fuel = 1'000'000);

}  // namespace lc
