#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lc/ir.hpp"

namespace lc::testing {

// Declarations shared by every generated program.
const char* generator_decls();

struct GenOptions {
  int depth = 4;
  int max_inputs = 3;
};

// Builds programs that are well typed by construction most of the time: every
// linear input is consumed exactly once along each branch. Callers still run
// the checker and discard the rare rejected program.
class TypedGenerator {
 public:
  explicit TypedGenerator(std::uint64_t seed, GenOptions opts = {});

  // A closed program: a prelude of helper functions and the body applied to
  // constructor values for its linear inputs.
  SourceProgram closed_program();

  // The body alone, as an open expression of `ty` consuming `linear` exactly
  // once, with `unrestricted` available. Used by the lemma tests.
  struct Item {
    Name name;
    TypePtr ty;
  };
  ExprPtr expr(const TypePtr& ty, std::vector<Item> linear, std::vector<Item> unrestricted, int depth);
  // Wraps a term from expr() in the helper definitions it may mention.
  ExprPtr with_prelude(const ExprPtr& e) const;

  // Base types the generator knows how to produce and consume.
  const std::vector<TypePtr>& types() const { return types_; }
  TypePtr random_type();
  std::mt19937_64& rng() { return rng_; }
  const std::vector<DataDecl>& decls() const { return decls_; }

 private:
  struct Ctx {
    std::vector<Item> lin;
    std::vector<Item> omega;
  };

  ExprPtr gen(const TypePtr& ty, Ctx c, int depth);
  ExprPtr finish(const TypePtr& ty, Ctx c);
  ExprPtr value(const TypePtr& ty, const Ctx& c, int depth);
  ExprPtr eliminate(const TypePtr& ty, Ctx c, std::size_t which, int depth, bool structural);
  ExprPtr case_alts(const TypePtr& ty, ExprPtr scrut, const TypePtr& sty, bool scrut_consumes, Ctx rest,
                    int depth);
  ExprPtr intro(const TypePtr& ty, Ctx c, int depth);
  std::pair<std::vector<Item>, std::vector<Item>> split(const std::vector<Item>& xs);
  const Item* omega_of_type(const Ctx& c, const TypePtr& ty);
  ExprPtr consumer_for(const TypePtr& ty);

  bool chance(double p);
  std::size_t pick(std::size_t n);

  std::mt19937_64 rng_;
  GenOptions opts_;
  std::vector<DataDecl> decls_;
  std::vector<TypePtr> types_;
  TypePtr bool_, unit_, pair_, box_, nat_, opt1_, optw_, fun1_, funw_;
  std::vector<Item> prelude_;
  std::map<std::string, Name> helpers_;
  ExprPtr prelude_expr_;  // prelude lets around a placeholder
};

// Random, mostly ill-typed programs over the full grammar (for the parser round trip).
SourceProgram random_syntax_program(std::uint64_t seed);

// Call-by-name oracle: counts how often the right-hand side of each let is
// evaluated when every occurrence is substituted. Only handles terms the
// generator and the sharing demo produce.
std::size_t call_by_name_rhs_evaluations(const SourceProgram& p, const std::string& binder);

}  // namespace lc::testing
