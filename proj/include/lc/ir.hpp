#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace lc {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

// Identifiers carry a globally unique id; the text is only for display.
struct Name {
  std::string text;
  std::uint64_t id = 0;

  friend bool operator==(const Name& a, const Name& b) { return a.id == b.id; }
  friend std::strong_ordering operator<=>(const Name& a, const Name& b) {
    return a.id <=> b.id;
  }
};

Name fresh_name(std::string text);

struct Mult {
  enum class Kind { One, Many, Var };
  Kind kind = Kind::One;
  Name var;

  static Mult one() { return {Kind::One, {}}; }
  static Mult many() { return {Kind::Many, {}}; }
  static Mult of_var(Name n) { return {Kind::Var, std::move(n)}; }

  bool is_one() const { return kind == Kind::One; }
  bool is_many() const { return kind == Kind::Many; }
  bool is_var() const { return kind == Kind::Var; }
  // One and multiplicity variables are both threaded as linear.
  bool is_linear() const { return kind != Kind::Many; }

  friend bool operator==(const Mult& a, const Mult& b) {
    if (a.kind != b.kind) return false;
    return a.kind != Kind::Var || a.var == b.var;
  }
};

struct Type;
using TypePtr = std::shared_ptr<const Type>;

struct DataType {
  std::string tycon;
  std::vector<Mult> args;
};
struct FunType {
  TypePtr arg;
  Mult mult;
  TypePtr res;
};
struct ForallType {
  Name binder;
  TypePtr body;
};

struct Type {
  std::variant<DataType, FunType, ForallType> node;
};

TypePtr data_ty(std::string tycon, std::vector<Mult> args = {});
TypePtr fun_ty(TypePtr arg, Mult mult, TypePtr res);
TypePtr forall_ty(Name binder, TypePtr body);

// Resources and usage environments.

struct Tag {
  std::string ctor;
  int index = 1;
  int arity = 1;  // number of fragments produced by the split; derived, not compared

  friend bool operator==(const Tag& a, const Tag& b) {
    return a.ctor == b.ctor && a.index == b.index;
  }
  friend std::strong_ordering operator<=>(const Tag& a, const Tag& b) {
    if (auto c = a.ctor <=> b.ctor; c != 0) return c;
    return a.index <=> b.index;
  }
};

struct ResourceKey {
  Name name;
  int depth = 0;
  std::vector<Tag> tags;

  friend bool operator==(const ResourceKey&, const ResourceKey&) = default;
  friend auto operator<=>(const ResourceKey& a, const ResourceKey& b) {
    if (auto c = a.name <=> b.name; c != 0) return c;
    if (auto c = a.depth <=> b.depth; c != 0) return c;
    return a.tags <=> b.tags;
  }
  bool irrelevant() const { return depth > 0; }
};

// True when `anc` is `k` or a split ancestor of `k`.
bool is_prefix_of(const ResourceKey& anc, const ResourceKey& k);

struct UsageEntry {
  ResourceKey key;
  Mult mult = Mult::one();
};

class UsageEnv {
 public:
  UsageEnv() = default;
  explicit UsageEnv(std::vector<UsageEntry> entries);

  const std::vector<UsageEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  bool contains(const ResourceKey& k) const;
  void insert(UsageEntry e);
  bool erase(const ResourceKey& k);

  UsageEnv incremented() const;
  UsageEnv tagged(const Tag& t) const;

  friend bool operator==(const UsageEnv& a, const UsageEnv& b);

 private:
  std::vector<UsageEntry> entries_;  // sorted by key, unique
};

// Expressions.

using NodeId = std::uint32_t;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Var {
  Name name;
};
struct Ctor {
  std::string name;
};
struct MultAbs {
  Name binder;
  ExprPtr body;
};
struct MultApp {
  ExprPtr fun;
  Mult mult;
};
struct Abs {
  Name var;
  Mult mult;
  TypePtr ty;
  ExprPtr body;
};
struct App {
  ExprPtr fun;
  ExprPtr arg;
};
struct Binding {
  Name var;
  std::optional<UsageEnv> env;
  TypePtr ty;  // may be null when omitted in source
  ExprPtr rhs;
};
struct Let {
  Binding bind;
  ExprPtr body;
};
struct LetRec {
  std::vector<Binding> binds;
  ExprPtr body;
};
struct PatBinder {
  Name var;
  Mult mult;
};
struct WildPat {};
struct ConPat {
  std::string ctor;
  std::vector<PatBinder> binders;
};
using Pattern = std::variant<WildPat, ConPat>;
struct Alt {
  Pattern pat;
  ExprPtr rhs;
};
struct Case {
  ExprPtr scrut;
  Name binder;
  std::optional<UsageEnv> env;
  TypePtr ty;  // scrutinee type, may be null
  std::vector<Alt> alts;
};

struct Expr {
  std::variant<Var, Ctor, MultAbs, MultApp, Abs, App, Let, LetRec, Case> node;
  NodeId id = 0;
};

template <class T>
ExprPtr make_expr(T node, NodeId id = 0) {
  return std::make_shared<const Expr>(Expr{std::move(node), id});
}
ExprPtr var_e(Name n);
ExprPtr ctor_e(std::string k);
ExprPtr app_e(ExprPtr f, ExprPtr a);
ExprPtr abs_e(Name x, Mult m, TypePtr ty, ExprPtr body);

// Datatypes.

struct Field {
  TypePtr ty;
  Mult mult;
};
struct CtorDecl {
  std::string name;
  std::vector<Field> fields;
};
struct DataDecl {
  std::string tycon;
  std::vector<Name> params;
  std::vector<CtorDecl> ctors;
};

struct CtorSignature {
  std::vector<Field> fields;
  std::vector<std::size_t> linear_indices;  // 1-based positions of linear fields
};

class SignatureError : public std::runtime_error {
 public:
  enum class Kind { UnknownConstructor, ArityMismatch };
  SignatureError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

CtorSignature ctor_signature(const std::vector<DataDecl>& decls, std::string_view ctor,
                             const std::vector<Mult>& mult_args);

class Signatures {
 public:
  Signatures() = default;
  explicit Signatures(std::vector<DataDecl> decls);

  struct CtorRef {
    const DataDecl* decl;
    const CtorDecl* ctor;
  };

  const std::vector<DataDecl>& decls() const { return decls_; }
  const DataDecl* data(std::string_view tycon) const;
  std::optional<CtorRef> ctor(std::string_view name) const;
  // forall params. field_1 ->m1 ... ->mn T params
  TypePtr ctor_type(std::string_view name) const;
  CtorSignature instantiate(std::string_view ctor, const std::vector<Mult>& args) const;

 private:
  std::vector<DataDecl> decls_;
  std::map<std::string, std::size_t, std::less<>> data_index_;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> ctor_index_;
};

// Contexts.

struct Unrestricted {
  TypePtr ty;
};
struct DeltaBound {
  TypePtr ty;
  UsageEnv env;
};
struct MultVarEntry {};
using GammaEntry = std::variant<Unrestricted, DeltaBound, MultVarEntry>;

struct ResourceInfo {
  TypePtr ty;
  Mult mult = Mult::one();
};
using Delta = std::map<ResourceKey, ResourceInfo>;

struct TypingCtx {
  std::map<Name, GammaEntry> gamma;
  Delta delta;
};

// Programs.

struct Assumption {
  Name name;
  Mult mult;
  TypePtr ty;
};

struct SourceSpan {
  int line = 0;
  int col = 0;
  int end_line = 0;
  int end_col = 0;
};

struct SourceProgram {
  std::vector<DataDecl> decls;
  std::vector<Assumption> assumptions;
  ExprPtr main;
  std::unordered_map<NodeId, SourceSpan> spans;
};

// Operations.

std::set<Name> free_vars(const ExprPtr& e);
std::set<Name> free_mult_vars(const ExprPtr& e);
std::set<Name> free_mult_vars(const TypePtr& t);
std::set<Name> bound_vars(const ExprPtr& e);

ExprPtr subst_expr(const ExprPtr& e, const Name& x, const ExprPtr& s);
// Simultaneous substitution.
ExprPtr subst_exprs(const ExprPtr& e, const std::map<Name, ExprPtr>& s);
ExprPtr subst_mult(const ExprPtr& e, const Name& p, const Mult& pi);
TypePtr subst_mult(const TypePtr& t, const Name& p, const Mult& pi);
Mult subst_mult(const Mult& m, const Name& p, const Mult& pi);

// Copy with every binder renamed to a fresh name.
ExprPtr freshen(const ExprPtr& e);
ExprPtr strip_usage_annotations(const ExprPtr& e);

bool alpha_eq(const ExprPtr& a, const ExprPtr& b);
bool alpha_eq(const TypePtr& a, const TypePtr& b);

bool is_whnf(const ExprPtr& e);
// Application spine (possibly empty) headed by a constructor.
bool is_whnf_head(const ExprPtr& e);
// Head of an application spine and its arguments (MultApp entries carry mults).
struct Spine {
  ExprPtr head;
  std::vector<std::variant<ExprPtr, Mult>> args;
};
Spine spine_of(const ExprPtr& e);

std::size_t expr_size(const ExprPtr& e);

// Plain renderings used in diagnostics; names print as their source text.
std::string show(const Mult& m);
std::string show(const TypePtr& t);
std::string show(const ResourceKey& k, const Mult& m = Mult::one());
std::string show(const UsageEnv& env);
std::string show(const Delta& d);

}  // namespace lc
