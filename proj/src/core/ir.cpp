#include "lc/ir.hpp"

#include <algorithm>
#include <atomic>

namespace lc {

Name fresh_name(std::string text) {
  static std::atomic<std::uint64_t> counter{1};
  return Name{std::move(text), counter.fetch_add(1, std::memory_order_relaxed)};
}

TypePtr data_ty(std::string tycon, std::vector<Mult> args) {
  return std::make_shared<const Type>(Type{DataType{std::move(tycon), std::move(args)}});
}

TypePtr fun_ty(TypePtr arg, Mult mult, TypePtr res) {
  return std::make_shared<const Type>(Type{FunType{std::move(arg), std::move(mult), std::move(res)}});
}

TypePtr forall_ty(Name binder, TypePtr body) {
  return std::make_shared<const Type>(Type{ForallType{std::move(binder), std::move(body)}});
}

ExprPtr var_e(Name n) { return make_expr(Var{std::move(n)}); }
ExprPtr ctor_e(std::string k) { return make_expr(Ctor{std::move(k)}); }
ExprPtr app_e(ExprPtr f, ExprPtr a) { return make_expr(App{std::move(f), std::move(a)}); }
ExprPtr abs_e(Name x, Mult m, TypePtr ty, ExprPtr body) {
  return make_expr(Abs{std::move(x), std::move(m), std::move(ty), std::move(body)});
}

bool is_prefix_of(const ResourceKey& anc, const ResourceKey& k) {
  if (anc.name != k.name || anc.depth != k.depth) return false;
  if (anc.tags.size() > k.tags.size()) return false;
  return std::equal(anc.tags.begin(), anc.tags.end(), k.tags.begin());
}

namespace {
bool key_less(const UsageEntry& a, const UsageEntry& b) { return a.key < b.key; }
}  // namespace

UsageEnv::UsageEnv(std::vector<UsageEntry> entries) {
  for (auto& e : entries) insert(std::move(e));
}

bool UsageEnv::contains(const ResourceKey& k) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), UsageEntry{k, Mult::one()}, key_less);
  return it != entries_.end() && it->key == k;
}

void UsageEnv::insert(UsageEntry e) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), e, key_less);
  if (it != entries_.end() && it->key == e.key) return;
  entries_.insert(it, std::move(e));
}

bool UsageEnv::erase(const ResourceKey& k) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), UsageEntry{k, Mult::one()}, key_less);
  if (it == entries_.end() || it->key != k) return false;
  entries_.erase(it);
  return true;
}

UsageEnv UsageEnv::incremented() const {
  UsageEnv out;
  for (auto e : entries_) {
    e.key.depth += 1;
    out.insert(std::move(e));
  }
  return out;
}

UsageEnv UsageEnv::tagged(const Tag& t) const {
  UsageEnv out;
  for (auto e : entries_) {
    e.key.tags.push_back(t);
    out.insert(std::move(e));
  }
  return out;
}

bool operator==(const UsageEnv& a, const UsageEnv& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].key != b.entries_[i].key) return false;
    if (!(a.entries_[i].mult == b.entries_[i].mult)) return false;
  }
  return true;
}

std::string show(const Mult& m) {
  switch (m.kind) {
    case Mult::Kind::One: return "1";
    case Mult::Kind::Many: return "w";
    case Mult::Kind::Var: return m.var.text;
  }
  return "?";
}

namespace {

std::string show_type(const TypePtr& t, bool arg_pos) {
  if (!t) return "?";
  return std::visit(
      [&](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, DataType>) {
          std::string s = n.tycon;
          for (const auto& m : n.args) s += " " + show(m);
          return s;
        } else if constexpr (std::is_same_v<N, FunType>) {
          std::string s = show_type(n.arg, true) + " ->@" + show(n.mult) + " " + show_type(n.res, false);
          return arg_pos ? "(" + s + ")" : s;
        } else {
          std::string s = "forall " + n.binder.text + ". " + show_type(n.body, false);
          return arg_pos ? "(" + s + ")" : s;
        }
      },
      t->node);
}

}  // namespace

std::string show(const TypePtr& t) { return show_type(t, false); }

std::string show(const ResourceKey& k, const Mult& m) {
  std::string s(static_cast<std::size_t>(k.depth), '[');
  s += k.name.text + ":" + show(m);
  s += std::string(static_cast<std::size_t>(k.depth), ']');
  for (const auto& t : k.tags) s += "#" + t.ctor + "." + std::to_string(t.index);
  return s;
}

std::string show(const UsageEnv& env) {
  std::string s = "{";
  bool first = true;
  for (const auto& e : env.entries()) {
    if (!first) s += ", ";
    first = false;
    s += show(e.key, e.mult);
  }
  return s + "}";
}

std::string show(const Delta& d) {
  std::string s = "{";
  bool first = true;
  for (const auto& [k, info] : d) {
    if (!first) s += ", ";
    first = false;
    s += show(k, info.mult);
  }
  return s + "}";
}

}  // namespace lc
