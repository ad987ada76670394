#include "lc/ir.hpp"

namespace lc {

Signatures::Signatures(std::vector<DataDecl> decls) : decls_(std::move(decls)) {
  for (std::size_t d = 0; d < decls_.size(); ++d) {
    data_index_.emplace(decls_[d].tycon, d);
    for (std::size_t c = 0; c < decls_[d].ctors.size(); ++c) {
      ctor_index_.emplace(decls_[d].ctors[c].name, std::make_pair(d, c));
    }
  }
}

const DataDecl* Signatures::data(std::string_view tycon) const {
  auto it = data_index_.find(tycon);
  return it == data_index_.end() ? nullptr : &decls_[it->second];
}

std::optional<Signatures::CtorRef> Signatures::ctor(std::string_view name) const {
  auto it = ctor_index_.find(name);
  if (it == ctor_index_.end()) return std::nullopt;
  const auto& decl = decls_[it->second.first];
  return CtorRef{&decl, &decl.ctors[it->second.second]};
}

TypePtr Signatures::ctor_type(std::string_view name) const {
  auto ref = ctor(name);
  if (!ref) return nullptr;
  std::vector<Mult> params;
  for (const auto& p : ref->decl->params) params.push_back(Mult::of_var(p));
  TypePtr t = data_ty(ref->decl->tycon, std::move(params));
  const auto& fields = ref->ctor->fields;
  for (auto it = fields.rbegin(); it != fields.rend(); ++it) t = fun_ty(it->ty, it->mult, t);
  const auto& ps = ref->decl->params;
  for (auto it = ps.rbegin(); it != ps.rend(); ++it) t = forall_ty(*it, t);
  return t;
}

CtorSignature Signatures::instantiate(std::string_view name, const std::vector<Mult>& args) const {
  auto ref = ctor(name);
  if (!ref) {
    throw SignatureError(SignatureError::Kind::UnknownConstructor,
                         "unknown constructor " + std::string(name));
  }
  const auto& params = ref->decl->params;
  if (params.size() != args.size()) {
    throw SignatureError(SignatureError::Kind::ArityMismatch,
                         ref->decl->tycon + " expects " + std::to_string(params.size()) +
                             " multiplicity arguments, got " + std::to_string(args.size()));
  }
  CtorSignature sig;
  for (const auto& f : ref->ctor->fields) {
    Field inst = f;
    for (std::size_t i = 0; i < params.size(); ++i) {
      inst.ty = subst_mult(inst.ty, params[i], args[i]);
      inst.mult = subst_mult(inst.mult, params[i], args[i]);
    }
    sig.fields.push_back(inst);
    if (inst.mult.is_linear()) sig.linear_indices.push_back(sig.fields.size());
  }
  return sig;
}

CtorSignature ctor_signature(const std::vector<DataDecl>& decls, std::string_view ctor,
                             const std::vector<Mult>& mult_args) {
  return Signatures(decls).instantiate(ctor, mult_args);
}

}  // namespace lc
