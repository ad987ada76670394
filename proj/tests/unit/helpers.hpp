#pragma once

#include <string>

#include "lc/checker.hpp"
#include "lc/ir.hpp"
#include "lc/parser.hpp"

namespace lc::unit {

inline const std::string kRoot = LC_SOURCE_DIR;

// Finds a free variable of e by its source text.
inline Name free_named(const ExprPtr& e, const std::string& text) {
  for (const auto& n : free_vars(e)) {
    if (n.text == text) return n;
  }
  throw std::runtime_error("no free variable " + text);
}

inline std::string verdict(const std::string& program) {
  CheckResult r = check_program(parse_program(program));
  return r.ok() ? "ok: " + pretty_type(r.ty) : r.error->render();
}

}  // namespace lc::unit
