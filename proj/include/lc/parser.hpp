#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lc/ir.hpp"

namespace lc {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, std::vector<std::string> expected, std::string found);

  int line;
  int col;
  std::vector<std::string> expected;
  std::string found;
};

SourceProgram parse_program(std::string_view text);

// Deterministic rendering; reparsing yields an alpha-equivalent program.
std::string pretty_print(const SourceProgram& p);
std::string pretty_expr(const ExprPtr& e);
std::string pretty_type(const TypePtr& t);

}  // namespace lc
