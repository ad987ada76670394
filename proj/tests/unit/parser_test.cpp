#include "doctest.h"
#include "helpers.hpp"
#include "properties.hpp"

using namespace lc;

TEST_CASE("parses the core forms") {
  SourceProgram p = parse_program("\\(x :1 a). x");
  const auto* abs = std::get_if<Abs>(&p.main->node);
  REQUIRE(abs);
  CHECK(abs->mult.is_one());
  CHECK(std::holds_alternative<Var>(abs->body->node));

  p = parse_program("data Pair = MkPair a@1 b@1;\ncase MkPair x y of z { MkPair a@1 b@1 => use x y }");
  const auto* c = std::get_if<Case>(&p.main->node);
  REQUIRE(c);
  REQUIRE(c->alts.size() == 1);
  const auto* pat = std::get_if<ConPat>(&c->alts[0].pat);
  REQUIRE(pat);
  CHECK(pat->binders.size() == 2);
  CHECK(pat->binders[1].mult.is_one());

  p = parse_program("let y : b = use x in y");
  const auto* l = std::get_if<Let>(&p.main->node);
  REQUIRE(l);
  CHECK_FALSE(l->bind.env.has_value());
  CHECK(l->bind.ty);
}

TEST_CASE("multiplicities and arrows") {
  SourceProgram p = parse_program("assume f :w a ->@1 b ->@w c;\nf");
  TypePtr t = p.assumptions.at(0).ty;
  const auto* outer = std::get_if<FunType>(&t->node);
  REQUIRE(outer);
  CHECK(outer->mult.is_one());
  const auto* inner = std::get_if<FunType>(&outer->res->node);
  REQUIRE(inner);
  CHECK(inner->mult.is_many());
}

TEST_CASE("pretty printing") {
  CHECK(pretty_print(parse_program("\\(x :1 a). x")) == "\\(x :1 a). x\n");
  CHECK(pretty_print(parse_program("/\\p. \\(x :p a). x")) == "/\\p. \\(x :p a). x\n");
  std::string with_env = "assume x :1 a;\nassume free :w a ->@1 b;\nlet y :Δ{x:1} : b = free x in y\n";
  CHECK(pretty_print(parse_program(with_env)) == with_env);
  std::string irrelevant = "assume x :1 a;\ncase x of z :Δ{[x:1]#K.1} { _ => z }\n";
  CHECK(pretty_print(parse_program(irrelevant)) == irrelevant);
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_program("let x = in x");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.col == 9);
  }
  CHECK_THROWS_AS(parse_program("\\(x :1 a x"), ParseError);
  CHECK_THROWS_AS(parse_program("letrec f : a = f; f : a = f; in f"), ParseError);
}

TEST_CASE("round trip on generated programs") {
  auto stats = testing::parser_round_trip(7, 200);
  CHECK(stats.instances == 200);
  CHECK_MESSAGE(stats.failures == 0, stats.first_failure);
}
