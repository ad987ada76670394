#include <cctype>
#include <map>

#include "lc/parser.hpp"

namespace lc {

namespace {

std::string join_expected(const std::vector<std::string>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += i + 1 == xs.size() ? " or " : ", ";
    s += xs[i];
  }
  return s;
}

}  // namespace

ParseError::ParseError(int l, int c, std::vector<std::string> exp, std::string f)
    : std::runtime_error(std::to_string(l) + ":" + std::to_string(c) + ": expected " +
                         join_expected(exp) + ", found " + f),
      line(l),
      col(c),
      expected(std::move(exp)),
      found(std::move(f)) {}

namespace {

enum class Tok {
  Ident,
  Number,
  Sym,  // punctuation and operators, text holds the spelling
  Keyword,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
  int end_col;
};

const std::set<std::string, std::less<>> kKeywords = {"data", "assume", "let", "letrec", "in",
                                                      "case", "of",   "forall"};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(src[i]) & 0xC0) != 0x80) {
        ++col;
      }
      ++i;
    }
  };
  static const char* const kSyms[] = {"\xCE\x94", "->", "=>", "/\\", "\\", "(", ")", "{", "}", "[",
                                      "]",        ",",  ";",  ":",   "=",  "|", "@", ".", "#"};
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (src.substr(i, 2) == "--") {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    int l = line, cl = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                                src[j] == '\'')) {
        ++j;
      }
      std::string text(src.substr(i, j - i));
      advance(j - i);
      Tok kind = text == "_" ? Tok::Sym : kKeywords.contains(text) ? Tok::Keyword : Tok::Ident;
      out.push_back({kind, text, l, cl, col});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      std::string text(src.substr(i, j - i));
      advance(j - i);
      out.push_back({Tok::Number, text, l, cl, col});
      continue;
    }
    bool matched = false;
    for (const char* s : kSyms) {
      std::string_view sv(s);
      if (src.substr(i, sv.size()) == sv) {
        advance(sv.size());
        out.push_back({Tok::Sym, std::string(sv), l, cl, col});
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw ParseError(l, cl, {"a token"}, "'" + std::string(1, c) + "'");
    }
  }
  out.push_back({Tok::End, "", line, col, col});
  return out;
}

bool is_upper(const std::string& s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])); }

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) { prescan_arities(); }

  SourceProgram program() {
    while (true) {
      if (is_kw("data")) {
        prog_.decls.push_back(data_decl());
      } else if (is_kw("assume")) {
        prog_.assumptions.push_back(assume());
      } else {
        break;
      }
    }
    prog_.main = expr();
    if (peek().kind != Tok::End) fail({"end of input"});
    return std::move(prog_);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  SourceProgram prog_;
  NodeId next_id_ = 1;
  std::map<std::string, std::size_t, std::less<>> arity_;
  std::set<std::string, std::less<>> ctors_;
  std::vector<std::pair<std::string, Name>> term_scope_;
  std::vector<std::pair<std::string, Name>> mult_scope_;
  std::map<std::string, Name, std::less<>> free_terms_;
  std::map<std::string, Name, std::less<>> free_mults_;

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }

  std::string describe(const Token& t) const {
    switch (t.kind) {
      case Tok::End: return "end of input";
      case Tok::Ident: return "identifier '" + t.text + "'";
      case Tok::Number: return "number '" + t.text + "'";
      default: return "'" + t.text + "'";
    }
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col, std::move(expected), describe(t));
  }

  bool is_sym(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Sym && peek(k).text == s;
  }
  bool is_kw(std::string_view s) const { return peek().kind == Tok::Keyword && peek().text == s; }

  Token expect_sym(std::string_view s) {
    if (!is_sym(s)) fail({"'" + std::string(s) + "'"});
    return toks_[pos_++];
  }
  Token expect_kw(std::string_view s) {
    if (!is_kw(s)) fail({"'" + std::string(s) + "'"});
    return toks_[pos_++];
  }
  Token expect_ident(const char* what = "identifier") {
    if (peek().kind != Tok::Ident) fail({what});
    return toks_[pos_++];
  }

  // Records data arities up front so types may mention later declarations.
  void prescan_arities() {
    for (std::size_t i = 0; i + 1 < toks_.size(); ++i) {
      if (toks_[i].kind != Tok::Keyword || toks_[i].text != "data") continue;
      if (toks_[i + 1].kind != Tok::Ident) continue;
      std::size_t n = 0, j = i + 2;
      while (j < toks_.size() && toks_[j].kind == Tok::Ident) ++n, ++j;
      arity_[toks_[i + 1].text] = n;
      if (j < toks_.size() && toks_[j].kind == Tok::Sym && toks_[j].text == "=") {
        ++j;
        bool at_ctor = true;
        int depth = 0;
        for (; j < toks_.size(); ++j) {
          const auto& t = toks_[j];
          if (t.kind == Tok::Sym && t.text == ";" && depth == 0) break;
          if (t.kind == Tok::Sym && t.text == "(") ++depth;
          if (t.kind == Tok::Sym && t.text == ")") --depth;
          if (at_ctor && t.kind == Tok::Ident) ctors_.insert(t.text);
          at_ctor = t.kind == Tok::Sym && t.text == "|" && depth == 0;
        }
      }
    }
  }

  template <class T>
  ExprPtr node(T n, const Token& start) {
    NodeId id = next_id_++;
    const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
    prog_.spans[id] = SourceSpan{start.line, start.col, last.line, last.end_col};
    return make_expr(std::move(n), id);
  }

  Name lookup_term(const std::string& text) {
    for (auto it = term_scope_.rbegin(); it != term_scope_.rend(); ++it) {
      if (it->first == text) return it->second;
    }
    auto it = free_terms_.find(text);
    if (it != free_terms_.end()) return it->second;
    Name n = fresh_name(text);
    free_terms_.emplace(text, n);
    return n;
  }

  Mult mult() {
    const Token& t = peek();
    if (t.kind == Tok::Number && t.text == "1") {
      ++pos_;
      return Mult::one();
    }
    if (t.kind == Tok::Ident) {
      ++pos_;
      if (t.text == "w") return Mult::many();
      for (auto it = mult_scope_.rbegin(); it != mult_scope_.rend(); ++it) {
        if (it->first == t.text) return Mult::of_var(it->second);
      }
      auto f = free_mults_.find(t.text);
      if (f == free_mults_.end()) f = free_mults_.emplace(t.text, fresh_name(t.text)).first;
      return Mult::of_var(f->second);
    }
    fail({"multiplicity"});
  }

  // Types.

  TypePtr type() {
    if (is_kw("forall")) {
      ++pos_;
      Token p = expect_ident("multiplicity variable");
      expect_sym(".");
      Name b = fresh_name(p.text);
      mult_scope_.emplace_back(p.text, b);
      TypePtr body = type();
      mult_scope_.pop_back();
      return forall_ty(b, body);
    }
    TypePtr lhs = btype();
    if (is_sym("->")) {
      ++pos_;
      expect_sym("@");
      Mult m = mult();
      return fun_ty(lhs, m, type());
    }
    return lhs;
  }

  TypePtr btype() {
    if (peek().kind == Tok::Ident) {
      std::string tc = toks_[pos_++].text;
      std::vector<Mult> args;
      auto it = arity_.find(tc);
      std::size_t n = it == arity_.end() ? 0 : it->second;
      for (std::size_t i = 0; i < n; ++i) args.push_back(mult());
      return data_ty(tc, std::move(args));
    }
    return atype_paren();
  }

  TypePtr atype() {
    if (peek().kind == Tok::Ident) {
      auto it = arity_.find(peek().text);
      if (it == arity_.end() || it->second == 0) return data_ty(toks_[pos_++].text);
      fail({"'('"});
    }
    return atype_paren();
  }

  TypePtr atype_paren() {
    if (!is_sym("(")) fail({"type"});
    ++pos_;
    TypePtr t = type();
    expect_sym(")");
    return t;
  }

  // Declarations.

  DataDecl data_decl() {
    expect_kw("data");
    DataDecl d;
    d.tycon = expect_ident("type constructor").text;
    std::size_t scope = mult_scope_.size();
    while (peek().kind == Tok::Ident) {
      Name p = fresh_name(toks_[pos_++].text);
      d.params.push_back(p);
      mult_scope_.emplace_back(p.text, p);
    }
    expect_sym("=");
    do {
      CtorDecl c;
      Token k = expect_ident("constructor");
      c.name = k.text;
      while (!is_sym("|") && !is_sym(";")) {
        TypePtr ty = atype();
        expect_sym("@");
        c.fields.push_back(Field{ty, mult()});
      }
      d.ctors.push_back(std::move(c));
    } while (is_sym("|") && (++pos_, true));
    expect_sym(";");
    mult_scope_.resize(scope);
    return d;
  }

  Assumption assume() {
    expect_kw("assume");
    Token x = expect_ident();
    expect_sym(":");
    Mult m = mult();
    TypePtr ty = type();
    expect_sym(";");
    Name n = fresh_name(x.text);
    free_terms_[x.text] = n;
    return Assumption{n, m, ty};
  }

  // Usage-environment annotations.

  bool at_env_ann() const { return is_sym(":") && is_sym("\xCE\x94", 1); }

  UsageEnv env_ann() {
    expect_sym(":");
    expect_sym("\xCE\x94");
    expect_sym("{");
    UsageEnv env;
    if (!is_sym("}")) {
      do {
        int depth = 0;
        while (is_sym("[")) ++pos_, ++depth;
        Token x = expect_ident();
        expect_sym(":");
        Mult m = mult();
        for (int i = 0; i < depth; ++i) expect_sym("]");
        ResourceKey k{lookup_term(x.text), depth, {}};
        while (is_sym("#")) {
          ++pos_;
          Token c = expect_ident("constructor");
          expect_sym(".");
          if (peek().kind != Tok::Number) fail({"field index"});
          int idx = std::stoi(toks_[pos_++].text);
          k.tags.push_back(Tag{c.text, idx, 1});
        }
        env.insert(UsageEntry{k, m});
      } while (is_sym(",") && (++pos_, true));
    }
    expect_sym("}");
    return env;
  }

  // Expressions.

  ExprPtr expr() {
    const Token start = peek();
    if (is_sym("\\")) {
      ++pos_;
      expect_sym("(");
      Token x = expect_ident();
      expect_sym(":");
      Mult m = mult();
      TypePtr ty = type();
      expect_sym(")");
      expect_sym(".");
      Name n = fresh_name(x.text);
      term_scope_.emplace_back(x.text, n);
      ExprPtr body = expr();
      term_scope_.pop_back();
      return node(Abs{n, m, ty, body}, start);
    }
    if (is_sym("/\\")) {
      ++pos_;
      Token p = expect_ident("multiplicity variable");
      expect_sym(".");
      Name n = fresh_name(p.text);
      mult_scope_.emplace_back(p.text, n);
      ExprPtr body = expr();
      mult_scope_.pop_back();
      return node(MultAbs{n, body}, start);
    }
    if (is_kw("let")) {
      ++pos_;
      Token x = expect_ident();
      Name n = fresh_name(x.text);
      Binding b = binding_tail(n);
      expect_kw("in");
      term_scope_.emplace_back(x.text, n);
      ExprPtr body = expr();
      term_scope_.pop_back();
      return node(Let{std::move(b), body}, start);
    }
    if (is_kw("letrec")) return letrec();
    if (is_kw("case")) return case_expr();
    return app();
  }

  Binding binding_tail(const Name& n) {
    Binding b{n, std::nullopt, nullptr, nullptr};
    if (at_env_ann()) b.env = env_ann();
    if (is_sym(":")) {
      ++pos_;
      b.ty = type();
    }
    expect_sym("=");
    b.rhs = expr();
    return b;
  }

  ExprPtr letrec() {
    const Token start = expect_kw("letrec");
    // Collect binder names first so every right-hand side sees the group.
    std::vector<std::pair<std::string, Name>> names;
    {
      std::size_t save_pos = pos_;
      NodeId save_id = next_id_;
      auto save_free = free_terms_;
      auto save_free_m = free_mults_;
      auto save_spans = prog_.spans;
      do {
        Token x = expect_ident();
        names.emplace_back(x.text, fresh_name(x.text));
        binding_tail(names.back().second);
        expect_sym(";");
      } while (!is_kw("in"));
      pos_ = save_pos;
      next_id_ = save_id;
      free_terms_ = std::move(save_free);
      free_mults_ = std::move(save_free_m);
      prog_.spans = std::move(save_spans);
    }
    std::size_t scope = term_scope_.size();
    for (const auto& nm : names) term_scope_.push_back(nm);
    std::vector<Binding> binds;
    for (const auto& nm : names) {
      expect_ident();
      binds.push_back(binding_tail(nm.second));
      expect_sym(";");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (names[i].first == names[j].first) {
          throw ParseError(start.line, start.col, {"distinct letrec binders"}, "'" + names[i].first + "' twice");
        }
      }
    }
    expect_kw("in");
    ExprPtr body = expr();
    term_scope_.resize(scope);
    return node(LetRec{std::move(binds), body}, start);
  }

  ExprPtr case_expr() {
    const Token start = expect_kw("case");
    ExprPtr scrut = expr();
    expect_kw("of");
    Token z = expect_ident("case binder");
    Name zn = fresh_name(z.text);
    std::optional<UsageEnv> env;
    if (at_env_ann()) env = env_ann();
    TypePtr ty;
    if (is_sym(":")) {
      ++pos_;
      ty = type();
    }
    expect_sym("{");
    term_scope_.emplace_back(z.text, zn);
    std::vector<Alt> alts;
    do {
      if (is_sym("}") && !alts.empty()) break;
      alts.push_back(alt());
    } while (is_sym(";") && (++pos_, true));
    expect_sym("}");
    term_scope_.pop_back();
    return node(Case{scrut, zn, std::move(env), ty, std::move(alts)}, start);
  }

  Alt alt() {
    std::size_t scope = term_scope_.size();
    Pattern pat;
    if (is_sym("_")) {
      ++pos_;
      pat = WildPat{};
    } else {
      if (peek().kind != Tok::Ident || !ctors_.contains(peek().text)) fail({"'_'", "constructor"});
      ConPat con{toks_[pos_++].text, {}};
      while (peek().kind == Tok::Ident) {
        Token x = toks_[pos_++];
        expect_sym("@");
        Name n = fresh_name(x.text);
        for (const auto& b : con.binders) {
          if (b.var.text == x.text) fail({"distinct pattern variables"});
        }
        con.binders.push_back(PatBinder{n, mult()});
        term_scope_.emplace_back(x.text, n);
      }
      pat = std::move(con);
    }
    expect_sym("=>");
    ExprPtr rhs = expr();
    term_scope_.resize(scope);
    return Alt{std::move(pat), rhs};
  }

  bool at_atom() const {
    const Token& t = peek();
    return t.kind == Tok::Ident || (t.kind == Tok::Sym && t.text == "(");
  }

  ExprPtr atom() {
    const Token start = peek();
    if (start.kind == Tok::Ident) {
      ++pos_;
      if (ctors_.contains(start.text)) return node(Ctor{start.text}, start);
      if (is_upper(start.text)) {
        --pos_;
        fail({"declared constructor or variable"});
      }
      return node(Var{lookup_term(start.text)}, start);
    }
    if (is_sym("(")) {
      ++pos_;
      ExprPtr e = expr();
      expect_sym(")");
      return e;
    }
    fail({"expression"});
  }

  ExprPtr app() {
    const Token start = peek();
    ExprPtr e = atom();
    while (true) {
      if (is_sym("@")) {
        ++pos_;
        Mult m = mult();
        e = node(MultApp{e, m}, start);
      } else if (at_atom()) {
        ExprPtr a = atom();
        e = node(App{e, a}, start);
      } else {
        return e;
      }
    }
  }
};

}  // namespace

SourceProgram parse_program(std::string_view text) { return Parser(lex(text)).program(); }

}  // namespace lc
