#include "semplan/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <vector>

namespace semplan {

namespace {

enum class Tok {
  End,
  LParen,
  RParen,
  Comma,
  Not,
  And,
  Or,
  Until,
  Finally,
  Next,
  Always,
  True,
  False,
  Ident,
  Number,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  Lexer(const std::string& s, int line) : s_(s), line_(line) { advance(); }

  const Token& peek() const { return cur_; }
  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    cur_ = Token{};
    cur_.line = line_;
    cur_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= s_.size()) {
      cur_.kind = Tok::End;
      return;
    }
    const char c = s_[pos_];
    switch (c) {
      case '(':
        cur_.kind = Tok::LParen;
        ++pos_;
        return;
      case ')':
        cur_.kind = Tok::RParen;
        ++pos_;
        return;
      case ',':
        cur_.kind = Tok::Comma;
        ++pos_;
        return;
      case '!':
        cur_.kind = Tok::Not;
        ++pos_;
        return;
      case '&':
        cur_.kind = Tok::And;
        ++pos_;
        return;
      case '|':
        cur_.kind = Tok::Or;
        ++pos_;
        return;
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      cur_.number = std::strtod(start, &end);
      if (end == start) throw ParseError(line_, cur_.col, "bad number");
      pos_ += static_cast<std::size_t>(end - start);
      cur_.kind = Tok::Number;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t e = pos_;
      while (e < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[e])) || s_[e] == '_'))
        ++e;
      cur_.text = s_.substr(pos_, e - pos_);
      pos_ = e;
      if (cur_.text == "U")
        cur_.kind = Tok::Until;
      else if (cur_.text == "F")
        cur_.kind = Tok::Finally;
      else if (cur_.text == "X")
        cur_.kind = Tok::Next;
      else if (cur_.text == "G")
        cur_.kind = Tok::Always;
      else if (cur_.text == "true")
        cur_.kind = Tok::True;
      else if (cur_.text == "false")
        cur_.kind = Tok::False;
      else
        cur_.kind = Tok::Ident;
      return;
    }
    throw ParseError(line_, cur_.col, std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
  Token cur_;
};

class FormulaParser {
 public:
  FormulaParser(Lexer& lex, FormulaStore& store, ApUniverse& universe)
      : lex_(lex), store_(store), universe_(universe) {}

  FormulaId parse_full() {
    const FormulaId f = parse_or();
    const Token& t = lex_.peek();
    if (t.kind != Tok::End)
      throw ParseError(t.line, t.col, "trailing input after formula");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = lex_.peek();
    throw ParseError(t.line, t.col, msg);
  }

  FormulaId parse_or() {
    FormulaId f = parse_and();
    std::vector<FormulaId> kids{f};
    while (lex_.peek().kind == Tok::Or) {
      lex_.take();
      kids.push_back(parse_and());
    }
    return kids.size() == 1 ? f : store_.disj(std::move(kids));
  }

  FormulaId parse_and() {
    FormulaId f = parse_until();
    std::vector<FormulaId> kids{f};
    while (lex_.peek().kind == Tok::And) {
      lex_.take();
      kids.push_back(parse_until());
    }
    return kids.size() == 1 ? f : store_.conj(std::move(kids));
  }

  FormulaId parse_until() {
    const FormulaId lhs = parse_unary();
    if (lex_.peek().kind == Tok::Until) {
      lex_.take();
      const FormulaId rhs = parse_until();  // right associative
      return store_.until(lhs, rhs);
    }
    return lhs;
  }

  FormulaId parse_unary() {
    const Token t = lex_.peek();
    switch (t.kind) {
      case Tok::Not: {
        lex_.take();
        const FormulaId f = parse_unary();
        if (!store_.is_boolean(f))
          throw ParseError(t.line, t.col,
                           "negation of a temporal formula is not co-safe");
        return store_.negate_bool(f);
      }
      case Tok::Finally:
        lex_.take();
        return store_.eventually(parse_unary());
      case Tok::Next:
        lex_.take();
        return store_.next(parse_unary());
      case Tok::Always:
        throw ParseError(t.line, t.col,
                         "G is not allowed; express invariants with an always: clause");
      default:
        return parse_primary();
    }
  }

  FormulaId parse_primary() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Tok::True:
        return store_.f_true();
      case Tok::False:
        return store_.f_false();
      case Tok::LParen: {
        const FormulaId f = parse_or();
        expect(Tok::RParen, "expected ')'");
        return f;
      }
      case Tok::Ident:
        return parse_atom(t);
      default:
        throw ParseError(t.line, t.col, "expected a formula");
    }
  }

  FormulaId parse_atom(const Token& head) {
    if (lex_.peek().kind != Tok::LParen) {
      // Bare identifier: abstract atom.
      return store_.atom(universe_.intern(AtomicPredicate::abstract(head.text)));
    }
    lex_.take();  // (
    AtomicPredicate ap;
    if (head.text == "in") {
      ap.kind = ApKind::Region;
      ap.robot = robot_arg();
      expect(Tok::Comma, "expected ','");
      ap.region = ident_arg();
    } else if (head.text == "near" || head.text == "nearc") {
      ap.kind = head.text == "near" ? ApKind::NearLandmark : ApKind::NearLandmarkClass;
      ap.robot = robot_arg();
      expect(Tok::Comma, "expected ','");
      ap.landmark = ident_arg();
      expect(Tok::Comma, "expected ','");
      ap.radius = number_arg();
      if (ap.radius <= 0.0) throw ParseError(head.line, head.col, "near radius must be positive");
      expect(Tok::Comma, "expected ','");
      ap.delta = number_arg();
      if (!(ap.delta > 0.0 && ap.delta < 1.0))
        throw ParseError(head.line, head.col, "near delta must be in (0, 1)");
      if (ap.kind == ApKind::NearLandmarkClass) {
        expect(Tok::Comma, "expected ','");
        ap.cls = ident_arg();
      }
    } else if (head.text == "unc") {
      ap.kind = ApKind::UncertaintyBelow;
      ap.landmark = ident_arg();
      expect(Tok::Comma, "expected ','");
      ap.delta = number_arg();
      if (ap.delta <= 0.0) throw ParseError(head.line, head.col, "unc delta must be positive");
    } else {
      throw ParseError(head.line, head.col, "unknown predicate '" + head.text + "'");
    }
    expect(Tok::RParen, "expected ')'");
    return store_.atom(universe_.intern(ap));
  }

  int robot_arg() {
    const Token t = lex_.take();
    if (t.kind != Tok::Number || t.number < 1.0 || t.number != std::floor(t.number))
      throw ParseError(t.line, t.col, "expected a robot index (1-based integer)");
    return static_cast<int>(t.number) - 1;
  }

  std::string ident_arg() {
    const Token t = lex_.take();
    if (t.kind != Tok::Ident) throw ParseError(t.line, t.col, "expected an identifier");
    return t.text;
  }

  double number_arg() {
    const Token t = lex_.take();
    if (t.kind != Tok::Number) throw ParseError(t.line, t.col, "expected a number");
    return t.number;
  }

  void expect(Tok k, const char* msg) {
    const Token t = lex_.take();
    if (t.kind != k) throw ParseError(t.line, t.col, msg);
  }

  Lexer& lex_;
  FormulaStore& store_;
  ApUniverse& universe_;
};

FormulaId parse_formula_line(const std::string& text, int line, FormulaStore& store,
                             ApUniverse& universe) {
  Lexer lex(text, line);
  FormulaParser p(lex, store, universe);
  return p.parse_full();
}

}  // namespace

MissionSpec parse_mission(const std::string& text) {
  MissionSpec spec;
  spec.store = std::make_shared<FormulaStore>();

  struct Clause {
    std::string key;  // empty for bare formula text
    std::string body;
    int line;
  };
  std::vector<Clause> clauses;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  bool any_keyword = false;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto h = raw.find('#');
    if (h != std::string::npos) raw = raw.substr(0, h);
    std::size_t b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = raw.find_last_not_of(" \t\r");
    std::string s = raw.substr(b, e - b + 1);
    Clause c{"", s, lineno};
    for (const char* key : {"core", "always", "finally_stay"}) {
      const std::string prefix = std::string(key) + ":";
      if (s.rfind(prefix, 0) == 0) {
        c.key = key;
        c.body = s.substr(prefix.size());
        any_keyword = true;
        break;
      }
    }
    clauses.push_back(std::move(c));
  }
  if (clauses.empty()) throw ParseError(1, 1, "empty mission text");

  bool have_core = false;
  bool have_terminal = false;
  if (!any_keyword) {
    // Entire text is the core formula; join lines.
    std::string body;
    for (const Clause& c : clauses) {
      if (!body.empty()) body += ' ';
      body += c.body;
    }
    spec.mission.core = parse_formula_line(body, clauses.front().line, *spec.store, spec.universe);
    have_core = true;
  } else {
    for (const Clause& c : clauses) {
      if (c.key.empty())
        throw ParseError(c.line, 1, "expected core:, always: or finally_stay: clause");
      const FormulaId f = parse_formula_line(c.body, c.line, *spec.store, spec.universe);
      if (c.key == "core") {
        if (have_core) throw ParseError(c.line, 1, "duplicate core: clause");
        spec.mission.core = f;
        have_core = true;
      } else if (c.key == "always") {
        if (!spec.store->is_boolean(f))
          throw ParseError(c.line, 1, "always: clause must be a Boolean formula");
        spec.mission.invariants.push_back(f);
      } else {
        if (have_terminal) throw ParseError(c.line, 1, "duplicate finally_stay: clause");
        if (!spec.store->is_boolean(f))
          throw ParseError(c.line, 1, "finally_stay: clause must be a Boolean formula");
        spec.mission.terminal = f;
        have_terminal = true;
      }
    }
  }
  if (!have_core) throw ParseError(1, 1, "missing core: clause");
  return spec;
}

}  // namespace semplan
