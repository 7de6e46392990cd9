#include "iker/program.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace iker::dsl {

namespace {

struct Token {
  enum class Kind { ident, number, sym, end };
  Kind kind = Kind::end;
  std::string text;
  double value = 0.0;
  bool is_integer = false;
  int line = 0;
  int col = 0;
};

class Lexer {
 public:
  Lexer(const std::string& line, int line_no) : line_(line), line_no_(line_no) { next(); }

  const Token& peek() const { return current_; }
  const Token& peek2() {
    if (!has_ahead_) {
      ahead_ = lex();
      has_ahead_ = true;
    }
    return ahead_;
  }
  Token take() {
    Token t = current_;
    next();
    return t;
  }

 private:
  void next() {
    if (has_ahead_) {
      current_ = ahead_;
      has_ahead_ = false;
    } else {
      current_ = lex();
    }
  }

  Token lex() {
    while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
    Token t;
    t.line = line_no_;
    t.col = static_cast<int>(pos_) + 1;
    if (pos_ >= line_.size() || line_[pos_] == '#') {
      t.kind = Token::Kind::end;
      return t;
    }
    char c = line_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < line_.size() &&
             (std::isalnum(static_cast<unsigned char>(line_[pos_])) || line_[pos_] == '_'))
        ++pos_;
      t.kind = Token::Kind::ident;
      t.text = line_.substr(start, pos_ - start);
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < line_.size() &&
         std::isdigit(static_cast<unsigned char>(line_[pos_ + 1])))) {
      size_t start = pos_;
      bool integer = true;
      while (pos_ < line_.size()) {
        char d = line_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++pos_;
        } else if (d == '.' || d == 'e' || d == 'E') {
          integer = false;
          ++pos_;
          if (pos_ < line_.size() && (line_[pos_] == '+' || line_[pos_] == '-') &&
              (d == 'e' || d == 'E'))
            ++pos_;
        } else {
          break;
        }
      }
      t.kind = Token::Kind::number;
      t.text = line_.substr(start, pos_ - start);
      t.is_integer = integer;
      double v = 0.0;
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (res.ec != std::errc{})
        throw ParseError(line_no_, t.col, "malformed number '" + t.text + "'");
      t.value = v;
      return t;
    }
    static const std::string symbols = "[]()=+-*,";
    if (symbols.find(c) != std::string::npos) {
      t.kind = Token::Kind::sym;
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    throw ParseError(line_no_, t.col, std::string("unexpected character '") + c + "'");
  }

  std::string line_;
  int line_no_;
  size_t pos_ = 0;
  Token current_;
  Token ahead_;
  bool has_ahead_ = false;
};

class LineParser {
 public:
  LineParser(Lexer& lex, int line_no) : lex_(lex), line_no_(line_no) {}

  [[noreturn]] void fail(const std::string& reason, int col = 0) const {
    throw ParseError(line_no_, col == 0 ? lex_.peek().col : col, reason);
  }

  void expect_sym(const std::string& s) {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::sym || t.text != s)
      fail("expected '" + s + "'" + (t.kind == Token::Kind::end
                                         ? " before end of line"
                                         : ", got '" + t.text + "'"));
    lex_.take();
  }

  std::string expect_ident() {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::ident) fail("expected an identifier");
    return lex_.take().text;
  }

  bool at_end() const { return lex_.peek().kind == Token::Kind::end; }

  double signed_number() {
    double sign = 1.0;
    if (lex_.peek().kind == Token::Kind::sym &&
        (lex_.peek().text == "-" || lex_.peek().text == "+")) {
      if (lex_.take().text == "-") sign = -1.0;
    }
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::number) fail("expected a number");
    return sign * lex_.take().value;
  }

  int integer() {
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::number || !t.is_integer)
      fail("expected an integer keypoint label");
    return static_cast<int>(lex_.take().value);
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (lex_.peek().kind == Token::Kind::sym &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      std::string op = lex_.peek().text;
      auto node = std::make_shared<Expr>();
      node->kind = op == "+" ? Expr::Kind::add : Expr::Kind::sub;
      lex_.take();
      node->lhs = e;
      node->rhs = parse_term();
      e = node;
    }
    return e;
  }

  // term := [sign] number '*' term | factor
  ExprPtr parse_term() {
    double sign = 1.0;
    bool signed_scalar = false;
    if (lex_.peek().kind == Token::Kind::sym &&
        (lex_.peek().text == "-" || lex_.peek().text == "+") &&
        lex_.peek2().kind == Token::Kind::number) {
      if (lex_.take().text == "-") sign = -1.0;
      signed_scalar = true;
    }
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::number &&
        (signed_scalar ||
         (lex_.peek2().kind == Token::Kind::sym && lex_.peek2().text == "*"))) {
      auto node = std::make_shared<Expr>();
      node->kind = Expr::Kind::scale;
      node->scalar = sign * lex_.take().value;
      expect_sym("*");
      node->rhs = parse_term();
      return node;
    }
    if (signed_scalar) fail("expected scalar multiplication");
    return parse_factor();
  }

  ExprPtr parse_factor() {
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::sym && t.text == "(") {
      lex_.take();
      ExprPtr e = parse_expr();
      expect_sym(")");
      return e;
    }
    if (t.kind != Token::Kind::ident)
      fail(t.kind == Token::Kind::number
               ? "scalars appear only on the left of '*'"
               : "expected an expression");
    std::string name = lex_.take().text;
    auto node = std::make_shared<Expr>();
    if (name == "kp") {
      node->kind = Expr::Kind::kp;
      expect_sym("(");
      node->label = integer();
      expect_sym(")");
    } else if (name == "vec") {
      node->kind = Expr::Kind::vec;
      expect_sym("(");
      node->value.x = signed_number();
      expect_sym(",");
      node->value.y = signed_number();
      expect_sym(",");
      node->value.z = signed_number();
      expect_sym(")");
    } else if (name == "mid") {
      node->kind = Expr::Kind::mid;
      expect_sym("(");
      node->lhs = parse_expr();
      expect_sym(",");
      node->rhs = parse_expr();
      expect_sym(")");
    } else if (name == "centroid") {
      node->kind = Expr::Kind::centroid;
      expect_sym("(");
      node->labels.push_back(integer());
      while (lex_.peek().kind == Token::Kind::sym && lex_.peek().text == ",") {
        lex_.take();
        node->labels.push_back(integer());
      }
      expect_sym(")");
    } else if (name == "offset_along") {
      node->kind = Expr::Kind::offset_along;
      expect_sym("(");
      node->label_a = integer();
      expect_sym(",");
      node->label_b = integer();
      expect_sym(",");
      node->scalar = signed_number();
      expect_sym(")");
    } else {
      fail("unknown function '" + name + "'");
    }
    return node;
  }

 private:
  Lexer& lex_;
  int line_no_;
};

void collect_labels(const Expr& e, std::vector<std::pair<int, int>>& out, int line) {
  switch (e.kind) {
    case Expr::Kind::kp:
      out.push_back({e.label, line});
      break;
    case Expr::Kind::centroid:
      for (int l : e.labels) out.push_back({l, line});
      break;
    case Expr::Kind::offset_along:
      out.push_back({e.label_a, line});
      out.push_back({e.label_b, line});
      break;
    default:
      break;
  }
  if (e.lhs) collect_labels(*e.lhs, out, line);
  if (e.rhs) collect_labels(*e.rhs, out, line);
}

Vec3 eval(const Expr& e, const std::map<int, Vec3>& kp) {
  switch (e.kind) {
    case Expr::Kind::kp:
      return kp.at(e.label);
    case Expr::Kind::vec:
      return e.value;
    case Expr::Kind::add:
      return eval(*e.lhs, kp) + eval(*e.rhs, kp);
    case Expr::Kind::sub:
      return eval(*e.lhs, kp) - eval(*e.rhs, kp);
    case Expr::Kind::scale:
      return e.scalar * eval(*e.rhs, kp);
    case Expr::Kind::mid:
      return 0.5 * (eval(*e.lhs, kp) + eval(*e.rhs, kp));
    case Expr::Kind::centroid: {
      Vec3 sum;
      for (int l : e.labels) sum += kp.at(l);
      return sum * (1.0 / static_cast<double>(e.labels.size()));
    }
    case Expr::Kind::offset_along: {
      Vec3 a = kp.at(e.label_a);
      Vec3 b = kp.at(e.label_b);
      Vec3 dir = b - a;
      double n = dir.norm();
      if (n < 1e-12) return a;
      return a + dir * (e.scalar / n);
    }
  }
  return {};
}

std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print_expr(const Expr& e, std::ostringstream& out) {
  auto print_operand = [&](const Expr& op) {
    bool parens = op.kind == Expr::Kind::add || op.kind == Expr::Kind::sub;
    if (parens) out << "(";
    print_expr(op, out);
    if (parens) out << ")";
  };
  switch (e.kind) {
    case Expr::Kind::kp:
      out << "kp(" << e.label << ")";
      break;
    case Expr::Kind::vec:
      out << "vec(" << format_number(e.value.x) << ", " << format_number(e.value.y)
          << ", " << format_number(e.value.z) << ")";
      break;
    case Expr::Kind::add:
      print_expr(*e.lhs, out);
      out << " + ";
      print_operand(*e.rhs);
      break;
    case Expr::Kind::sub:
      print_expr(*e.lhs, out);
      out << " - ";
      print_operand(*e.rhs);
      break;
    case Expr::Kind::scale:
      out << format_number(e.scalar) << " * ";
      print_operand(*e.rhs);
      break;
    case Expr::Kind::mid:
      out << "mid(";
      print_expr(*e.lhs, out);
      out << ", ";
      print_expr(*e.rhs, out);
      out << ")";
      break;
    case Expr::Kind::centroid: {
      out << "centroid(";
      for (size_t i = 0; i < e.labels.size(); ++i)
        out << (i ? ", " : "") << e.labels[i];
      out << ")";
      break;
    }
    case Expr::Kind::offset_along:
      out << "offset_along(" << e.label_a << ", " << e.label_b << ", "
          << format_number(e.scalar) << ")";
      break;
  }
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  if (a.label != b.label || a.label_a != b.label_a || a.label_b != b.label_b)
    return false;
  if (a.labels != b.labels) return false;
  if (a.scalar != b.scalar) return false;
  if ((a.value - b.value).norm() != 0.0) return false;
  if ((a.lhs == nullptr) != (b.lhs == nullptr)) return false;
  if ((a.rhs == nullptr) != (b.rhs == nullptr)) return false;
  if (a.lhs && !structurally_equal(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !structurally_equal(*a.rhs, *b.rhs)) return false;
  return true;
}

bool structurally_equal(const KeypointProgram& a, const KeypointProgram& b) {
  if (a.done != b.done) return false;
  if (a.directive.has_value() != b.directive.has_value()) return false;
  if (a.directive &&
      (a.directive->kind != b.directive->kind || a.directive->object_id != b.directive->object_id))
    return false;
  if (a.statements.size() != b.statements.size()) return false;
  for (size_t i = 0; i < a.statements.size(); ++i) {
    if (a.statements[i].label != b.statements[i].label) return false;
    if (!structurally_equal(*a.statements[i].expr, *b.statements[i].expr)) return false;
  }
  if (a.pose_statements.size() != b.pose_statements.size()) return false;
  for (size_t i = 0; i < a.pose_statements.size(); ++i) {
    const auto& pa = a.pose_statements[i];
    const auto& pb = b.pose_statements[i];
    if (pa.object_id != pb.object_id || (pa.position - pb.position).norm() != 0.0 ||
        (pa.rpy - pb.rpy).norm() != 0.0)
      return false;
  }
  return true;
}

KeypointProgram parse_program(const std::string& text, const scene::SceneModel& scn) {
  KeypointProgram program;
  program.raw_text = text;
  bool saw_done_line = false;

  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  std::vector<std::pair<int, int>> referenced;  // label, line
  std::vector<std::pair<int, int>> assigned;

  while (std::getline(stream, line)) {
    ++line_no;
    Lexer lex(line, line_no);
    if (lex.peek().kind == Token::Kind::end) continue;
    LineParser p(lex, line_no);

    const Token& head = lex.peek();
    if (head.kind != Token::Kind::ident) p.fail("expected a statement");

    if (head.text == "grasp" || head.text == "push") {
      if (program.directive) p.fail("duplicate directive");
      DirectiveStmt d;
      d.kind = head.text == "grasp" ? Directive::grasp : Directive::push;
      lex.take();
      p.expect_sym("(");
      d.object_id = p.expect_ident();
      p.expect_sym(")");
      if (!p.at_end()) p.fail("unexpected trailing tokens");
      program.directive = d;
    } else if (head.text == "done") {
      if (saw_done_line) p.fail("duplicate done flag");
      saw_done_line = true;
      lex.take();
      p.expect_sym("=");
      std::string v = p.expect_ident();
      if (v != "true" && v != "false") p.fail("done must be true or false");
      program.done = v == "true";
      if (!p.at_end()) p.fail("unexpected trailing tokens");
    } else if (head.text == "target") {
      lex.take();
      p.expect_sym("[");
      int label = p.integer();
      p.expect_sym("]");
      p.expect_sym("=");
      Assignment stmt;
      stmt.label = label;
      stmt.expr = p.parse_expr();
      if (!p.at_end()) p.fail("unexpected trailing tokens");
      assigned.push_back({label, line_no});
      collect_labels(*stmt.expr, referenced, line_no);
      program.statements.push_back(std::move(stmt));
    } else if (head.text == "pose_target") {
      lex.take();
      p.expect_sym("[");
      PoseTarget pt;
      pt.object_id = p.expect_ident();
      p.expect_sym("]");
      p.expect_sym("=");
      std::string fn = p.expect_ident();
      if (fn != "pose") p.fail("expected pose(x, y, z, roll, pitch, yaw)");
      p.expect_sym("(");
      pt.position.x = p.signed_number();
      p.expect_sym(",");
      pt.position.y = p.signed_number();
      p.expect_sym(",");
      pt.position.z = p.signed_number();
      p.expect_sym(",");
      pt.rpy.x = p.signed_number();
      p.expect_sym(",");
      pt.rpy.y = p.signed_number();
      p.expect_sym(",");
      pt.rpy.z = p.signed_number();
      p.expect_sym(")");
      if (!p.at_end()) p.fail("unexpected trailing tokens");
      program.pose_statements.push_back(pt);
    } else {
      p.fail("unknown statement '" + head.text + "'");
    }
  }

  // validation against the scene
  if (!program.statements.empty() && !program.pose_statements.empty())
    throw ParseError(1, 1, "keypoint and pose targets cannot be mixed");
  if (!program.done) {
    if (program.statements.empty() && program.pose_statements.empty())
      throw ParseError(1, 1, "program has no statements and is not done");
    if (!program.directive)
      throw ParseError(1, 1, "missing grasp/push directive");
  }
  if (program.directive) {
    const auto* obj = scn.find_object(program.directive->object_id);
    if (obj == nullptr)
      throw ParseError(1, 1,
                       "unknown object '" + program.directive->object_id + "'");
    if (!obj->manipulable)
      throw ParseError(1, 1,
                       "object '" + program.directive->object_id + "' is not manipulable");
  }
  std::set<int> scene_labels;
  for (const auto& kp : scn.keypoints) scene_labels.insert(kp.label);
  for (const auto& [label, ln] : referenced) {
    if (!scene_labels.count(label))
      throw ParseError(ln, 1, "unknown keypoint label " + std::to_string(label));
  }
  std::set<int> seen;
  for (const auto& [label, ln] : assigned) {
    if (!scene_labels.count(label))
      throw ParseError(ln, 1, "unknown keypoint label " + std::to_string(label));
    if (!seen.insert(label).second)
      throw ParseError(ln, 1, "duplicate target for keypoint " + std::to_string(label));
    if (program.directive) {
      const auto* kp = scn.find_keypoint(label);
      if (kp->object_id != program.directive->object_id)
        throw ParseError(ln, 1,
                         "target " + std::to_string(label) + " is not a keypoint of '" +
                             program.directive->object_id + "'");
    }
  }
  for (const auto& pt : program.pose_statements) {
    const auto* obj = scn.find_object(pt.object_id);
    if (obj == nullptr)
      throw ParseError(1, 1, "unknown object '" + pt.object_id + "'");
    if (!obj->manipulable)
      throw ParseError(1, 1, "object '" + pt.object_id + "' is not manipulable");
  }
  return program;
}

InterpretResult interpret(const KeypointProgram& program,
                          const std::map<int, Vec3>& keypoints) {
  InterpretResult out;
  out.done = program.done;
  out.directive = program.directive;
  for (const auto& stmt : program.statements)
    out.targets[stmt.label] = eval(*stmt.expr, keypoints);
  return out;
}

std::string print_program(const KeypointProgram& program) {
  std::ostringstream out;
  if (program.directive)
    out << directive_name(program.directive->kind) << "(" << program.directive->object_id
        << ")\n";
  for (const auto& stmt : program.statements) {
    out << "target[" << stmt.label << "] = ";
    print_expr(*stmt.expr, out);
    out << "\n";
  }
  for (const auto& pt : program.pose_statements) {
    out << "pose_target[" << pt.object_id << "] = pose(" << format_number(pt.position.x)
        << ", " << format_number(pt.position.y) << ", " << format_number(pt.position.z)
        << ", " << format_number(pt.rpy.x) << ", " << format_number(pt.rpy.y) << ", "
        << format_number(pt.rpy.z) << ")\n";
  }
  if (program.done) out << "done = true\n";
  return out.str();
}

}  // namespace iker::dsl
