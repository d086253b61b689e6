#include "pdp/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>

#include "pdp/error.hpp"

namespace pdp {

std::string format_real(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

enum class Op : unsigned char {
  Const, Time, Feat, Ctrl, Neg, Add, Sub, Mul, Div, Min, Max, Exp, Sin, Abs
};

struct Node {
  Op op;
  double value = 0.0;          // Const
  std::size_t index = 0;       // Feat / Ctrl table
  std::vector<int> children;   // indices into the node array
};

struct Instr {
  Op op;
  std::uint32_t arity = 0;
  double value = 0.0;
  std::size_t index = 0;
};

const char* op_name(Op op) {
  switch (op) {
    case Op::Min: return "min";
    case Op::Max: return "max";
    case Op::Exp: return "exp";
    case Op::Sin: return "sin";
    case Op::Abs: return "abs";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    default: return "?";
  }
}

class Parser {
 public:
  Parser(std::string_view src, const ExprSymbols& sym, std::vector<Node>& nodes)
      : src_(src), sym_(sym), nodes_(nodes) {}

  int parse_all() {
    const int root = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ExprSyntaxError("expression error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  int add(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      Op op;
      if (accept('+')) op = Op::Add;
      else if (accept('-')) op = Op::Sub;
      else return lhs;
      const int rhs = parse_product();
      lhs = add({op, 0.0, 0, {lhs, rhs}});
    }
  }

  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      Op op;
      if (accept('*')) op = Op::Mul;
      else if (accept('/')) op = Op::Div;
      else return lhs;
      const int rhs = parse_unary();
      lhs = add({op, 0.0, 0, {lhs, rhs}});
    }
  }

  int parse_unary() {
    if (accept('-')) return add({Op::Neg, 0.0, 0, {parse_unary()}});
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (!std::isalpha(static_cast<unsigned char>(c))) fail(std::string("unexpected '") + c + "'");
    const std::size_t name_pos = pos_;
    const std::string name = identifier();
    if (name == "t") return add({Op::Time, 0.0, 0, {}});
    if (name == "feat") {
      expect('[');
      skip_ws();
      const std::size_t at = pos_;
      std::size_t i = 0;
      bool any = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        i = i * 10 + static_cast<std::size_t>(src_[pos_] - '0');
        ++pos_;
        any = true;
      }
      if (!any) fail("feature index must be a non-negative integer");
      if (i >= sym_.n_features) {
        pos_ = at;
        fail("feature index " + std::to_string(i) + " out of range (have " +
             std::to_string(sym_.n_features) + " features)");
      }
      expect(']');
      return add({Op::Feat, 0.0, i, {}});
    }
    if (name == "ctrl") {
      expect('[');
      const std::size_t at = pos_;
      const std::string table = identifier();
      const auto it = std::find(sym_.table_names.begin(), sym_.table_names.end(), table);
      if (it == sym_.table_names.end()) {
        pos_ = at;
        skip_ws();
        fail("unknown control table '" + table + "'");
      }
      expect(']');
      return add({Op::Ctrl, 0.0, static_cast<std::size_t>(it - sym_.table_names.begin()), {}});
    }
    Op op;
    if (name == "min") op = Op::Min;
    else if (name == "max") op = Op::Max;
    else if (name == "exp") op = Op::Exp;
    else if (name == "sin") op = Op::Sin;
    else if (name == "abs") op = Op::Abs;
    else {
      pos_ = name_pos;
      fail("unknown name '" + name + "'");
    }
    expect('(');
    std::vector<int> args{parse_sum()};
    while (accept(',')) args.push_back(parse_sum());
    expect(')');
    const bool variadic = op == Op::Min || op == Op::Max;
    if (variadic && args.size() < 2) fail(name + " needs at least two arguments");
    if (!variadic && args.size() != 1) fail(name + " takes exactly one argument");
    return add({op, 0.0, 0, std::move(args)});
  }

  int parse_number() {
    const char* begin = src_.data() + pos_;
    char* end = nullptr;
    // strtod needs a terminated buffer; copy the maximal numeric prefix.
    std::size_t n = 0;
    while (pos_ + n < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_ + n])) || src_[pos_ + n] == '.' ||
            src_[pos_ + n] == 'e' || src_[pos_ + n] == 'E' ||
            ((src_[pos_ + n] == '+' || src_[pos_ + n] == '-') && n > 0 &&
             (src_[pos_ + n - 1] == 'e' || src_[pos_ + n - 1] == 'E'))))
      ++n;
    const std::string text(begin, n);
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - text.c_str());
    if (!std::isfinite(v)) fail("number out of range");
    return add({Op::Const, v, 0, {}});
  }

  std::string_view src_;
  const ExprSymbols& sym_;
  std::vector<Node>& nodes_;
  std::size_t pos_ = 0;
};

double apply(Op op, const double* a, std::uint32_t n) {
  switch (op) {
    case Op::Neg: return -a[0];
    case Op::Add: return a[0] + a[1];
    case Op::Sub: return a[0] - a[1];
    case Op::Mul: return a[0] * a[1];
    case Op::Div:
      if (a[1] == 0.0) throw NumericError("division by zero in expression");
      return a[0] / a[1];
    case Op::Min: return *std::min_element(a, a + n);
    case Op::Max: return *std::max_element(a, a + n);
    case Op::Exp: return std::exp(a[0]);
    case Op::Sin: return std::sin(a[0]);
    case Op::Abs: return std::abs(a[0]);
    default: return 0.0;
  }
}

}  // namespace

struct Expression::Impl {
  std::vector<Node> nodes;
  int root = 0;
  std::vector<std::vector<Instr>> programs;  // one per control
  std::size_t max_stack = 1;

  // Emits postfix code for node i; returns the folded value when constant.
  std::optional<double> emit(int i, const ExprSymbols& sym, std::size_t control,
                             std::vector<Instr>& out) const {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Const:
        out.push_back({Op::Const, 0, n.value, 0});
        return n.value;
      case Op::Ctrl: {
        const double v = sym.table_values[n.index][control];
        out.push_back({Op::Const, 0, v, 0});
        return v;
      }
      case Op::Time:
        out.push_back({Op::Time, 0, 0.0, 0});
        return std::nullopt;
      case Op::Feat:
        out.push_back({Op::Feat, 0, 0.0, n.index});
        return std::nullopt;
      default: break;
    }
    const std::size_t mark = out.size();
    std::vector<double> vals;
    bool all_const = true;
    for (int c : n.children) {
      const auto v = emit(c, sym, control, out);
      if (v) vals.push_back(*v);
      else all_const = false;
    }
    // Division by zero is left for evaluation time so it still raises.
    if (all_const && !(n.op == Op::Div && vals[1] == 0.0)) {
      const double v = apply(n.op, vals.data(), static_cast<std::uint32_t>(vals.size()));
      out.resize(mark);
      out.push_back({Op::Const, 0, v, 0});
      return v;
    }
    out.push_back({n.op, static_cast<std::uint32_t>(n.children.size()), 0.0, 0});
    return std::nullopt;
  }

  void print(int i, bool top, std::string& out) const {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Const: {
        const std::string s = format_real(n.value);
        if (n.value < 0 || (n.value == 0 && std::signbit(n.value))) out += "(" + s + ")";
        else out += s;
        return;
      }
      case Op::Time: out += "t"; return;
      case Op::Feat: out += "feat[" + std::to_string(n.index) + "]"; return;
      case Op::Ctrl: out += "ctrl[" + ctrl_names[n.index] + "]"; return;
      case Op::Neg:
        out += "-";
        print(n.children[0], false, out);
        return;
      case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        if (!top) out += "(";
        print(n.children[0], false, out);
        out += " ";
        out += op_name(n.op);
        out += " ";
        print(n.children[1], false, out);
        if (!top) out += ")";
        return;
      default:
        out += op_name(n.op);
        out += "(";
        for (std::size_t k = 0; k < n.children.size(); ++k) {
          if (k) out += ", ";
          print(n.children[k], true, out);
        }
        out += ")";
        return;
    }
  }

  std::vector<std::string> ctrl_names;
};

Expression::Expression() : Expression(constant(0.0)) {}

Expression Expression::constant(double value) {
  auto impl = std::make_shared<Impl>();
  impl->nodes.push_back({Op::Const, value, 0, {}});
  impl->programs.push_back({{Op::Const, 0, value, 0}});
  return Expression(std::move(impl));
}

Expression Expression::parse(std::string_view source, const ExprSymbols& symbols) {
  auto impl = std::make_shared<Impl>();
  impl->root = Parser(source, symbols, impl->nodes).parse_all();
  impl->ctrl_names = symbols.table_names;
  for (const auto& row : symbols.table_values)
    if (row.size() != symbols.n_controls)
      throw InputError("control table size does not match the control set");
  const std::size_t n_controls = std::max<std::size_t>(1, symbols.n_controls);
  for (std::size_t c = 0; c < n_controls; ++c) {
    std::vector<Instr> prog;
    impl->emit(impl->root, symbols, c, prog);
    std::size_t depth = 0, peak = 1;
    for (const Instr& in : prog) {
      if (in.op == Op::Const || in.op == Op::Time || in.op == Op::Feat) ++depth;
      else depth = depth - in.arity + 1;
      peak = std::max(peak, depth);
    }
    impl->max_stack = std::max(impl->max_stack, peak);
    impl->programs.push_back(std::move(prog));
  }
  return Expression(std::move(impl));
}

double Expression::eval(double t, std::span<const double> feat, std::size_t control) const {
  const auto& progs = impl_->programs;
  const auto& prog = progs.size() == 1 ? progs[0] : progs.at(control);
  if (prog.size() == 1 && prog[0].op == Op::Const) return prog[0].value;
  constexpr std::size_t kInline = 32;
  double inline_stack[kInline] = {};
  std::vector<double> heap;
  double* stack = inline_stack;
  if (impl_->max_stack > kInline) {
    heap.resize(impl_->max_stack);
    stack = heap.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : prog) {
    switch (in.op) {
      case Op::Const: stack[sp++] = in.value; break;
      case Op::Time: stack[sp++] = t; break;
      case Op::Feat: stack[sp++] = feat[in.index]; break;
      default: {
        sp -= in.arity;
        stack[sp] = apply(in.op, stack + sp, in.arity);
        ++sp;
      }
    }
  }
  return stack[0];
}

std::string Expression::canonical() const {
  std::string out;
  impl_->print(impl_->root, true, out);
  return out;
}

int Expression::bare_feature() const {
  const Node& n = impl_->nodes[static_cast<std::size_t>(impl_->root)];
  return n.op == Op::Feat ? static_cast<int>(n.index) : -1;
}

bool Expression::is_constant() const {
  for (const auto& prog : impl_->programs)
    if (!(prog.size() == 1 && prog[0].op == Op::Const && prog[0].value == impl_->programs[0][0].value))
      return false;
  return true;
}

std::vector<std::size_t> Expression::features_used() const {
  std::vector<std::size_t> out;
  for (const Node& n : impl_->nodes)
    if (n.op == Op::Feat) out.push_back(n.index);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace pdp
