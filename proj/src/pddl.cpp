#include "svip/pddl.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace svip {

namespace {

struct SExpr {
  bool atom = false;
  std::string text;
  std::vector<SExpr> items;
  int line = 1;
  int col = 1;

  bool is(std::string_view s) const { return atom && text == s; }
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SExpr read_top() {
    skip();
    if (pos_ >= text_.size()) throw ParseError(line_, col_, "unexpected end of input");
    SExpr e = read();
    skip();
    if (pos_ < text_.size()) throw ParseError(line_, col_, "trailing content after top-level expression");
    return e;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip();
    if (pos_ >= text_.size()) throw ParseError(line_, col_, "unexpected end of input");
    SExpr e;
    e.line = line_;
    e.col = col_;
    const char c = text_[pos_];
    if (c == ')') throw ParseError(line_, col_, "unexpected ')'");
    if (c == '(') {
      advance();
      for (;;) {
        skip();
        if (pos_ >= text_.size()) throw ParseError(e.line, e.col, "unbalanced '('");
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        e.items.push_back(read());
      }
      return e;
    }
    e.atom = true;
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' || d == ';') break;
      if (static_cast<unsigned char>(d) < 0x20) throw ParseError(line_, col_, "invalid character");
      e.text.push_back(d);
      advance();
    }
    return e;
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

[[noreturn]] void fail(const SExpr& e, const std::string& msg) { throw ParseError(e.line, e.col, msg); }

const std::string& atom_of(const SExpr& e, const char* what) {
  if (!e.atom) fail(e, std::string("expected ") + what);
  return e.text;
}

std::vector<TypedName> parse_typed_list(const SExpr& list) {
  if (list.atom) fail(list, "expected a parenthesised list");
  std::vector<TypedName> out;
  std::vector<std::string> pending;
  for (size_t i = 0; i < list.items.size(); ++i) {
    const SExpr& it = list.items[i];
    const std::string& s = atom_of(it, "a name");
    if (s == "-") {
      if (i + 1 >= list.items.size()) fail(it, "missing type after '-'");
      if (pending.empty()) fail(it, "type without names");
      const std::string& t = atom_of(list.items[++i], "a type");
      for (auto& n : pending) out.push_back({n, t});
      pending.clear();
    } else {
      pending.push_back(s);
    }
  }
  for (auto& n : pending) out.push_back({n, "object"});
  return out;
}

Literal parse_literal(const SExpr& e) {
  if (e.atom || e.items.empty()) fail(e, "expected a literal");
  if (e.items[0].is("not")) {
    if (e.items.size() != 2) fail(e, "'not' takes one literal");
    Literal l = parse_literal(e.items[1]);
    if (l.negated) fail(e, "double negation");
    l.negated = true;
    return l;
  }
  Literal l;
  l.predicate = atom_of(e.items[0], "a predicate name");
  if (l.predicate == "and" || l.predicate == "or") fail(e, "nested connective not supported");
  for (size_t i = 1; i < e.items.size(); ++i) l.args.push_back(atom_of(e.items[i], "an argument"));
  return l;
}

std::vector<Literal> parse_conjunction(const SExpr& e) {
  if (e.atom) fail(e, "expected a formula");
  if (e.items.empty()) return {};
  if (e.items[0].is("and")) {
    std::vector<Literal> out;
    for (size_t i = 1; i < e.items.size(); ++i) out.push_back(parse_literal(e.items[i]));
    return out;
  }
  return {parse_literal(e)};
}

std::vector<std::string> parse_names(const SExpr& e) {
  if (e.atom) fail(e, "expected a list of names");
  std::vector<std::string> out;
  for (const auto& it : e.items) out.push_back(atom_of(it, "a name"));
  return out;
}

// Keyword/value pairs after a leading name, e.g. ":parameters (...)".
std::vector<std::pair<const SExpr*, const SExpr*>> keyword_pairs(const SExpr& e, size_t start) {
  std::vector<std::pair<const SExpr*, const SExpr*>> out;
  for (size_t i = start; i < e.items.size(); i += 2) {
    const SExpr& k = e.items[i];
    if (!k.atom || k.text.empty() || k.text[0] != ':') fail(k, "expected a keyword");
    if (i + 1 >= e.items.size()) fail(k, "keyword '" + k.text + "' lacks a value");
    out.emplace_back(&k, &e.items[i + 1]);
  }
  return out;
}

void check_literal(const Domain& d, const SExpr& where, const Literal& l) {
  const PredicateDecl* decl = d.predicate(l.predicate);
  if (!decl) fail(where, "undeclared predicate '" + l.predicate + "'");
  if (decl->params.size() != l.args.size())
    fail(where, "arity mismatch for '" + l.predicate + "': expected " + std::to_string(decl->params.size()) + ", got " +
                    std::to_string(l.args.size()));
}

void check_domain(const Domain& d, const std::vector<const SExpr*>& action_sx, const std::vector<const SExpr*>& stream_sx) {
  for (const auto& p : d.predicates)
    for (const auto& a : p.params)
      if (!d.has_type(a.type)) throw ParseError(1, 1, "predicate " + p.name + ": undeclared type '" + a.type + "'");
  for (size_t i = 0; i < d.actions.size(); ++i) {
    const auto& a = d.actions[i];
    const SExpr& where = *action_sx[i];
    std::set<std::string> params;
    for (const auto& p : a.params) {
      if (!d.has_type(p.type)) fail(where, a.name + ": undeclared type '" + p.type + "'");
      params.insert(p.name);
    }
    for (const auto* lits : {&a.pre, &a.eff, &a.con})
      for (const auto& l : *lits) {
        check_literal(d, where, l);
        for (const auto& arg : l.args)
          if (is_variable(arg) && !params.count(arg)) fail(where, a.name + ": free variable " + arg);
      }
  }
  for (size_t i = 0; i < d.streams.size(); ++i) {
    const auto& s = d.streams[i];
    const SExpr& where = *stream_sx[i];
    std::set<std::string> in(s.inputs.begin(), s.inputs.end());
    std::set<std::string> all = in;
    all.insert(s.outputs.begin(), s.outputs.end());
    for (const auto& l : s.domain) {
      check_literal(d, where, l);
      for (const auto& arg : l.args)
        if (is_variable(arg) && !in.count(arg)) fail(where, s.name + ": domain fact mentions non-input " + arg);
    }
    for (const auto& l : s.certified) {
      check_literal(d, where, l);
      for (const auto& arg : l.args)
        if (is_variable(arg) && !all.count(arg)) fail(where, s.name + ": certified fact mentions " + arg);
    }
    for (const auto& c : s.context)
      if (!d.predicate(c)) fail(where, s.name + ": undeclared context predicate '" + c + "'");
    if (s.kind == StreamKind::Test && !s.outputs.empty()) fail(where, s.name + ": test streams have no outputs");
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_typed(std::ostream& os, const std::vector<TypedName>& names) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) os << ' ';
    os << names[i].name;
    if (i + 1 == names.size() || names[i + 1].type != names[i].type) os << " - " << names[i].type;
  }
}

void write_conj(std::ostream& os, const std::vector<Literal>& lits) {
  os << "(and";
  for (const auto& l : lits) os << ' ' << l.to_string();
  os << ')';
}

}  // namespace

Domain parse_domain(std::string_view text) {
  const SExpr top = Reader(text).read_top();
  if (top.atom || top.items.size() < 2 || !top.items[0].is("define")) fail(top, "expected (define (domain NAME) ...)");
  const SExpr& head = top.items[1];
  if (head.atom || head.items.size() != 2 || !head.items[0].is("domain")) fail(head, "expected (domain NAME)");
  Domain d;
  d.name = atom_of(head.items[1], "a domain name");
  std::vector<const SExpr*> action_sx, stream_sx;
  for (size_t i = 2; i < top.items.size(); ++i) {
    const SExpr& sec = top.items[i];
    if (sec.atom || sec.items.empty()) fail(sec, "expected a section");
    const std::string& kw = atom_of(sec.items[0], "a section keyword");
    if (kw == ":types") {
      SExpr body = sec;
      body.items.erase(body.items.begin());
      for (auto& t : parse_typed_list(body)) d.types.emplace_back(t.name, t.type);
    } else if (kw == ":predicates") {
      for (size_t j = 1; j < sec.items.size(); ++j) {
        const SExpr& p = sec.items[j];
        if (p.atom || p.items.empty()) fail(p, "expected a predicate declaration");
        PredicateDecl decl;
        decl.name = atom_of(p.items[0], "a predicate name");
        SExpr rest = p;
        rest.items.erase(rest.items.begin());
        decl.params = parse_typed_list(rest);
        if (d.predicate(decl.name)) fail(p, "duplicate predicate '" + decl.name + "'");
        d.predicates.push_back(decl);
      }
    } else if (kw == ":functional") {
      for (size_t j = 1; j < sec.items.size(); ++j) d.functional.push_back(atom_of(sec.items[j], "a predicate name"));
    } else if (kw == ":action") {
      if (sec.items.size() < 2) fail(sec, "action needs a name");
      ActionSchema a;
      a.name = atom_of(sec.items[1], "an action name");
      for (auto [k, v] : keyword_pairs(sec, 2)) {
        if (k->text == ":parameters") a.params = parse_typed_list(*v);
        else if (k->text == ":precondition") a.pre = parse_conjunction(*v);
        else if (k->text == ":effect") a.eff = parse_conjunction(*v);
        else if (k->text == ":constraint") a.con = parse_conjunction(*v);
        else fail(*k, "unknown action keyword '" + k->text + "'");
      }
      d.actions.push_back(a);
      action_sx.push_back(&sec);
    } else if (kw == ":stream") {
      if (sec.items.size() < 2) fail(sec, "stream needs a name");
      StreamDecl s;
      s.name = atom_of(sec.items[1], "a stream name");
      for (auto [k, v] : keyword_pairs(sec, 2)) {
        if (k->text == ":kind") {
          const std::string& kind = atom_of(*v, "generator or test");
          if (kind == "test") s.kind = StreamKind::Test;
          else if (kind == "generator") s.kind = StreamKind::Generator;
          else fail(*v, "stream kind must be generator or test");
        } else if (k->text == ":inputs") s.inputs = parse_names(*v);
        else if (k->text == ":domain") s.domain = parse_conjunction(*v);
        else if (k->text == ":outputs") s.outputs = parse_names(*v);
        else if (k->text == ":certified") s.certified = parse_conjunction(*v);
        else if (k->text == ":context") s.context = parse_names(*v);
        else fail(*k, "unknown stream keyword '" + k->text + "'");
      }
      d.streams.push_back(s);
      stream_sx.push_back(&sec);
    } else {
      fail(sec.items[0], "unknown domain section '" + kw + "'");
    }
  }
  for (const auto& [t, parent] : d.types)
    if (!d.has_type(parent)) fail(top, "undeclared parent type '" + parent + "'");
  check_domain(d, action_sx, stream_sx);
  return d;
}

Problem parse_problem(std::string_view text, const Domain* domain) {
  const SExpr top = Reader(text).read_top();
  if (top.atom || top.items.size() < 2 || !top.items[0].is("define")) fail(top, "expected (define (problem NAME) ...)");
  const SExpr& head = top.items[1];
  if (head.atom || head.items.size() != 2 || !head.items[0].is("problem")) fail(head, "expected (problem NAME)");
  Problem p;
  p.name = atom_of(head.items[1], "a problem name");
  std::vector<std::pair<const SExpr*, Literal>> located;
  for (size_t i = 2; i < top.items.size(); ++i) {
    const SExpr& sec = top.items[i];
    if (sec.atom || sec.items.empty()) fail(sec, "expected a section");
    const std::string& kw = atom_of(sec.items[0], "a section keyword");
    if (kw == ":domain") {
      if (sec.items.size() != 2) fail(sec, "(:domain NAME)");
      p.domain = atom_of(sec.items[1], "a domain name");
    } else if (kw == ":objects") {
      SExpr body = sec;
      body.items.erase(body.items.begin());
      for (auto& o : parse_typed_list(body)) p.objects.push_back(o);
    } else if (kw == ":init") {
      for (size_t j = 1; j < sec.items.size(); ++j) {
        Literal l = parse_literal(sec.items[j]);
        if (l.negated) fail(sec.items[j], "negative literal in :init");
        located.emplace_back(&sec.items[j], l);
        p.init.push_back(l);
      }
    } else if (kw == ":goal") {
      if (sec.items.size() != 2) fail(sec, "(:goal FORMULA)");
      p.goal = parse_conjunction(sec.items[1]);
      for (const auto& l : p.goal) located.emplace_back(&sec.items[1], l);
    } else if (kw == ":values") {
      for (size_t j = 1; j < sec.items.size(); ++j) {
        const SExpr& v = sec.items[j];
        if (v.atom || v.items.size() != 8) fail(v, "value entry must be (NAME tx ty tz qw qx qy qz)");
        std::array<double, 7> arr{};
        for (size_t k = 0; k < 7; ++k) {
          const std::string& num = atom_of(v.items[k + 1], "a number");
          char* end = nullptr;
          arr[k] = std::strtod(num.c_str(), &end);
          if (end == num.c_str() || *end != '\0') fail(v.items[k + 1], "malformed number '" + num + "'");
        }
        const std::string& name = atom_of(v.items[0], "a value name");
        try {
          p.values[name] = Posed::from_array(arr);
        } catch (const std::exception& e) {
          fail(v, e.what());
        }
      }
    } else {
      fail(sec.items[0], "unknown problem section '" + kw + "'");
    }
  }
  if (domain) {
    if (!p.domain.empty() && p.domain != domain->name) fail(top, "problem targets domain '" + p.domain + "', not '" + domain->name + "'");
    for (const auto& o : p.objects)
      if (!domain->has_type(o.type)) fail(top, "undeclared type '" + o.type + "' for object " + o.name);
    for (const auto& [where, l] : located) {
      check_literal(*domain, *where, l);
      for (const auto& a : l.args)
        if (is_variable(a)) fail(*where, "variable " + a + " in problem");
        else if (!p.object(a)) fail(*where, "undeclared object '" + a + "'");
    }
  }
  return p;
}

std::string serialize(const Domain& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  if (!d.types.empty()) {
    os << "  (:types";
    for (const auto& [t, parent] : d.types) os << ' ' << t << " - " << parent;
    os << ")\n";
  }
  os << "  (:predicates";
  for (const auto& p : d.predicates) {
    os << "\n    (" << p.name;
    if (!p.params.empty()) os << ' ';
    write_typed(os, p.params);
    os << ')';
  }
  os << ")\n";
  if (!d.functional.empty()) {
    os << "  (:functional";
    for (const auto& f : d.functional) os << ' ' << f;
    os << ")\n";
  }
  for (const auto& a : d.actions) {
    os << "  (:action " << a.name << "\n    :parameters (";
    write_typed(os, a.params);
    os << ")\n    :precondition ";
    write_conj(os, a.pre);
    os << "\n    :effect ";
    write_conj(os, a.eff);
    if (!a.con.empty()) {
      os << "\n    :constraint ";
      write_conj(os, a.con);
    }
    os << ")\n";
  }
  for (const auto& s : d.streams) {
    os << "  (:stream " << s.name << "\n    :kind " << (s.kind == StreamKind::Test ? "test" : "generator") << "\n    :inputs (";
    for (size_t i = 0; i < s.inputs.size(); ++i) os << (i ? " " : "") << s.inputs[i];
    os << ")\n    :domain ";
    write_conj(os, s.domain);
    os << "\n    :outputs (";
    for (size_t i = 0; i < s.outputs.size(); ++i) os << (i ? " " : "") << s.outputs[i];
    os << ")\n    :certified ";
    write_conj(os, s.certified);
    if (!s.context.empty()) {
      os << "\n    :context (";
      for (size_t i = 0; i < s.context.size(); ++i) os << (i ? " " : "") << s.context[i];
      os << ')';
    }
    os << ")\n";
  }
  os << ")\n";
  return os.str();
}

std::string serialize(const Problem& p) {
  std::ostringstream os;
  os << "(define (problem " << p.name << ")\n";
  if (!p.domain.empty()) os << "  (:domain " << p.domain << ")\n";
  os << "  (:objects ";
  write_typed(os, p.objects);
  os << ")\n  (:init";
  for (const auto& l : p.init) os << "\n    " << l.to_string();
  os << ")\n  (:goal ";
  write_conj(os, p.goal);
  os << ")\n";
  if (!p.values.empty()) {
    os << "  (:values";
    for (const auto& [name, pose] : p.values) {
      os << "\n    (" << name;
      for (double v : pose.to_array()) os << ' ' << fmt_double(v);
      os << ')';
    }
    os << ")\n";
  }
  os << ")\n";
  return os.str();
}

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Domain load_domain(const std::string& path) { return parse_domain(slurp(path)); }
Problem load_problem(const std::string& path, const Domain* domain) { return parse_problem(slurp(path), domain); }

}  // namespace svip
