#include "hfmdp/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hfmdp/errors.hpp"

namespace hfmdp {

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InputError("cannot format number");
  return std::string(buf, end);
}

namespace {

struct Token {
  std::string text;
  std::size_t line = 0;
  std::size_t col = 0;
};
using Line = std::vector<Token>;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

/// Splits into non-empty lines of whitespace-separated tokens. '#' starts a
/// comment; ':' is always a token of its own.
std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string_view::npos) stop = text.size();
    ++line_no;
    std::string_view raw = text.substr(start, stop - start);
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    Line toks;
    std::size_t i = 0;
    while (i < raw.size()) {
      if (is_space(raw[i])) {
        ++i;
        continue;
      }
      if (raw[i] == ':') {
        toks.push_back({":", line_no, i + 1});
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < raw.size() && !is_space(raw[j]) && raw[j] != ':') ++j;
      toks.push_back({std::string(raw.substr(i, j - i)), line_no, i + 1});
      i = j;
    }
    if (!toks.empty()) lines.push_back(std::move(toks));
    if (stop == text.size()) break;
    start = stop + 1;
  }
  return lines;
}

[[noreturn]] void fail(const Token& t, const std::string& msg) { throw ParseError(msg, t.line, t.col); }

double parse_real(const Token& t) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  if (!t.text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) fail(t, "expected a finite number, got '" + t.text + "'");
  return v;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == '=' || c == ':' || c == '#') return false;
  return true;
}

/// A parsed subsystem table target: variables in `vars`, tables laid out
/// over `scope` (canonical order of `vars`).
struct TableTarget {
  const VariableSet* vars;
  Scope scope;
  Scope internal;
};

struct ClassDef {
  Token at;
  std::shared_ptr<VariableSet> formals;
  BasicSubsystem body;
};

struct Container {
  Token at;
  std::string name;
  std::string root;
  std::vector<HierarchicalNode::Edge> edges;
  std::vector<Token> edge_tokens;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lines_(tokenize(text)) {}

  ModelDocument run() {
    if (lines_.empty()) throw ParseError("empty model file: expected header 'hfmdp " + std::to_string(kModelFormatVersion) + "'", 1, 1);
    header();
    doc_.variables = std::make_shared<VariableSet>();
    std::optional<Token> discount_at;
    while (pos_ < lines_.size()) {
      const Line& l = lines_[pos_];
      const std::string& kw = l[0].text;
      if (kw == "discount") {
        if (discount_at) fail(l[0], "duplicate discount");
        expect_arity(l, 2);
        doc_.discount = parse_real(l[1]);
        if (!(doc_.discount >= 0.0 && doc_.discount < 1.0)) fail(l[1], "discount must lie in [0, 1)");
        discount_at = l[0];
        ++pos_;
      } else if (kw == "var") {
        declare_var(*doc_.variables, l);
        ++pos_;
      } else if (kw == "class") {
        class_block();
      } else if (kw == "subsystem") {
        subsystem_block();
      } else if (kw == "group") {
        containers_.push_back(container_block(false));
      } else if (kw == "tree") {
        if (tree_) fail(l[0], "duplicate tree block");
        tree_ = container_block(true);
      } else if (kw == "weights") {
        if (weights_at_) fail(l[0], "duplicate weights block");
        weights_block();
      } else {
        fail(l[0], "unknown keyword '" + kw + "'");
      }
    }
    if (!discount_at) throw ParseError("missing 'discount' line", lines_[0][0].line, 1);
    assemble();
    return std::move(doc_);
  }

 private:
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  ModelDocument doc_;
  std::map<std::string, ClassDef> classes_;
  std::vector<std::pair<Token, BasicSubsystem>> subsystems_;
  std::vector<Container> containers_;
  std::optional<Container> tree_;
  std::optional<Token> weights_at_;
  std::vector<Token> weight_tokens_;

  Token eof_token() const { return Token{"", lines_.back().back().line + 1, 1}; }

  static void expect_arity(const Line& l, std::size_t n) {
    if (l.size() < n) fail(l.back(), "'" + l[0].text + "' expects " + std::to_string(n - 1) + " argument(s)");
    if (l.size() > n) fail(l[n], "unexpected token '" + l[n].text + "'");
  }

  void header() {
    const Line& l = lines_[0];
    if (l[0].text != "hfmdp") fail(l[0], "expected header 'hfmdp " + std::to_string(kModelFormatVersion) + "'");
    expect_arity(l, 2);
    if (l[1].text != std::to_string(kModelFormatVersion)) fail(l[1], "unsupported format version '" + l[1].text + "'");
    pos_ = 1;
  }

  static void declare_var(VariableSet& set, const Line& l) {
    if (l.size() < 3) fail(l.back(), "'var' expects a name and at least one value label");
    if (!valid_name(l[1].text)) fail(l[1], "invalid variable name '" + l[1].text + "'");
    if (set.find(l[1].text)) fail(l[1], "duplicate variable '" + l[1].text + "'");
    std::vector<std::string> labels;
    std::set<std::string> seen;
    for (std::size_t i = 2; i < l.size(); ++i) {
      if (!valid_name(l[i].text)) fail(l[i], "invalid value label '" + l[i].text + "'");
      if (!seen.insert(l[i].text).second) fail(l[i], "duplicate value label '" + l[i].text + "'");
      labels.push_back(l[i].text);
    }
    set.add(l[1].text, std::move(labels));
  }

  /// Returns the current line, failing with "unterminated" at EOF.
  const Line& next_in_block(const Token& opener) {
    if (pos_ >= lines_.size()) fail(opener, "unterminated '" + opener.text + "' block (missing 'end')");
    return lines_[pos_];
  }

  static Scope scope_of(const VariableSet& set, const Line& l) {
    std::vector<VarId> ids;
    for (std::size_t i = 1; i < l.size(); ++i) {
      auto id = set.find(l[i].text);
      if (!id) fail(l[i], "unknown variable '" + l[i].text + "'");
      if (std::find(ids.begin(), ids.end(), *id) != ids.end()) fail(l[i], "variable '" + l[i].text + "' listed twice");
      ids.push_back(*id);
    }
    return set.scope(ids);
  }

  /// Reads "<name>=<label> ... :" and returns the index into `scope`, with
  /// the position of the first value token in `value_start`.
  static std::size_t sparse_key(const Line& l, const VariableSet& vars, const Scope& scope, std::size_t& value_start) {
    std::vector<std::optional<std::uint32_t>> values(scope.size());
    std::size_t i = 0;
    for (; i < l.size() && l[i].text != ":"; ++i) {
      const auto eq = l[i].text.find('=');
      if (eq == std::string::npos) fail(l[i], "expected 'variable=value', got '" + l[i].text + "'");
      const std::string name = l[i].text.substr(0, eq), label = l[i].text.substr(eq + 1);
      auto id = vars.find(name);
      if (!id) fail(l[i], "unknown variable '" + name + "'");
      auto p = scope.position(*id);
      if (!p) fail(l[i], "variable '" + name + "' is not in this subsystem's scope");
      auto v = vars.value_index(*id, label);
      if (!v) fail(l[i], "variable '" + name + "' has no value '" + label + "'");
      if (values[*p]) fail(l[i], "variable '" + name + "' assigned twice");
      values[*p] = *v;
    }
    if (i == l.size()) fail(l.back(), "expected ':' before the entry values");
    for (std::size_t p = 0; p < scope.size(); ++p)
      if (!values[p]) fail(l[0], "entry does not assign '" + vars[scope.var(p)].name + "'");
    std::size_t index = 0;
    for (std::size_t p = 0; p < scope.size(); ++p) index = index * scope.card(p) + *values[p];
    value_start = i + 1;
    return index;
  }

  /// Parses "reward|cpt dense|sparse" ... "end" into a table of
  /// `rows` x `width` entries.
  std::vector<double> table(const TableTarget& t, const std::string& owner, bool is_cpt) {
    const Line& head = lines_[pos_];
    expect_arity(head, 2);
    const bool dense = head[1].text == "dense";
    if (!dense && head[1].text != "sparse") fail(head[1], "expected 'dense' or 'sparse'");
    const std::size_t rows = t.scope.assignment_count();
    const std::size_t width = is_cpt ? t.internal.assignment_count() : 1;
    const char* what = is_cpt ? "cpt" : "reward";
    ++pos_;
    std::vector<double> out;
    if (dense) {
      while (true) {
        const Line& l = next_in_block(head[0]);
        if (l[0].text == "end") {
          expect_arity(l, 1);
          ++pos_;
          break;
        }
        for (const auto& tok : l) out.push_back(parse_real(tok));
        ++pos_;
      }
      if (out.size() != rows * width)
        fail(head[0], "subsystem '" + owner + "': dense " + what + " table has " + std::to_string(out.size()) +
                          " entries, expected " + std::to_string(rows * width) + " (" + std::to_string(rows) +
                          " scope assignments x " + std::to_string(width) + ")");
      return out;
    }
    out.assign(rows * width, 0.0);
    std::vector<bool> seen(rows, false);
    while (true) {
      const Line& l = next_in_block(head[0]);
      if (l[0].text == "end" && l.size() == 1) {
        ++pos_;
        break;
      }
      std::size_t vs = 0;
      const std::size_t row = sparse_key(l, *t.vars, t.scope, vs);
      if (seen[row]) fail(l[0], "subsystem '" + owner + "': duplicate " + what + " entry");
      seen[row] = true;
      if (l.size() - vs != width)
        fail(l.size() > vs ? l[vs] : l.back(), "subsystem '" + owner + "': " + what + " entry needs " +
                                                   std::to_string(width) + " value(s), got " + std::to_string(l.size() - vs));
      for (std::size_t c = 0; c < width; ++c) out[row * width + c] = parse_real(l[vs + c]);
      ++pos_;
    }
    if (is_cpt)
      for (std::size_t r = 0; r < rows; ++r)
        if (!seen[r]) {
          std::string key;
          std::size_t rem = r;
          std::vector<std::uint32_t> vals(t.scope.size());
          for (std::size_t p = t.scope.size(); p-- > 0;) {
            vals[p] = static_cast<std::uint32_t>(rem % t.scope.card(p));
            rem /= t.scope.card(p);
          }
          for (std::size_t p = 0; p < t.scope.size(); ++p) {
            const auto& d = (*t.vars)[t.scope.var(p)];
            key += (p ? " " : "") + d.name + "=" + d.domain[vals[p]];
          }
          fail(head[0], "subsystem '" + owner + "': cpt row missing for " + (key.empty() ? "the empty assignment" : key));
        }
    return out;
  }

  /// Body shared by class and plain subsystem blocks.
  void subsystem_body(const Token& opener, const VariableSet& vars, BasicSubsystem& s, bool allow_formals,
                      VariableSet* formals) {
    bool have_internal = false, have_external = false, have_reward = false, have_cpt = false;
    while (true) {
      const Line& l = next_in_block(opener);
      const std::string& kw = l[0].text;
      if (kw == "end") {
        expect_arity(l, 1);
        ++pos_;
        break;
      }
      if (kw == "var" && allow_formals) {
        if (have_internal || have_external) fail(l[0], "class variables must precede 'internal' and 'external'");
        declare_var(*formals, l);
        ++pos_;
      } else if (kw == "internal" || kw == "external") {
        bool& flag = kw == "internal" ? have_internal : have_external;
        if (flag) fail(l[0], "duplicate '" + kw + "' line");
        if (have_reward || have_cpt) fail(l[0], "'" + kw + "' must precede the tables");
        flag = true;
        (kw == "internal" ? s.internal : s.external) = scope_of(vars, l);
        ++pos_;
      } else if (kw == "kind" && !allow_formals) {
        expect_arity(l, 2);
        s.class_name = l[1].text;
        ++pos_;
      } else if (kw == "reward" || kw == "cpt") {
        if (!have_internal) fail(l[0], "'internal' must be given before the tables");
        if (s.internal.empty()) fail(l[0], "subsystem '" + s.name + "' has no internal variables");
        if (!s.internal.intersect(s.external).empty())
          fail(l[0], "subsystem '" + s.name + "' lists a variable as both internal and external");
        bool& flag = kw == "reward" ? have_reward : have_cpt;
        if (flag) fail(l[0], "duplicate '" + kw + "' table");
        flag = true;
        TableTarget t{&vars, s.scope(), s.internal};
        (kw == "reward" ? s.reward : s.transition) = table(t, s.name, kw == "cpt");
      } else {
        fail(l[0], "unexpected '" + kw + "' in block '" + opener.text + " " + s.name + "'");
      }
    }
    if (!have_internal) fail(opener, "subsystem '" + s.name + "' has no 'internal' line");
    if (!have_reward) fail(opener, "subsystem '" + s.name + "' has no reward table");
    if (!have_cpt) fail(opener, "subsystem '" + s.name + "' has no cpt table");
  }

  void class_block() {
    const Line& l = lines_[pos_];
    expect_arity(l, 2);
    const Token opener = l[0], name = l[1];
    if (classes_.count(name.text)) fail(name, "duplicate class '" + name.text + "'");
    ++pos_;
    ClassDef c{opener, std::make_shared<VariableSet>(), {}};
    c.body.name = name.text;
    subsystem_body(opener, *c.formals, c.body, true, c.formals.get());
    classes_.emplace(name.text, std::move(c));
  }

  void subsystem_block() {
    const Line& l = lines_[pos_];
    const Token opener = l[0];
    if (l.size() < 2) fail(opener, "'subsystem' expects a name");
    const Token name = l[1];
    if (!valid_name(name.text)) fail(name, "invalid subsystem name '" + name.text + "'");
    for (const auto& [t, s] : subsystems_)
      if (s.name == name.text) fail(name, "duplicate subsystem '" + name.text + "'");
    BasicSubsystem s;
    s.name = name.text;
    if (l.size() == 2) {
      ++pos_;
      subsystem_body(opener, *doc_.variables, s, false, nullptr);
    } else {
      if (l.size() != 4 || l[2].text != ":") fail(l[2], "expected 'subsystem NAME' or 'subsystem NAME : CLASS'");
      auto it = classes_.find(l[3].text);
      if (it == classes_.end()) fail(l[3], "unknown class '" + l[3].text + "'");
      ++pos_;
      s = instantiate_class(opener, it->second, name.text);
    }
    subsystems_.emplace_back(name, std::move(s));
  }

  BasicSubsystem instantiate_class(const Token& opener, const ClassDef& c, const std::string& name) {
    const VariableSet& formals = *c.formals;
    std::vector<std::optional<VarId>> bound(formals.size());
    while (true) {
      const Line& l = next_in_block(opener);
      if (l[0].text == "end") {
        expect_arity(l, 1);
        ++pos_;
        break;
      }
      if (l[0].text != "bind") fail(l[0], "expected 'bind FORMAL ACTUAL' or 'end'");
      expect_arity(l, 3);
      auto f = formals.find(l[1].text);
      if (!f) fail(l[1], "class '" + c.body.name + "' has no variable '" + l[1].text + "'");
      if (bound[*f]) fail(l[1], "variable '" + l[1].text + "' bound twice");
      auto a = doc_.variables->find(l[2].text);
      if (!a) fail(l[2], "unknown variable '" + l[2].text + "'");
      if ((*doc_.variables)[*a].domain != formals[*f].domain)
        fail(l[2], "variable '" + l[2].text + "' has a different domain from class variable '" + l[1].text + "'");
      for (const auto& b : bound)
        if (b && *b == *a) fail(l[2], "variable '" + l[2].text + "' bound to two class variables");
      bound[*f] = *a;
      ++pos_;
    }
    for (VarId f = 0; f < formals.size(); ++f)
      if (!bound[f]) fail(opener, "subsystem '" + name + "': class variable '" + formals[f].name + "' is not bound");

    auto map_scope = [&](const Scope& s) {
      std::vector<VarId> ids;
      for (VarId v : s.vars()) ids.push_back(*bound[v]);
      return doc_.variables->scope(ids);
    };
    BasicSubsystem out;
    out.name = name;
    out.class_name = c.body.name;
    out.internal = map_scope(c.body.internal);
    out.external = map_scope(c.body.external);
    const Scope fs = c.body.scope(), as = out.scope(), fi = c.body.internal, ai = out.internal;
    // Position in the actual scope of each formal scope variable.
    auto positions = [&](const Scope& formal, const Scope& actual) {
      std::vector<std::size_t> pos;
      for (VarId v : formal.vars()) pos.push_back(*actual.position(*bound[v]));
      return pos;
    };
    const auto zpos = positions(fs, as), xpos = positions(fi, ai);
    auto formal_index = [](const Scope& formal, const std::vector<std::size_t>& pos,
                           const std::vector<std::uint32_t>& actual_values) {
      std::size_t idx = 0;
      for (std::size_t p = 0; p < formal.size(); ++p) idx = idx * formal.card(p) + actual_values[pos[p]];
      return idx;
    };
    std::vector<std::size_t> x_map;
    for (AssignmentCursor c2(ai); !c2.done(); c2.next()) x_map.push_back(formal_index(fi, xpos, c2.values()));
    const std::size_t nx = ai.assignment_count();
    out.reward.resize(as.assignment_count());
    out.transition.resize(as.assignment_count() * nx);
    for (AssignmentCursor c2(as); !c2.done(); c2.next()) {
      const std::size_t za = c2.index(), zf = formal_index(fs, zpos, c2.values());
      out.reward[za] = c.body.reward[zf];
      for (std::size_t x = 0; x < nx; ++x) out.transition[za * nx + x] = c.body.transition[zf * nx + x_map[x]];
    }
    return out;
  }

  Container container_block(bool is_tree) {
    const Line& l = lines_[pos_];
    Container c;
    c.at = l[0];
    if (is_tree) {
      expect_arity(l, 1);
    } else {
      expect_arity(l, 2);
      c.name = l[1].text;
      if (!valid_name(c.name)) fail(l[1], "invalid group name '" + c.name + "'");
      for (const auto& o : containers_)
        if (o.name == c.name) fail(l[1], "duplicate group '" + c.name + "'");
    }
    ++pos_;
    while (true) {
      const Line& m = next_in_block(c.at);
      if (m[0].text == "end") {
        expect_arity(m, 1);
        ++pos_;
        break;
      }
      if (m[0].text == "root") {
        expect_arity(m, 2);
        if (!c.root.empty()) fail(m[0], "duplicate 'root' line");
        c.root = m[1].text;
        c.edge_tokens.insert(c.edge_tokens.begin(), m[1]);
      } else if (m[0].text == "edge") {
        expect_arity(m, 3);
        c.edges.push_back({m[1].text, m[2].text});
        c.edge_tokens.push_back(m[1]);
        c.edge_tokens.push_back(m[2]);
      } else {
        fail(m[0], "expected 'root', 'edge' or 'end'");
      }
      ++pos_;
    }
    if (c.root.empty()) fail(c.at, std::string(is_tree ? "tree" : "group '" + c.name + "'") + " has no 'root' line");
    return c;
  }

  void weights_block() {
    weights_at_ = lines_[pos_][0];
    expect_arity(lines_[pos_], 1);
    ++pos_;
    bool have_default = false;
    while (true) {
      const Line& l = next_in_block(*weights_at_);
      if (l[0].text == "end") {
        expect_arity(l, 1);
        ++pos_;
        break;
      }
      if (l[0].text == "default") {
        expect_arity(l, 2);
        if (have_default) fail(l[0], "duplicate 'default' line");
        have_default = true;
        if (l[1].text == "ones") doc_.weights.base = WeightsSection::Default::Ones;
        else if (l[1].text == "uniform") doc_.weights.base = WeightsSection::Default::Uniform;
        else fail(l[1], "expected 'ones' or 'uniform'");
      } else {
        for (const auto& [n, v] : doc_.weights.explicit_vectors)
          if (n == l[0].text) fail(l[0], "duplicate weights for '" + n + "'");
        std::vector<double> w;
        for (std::size_t i = 1; i < l.size(); ++i) w.push_back(parse_real(l[i]));
        if (w.empty()) fail(l[0], "weights line needs at least one value");
        doc_.weights.explicit_vectors.emplace_back(l[0].text, std::move(w));
        weight_tokens_.push_back(l[0]);
      }
      ++pos_;
    }
  }

  /// Resolves names into the hierarchy, checks that every unit is used
  /// exactly once, and that the result flattens.
  void assemble() {
    if (subsystems_.empty()) fail(eof_token(), "model declares no subsystems");
    std::map<std::string, Token> defined;
    for (const auto& [t, s] : subsystems_) defined.emplace(s.name, t);
    for (const auto& c : containers_)
      if (!defined.emplace(c.name, c.at).second) fail(c.at, "name '" + c.name + "' is used by a subsystem and a group");

    std::map<std::string, std::string> used_by;
    auto members_of = [&](const Container& c) {
      std::vector<std::string> names;
      for (const auto& t : c.edge_tokens) {
        if (!defined.count(t.text)) fail(t, "unknown subsystem or group '" + t.text + "'");
        if (std::find(names.begin(), names.end(), t.text) != names.end()) continue;
        const std::string owner = c.name.empty() ? "the tree block" : "group '" + c.name + "'";
        if (!used_by.emplace(t.text, owner).second)
          fail(t, "'" + t.text + "' is already placed by " + used_by[t.text]);
        if (t.text == c.name) fail(t, "group '" + c.name + "' contains itself");
        names.push_back(t.text);
      }
      return names;
    };
    std::map<std::string, std::vector<std::string>> group_members;
    for (const auto& c : containers_) group_members[c.name] = members_of(c);
    std::vector<std::string> top_members;
    if (tree_) top_members = members_of(*tree_);
    for (const auto& [name, tok] : defined)
      if (!used_by.count(name) && tree_) fail(tok, "'" + name + "' is not attached to the tree");

    std::string top_name;
    if (!tree_) {
      std::vector<std::string> unplaced;
      for (const auto& [name, tok] : defined)
        if (!used_by.count(name)) unplaced.push_back(name);
      if (unplaced.size() != 1)
        fail(eof_token(), "missing tree block: " + std::to_string(unplaced.size()) + " subsystems or groups are unplaced");
      top_name = unplaced.front();
    }

    std::map<std::string, const BasicSubsystem*> subs;
    for (const auto& [t, s] : subsystems_) subs.emplace(s.name, &s);
    std::map<std::string, const Container*> groups;
    for (const auto& c : containers_) groups.emplace(c.name, &c);
    std::set<std::string> active;
    std::function<HierarchicalNode(const std::string&)> build = [&](const std::string& name) -> HierarchicalNode {
      if (auto it = subs.find(name); it != subs.end()) return HierarchicalNode::basic(*it->second);
      const Container& c = *groups.at(name);
      if (!active.insert(name).second) fail(c.at, "group '" + name + "' contains itself");
      std::vector<HierarchicalNode> members;
      for (const auto& m : group_members.at(name)) members.push_back(build(m));
      active.erase(name);
      return HierarchicalNode::group(name, std::move(members), c.edges, c.root);
    };
    if (tree_) {
      std::vector<HierarchicalNode> members;
      for (const auto& m : top_members) members.push_back(build(m));
      doc_.hierarchy = HierarchicalNode::group("", std::move(members), tree_->edges, tree_->root);
    } else {
      doc_.hierarchy = build(top_name);
    }

    const Token tree_at = tree_ ? tree_->at : defined.at(top_name);
    std::optional<SubsystemTree> flat;
    try {
      flat.emplace(flatten(doc_.hierarchy, doc_.variables, doc_.discount));
    } catch (const StructureError& e) {
      fail(tree_at, e.what());
    } catch (const ScopeError& e) {
      fail(tree_at, e.what());
    } catch (const InputError& e) {
      fail(tree_at, e.what());
    }
    for (std::size_t i = 0; i < doc_.weights.explicit_vectors.size(); ++i) {
      const auto& [name, w] = doc_.weights.explicit_vectors[i];
      auto j = flat->index_of(name);
      if (!j) fail(weight_tokens_[i], "weights given for unknown subsystem '" + name + "'");
      if (w.size() != flat->subsystem(*j).internal_size())
        fail(weight_tokens_[i], "subsystem '" + name + "': weights need " +
                                    std::to_string(flat->subsystem(*j).internal_size()) + " values, got " +
                                    std::to_string(w.size()));
    }
  }
};

void write_table(std::ostream& os, const std::vector<double>& values, std::size_t width) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << (i % width == 0 ? "    " : " ") << format_real(values[i]);
    if ((i + 1) % width == 0) os << '\n';
  }
}

void write_names(std::ostream& os, const VariableSet& vars, const Scope& s) {
  for (VarId v : s.vars()) os << ' ' << vars[v].name;
}

}  // namespace

ModelDocument parse_model(std::string_view text) { return Parser(text).run(); }

ModelDocument parse_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read model file '" + path.string() + "'", 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const ModelDocument& doc) {
  const VariableSet& vars = *doc.variables;
  std::ostringstream os;
  os << "hfmdp " << kModelFormatVersion << '\n';
  os << "discount " << format_real(doc.discount) << "\n\n";
  for (VarId v = 0; v < vars.size(); ++v) {
    os << "var " << vars[v].name;
    for (const auto& l : vars[v].domain) os << ' ' << l;
    os << '\n';
  }

  // Leaves and groups in the order flatten visits them.
  std::vector<const BasicSubsystem*> leaves;
  std::vector<const HierarchicalNode*> groups;
  std::function<void(const HierarchicalNode&)> walk = [&](const HierarchicalNode& n) {
    if (n.leaf) {
      leaves.push_back(&*n.leaf);
      return;
    }
    std::function<void(const std::string&)> visit = [&](const std::string& member) {
      for (const auto& m : n.members)
        if (m.name == member) walk(m);
      for (const auto& e : n.edges)
        if (e.parent == member) visit(e.child);
    };
    visit(n.root);
    groups.push_back(&n);
  };
  walk(doc.hierarchy);

  for (const BasicSubsystem* s : leaves) {
    os << "\nsubsystem " << s->name << '\n';
    if (!s->class_name.empty()) os << "  kind " << s->class_name << '\n';
    os << "  internal";
    write_names(os, vars, s->internal);
    os << "\n  external";
    write_names(os, vars, s->external);
    os << "\n  reward dense\n";
    write_table(os, s->reward, 1);
    os << "  end\n  cpt dense\n";
    write_table(os, s->transition, s->internal_size());
    os << "  end\nend\n";
  }
  for (const HierarchicalNode* g : groups) {
    // The unnamed top group is the tree block; a named top group parses back
    // as the single unplaced unit.
    os << '\n' << (g->name.empty() ? std::string("tree") : "group " + g->name) << '\n';
    os << "  root " << g->root << '\n';
    for (const auto& e : g->edges) os << "  edge " << e.child << ' ' << e.parent << '\n';
    os << "end\n";
  }
  os << "\nweights\n  default " << (doc.weights.base == WeightsSection::Default::Ones ? "ones" : "uniform") << '\n';
  for (const auto& [name, w] : doc.weights.explicit_vectors) {
    os << "  " << name;
    for (double x : w) os << ' ' << format_real(x);
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

LoadedModel instantiate(const ModelDocument& doc) {
  SubsystemTree tree = flatten(doc.hierarchy, doc.variables, doc.discount);
  RelevanceWeights w = doc.weights.base == WeightsSection::Default::Ones ? RelevanceWeights::ones(tree)
                                                                       : RelevanceWeights::uniform(tree);
  for (const auto& [name, vec] : doc.weights.explicit_vectors) {
    auto j = tree.index_of(name);
    if (!j) throw InputError("weights given for unknown subsystem '" + name + "'");
    if (vec.size() != w.per_subsystem[*j].size()) throw InputError("weights for '" + name + "' have the wrong length");
    w.per_subsystem[*j] = vec;
  }
  return LoadedModel{std::move(tree), std::move(w)};
}

LoadedModel load_model(const std::filesystem::path& path) { return instantiate(parse_model_file(path)); }

ModelDocument document_from_tree(const SubsystemTree& tree, const RelevanceWeights& weights) {
  ModelDocument doc;
  doc.variables = std::make_shared<VariableSet>();
  for (VarId v = 0; v < tree.variables().size(); ++v) doc.variables->add(tree.variables()[v].name, tree.variables()[v].domain);
  doc.discount = tree.discount();
  std::vector<HierarchicalNode> members;
  std::vector<HierarchicalNode::Edge> edges;
  for (std::size_t j : tree.preorder()) {
    members.push_back(HierarchicalNode::basic(tree.subsystem(j)));
    if (auto p = tree.parent(j)) edges.push_back({tree.subsystem(j).name, tree.subsystem(*p).name});
  }
  doc.hierarchy = HierarchicalNode::group("", std::move(members), std::move(edges), tree.subsystem(tree.root()).name);
  for (std::size_t j = 0; j < tree.size(); ++j) doc.weights.explicit_vectors.emplace_back(tree.subsystem(j).name, weights[j]);
  return doc;
}

}  // namespace hfmdp
