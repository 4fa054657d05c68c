#include "entichart/treebank.hpp"

#include "entichart/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace entichart {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_delim(char c) { return is_space(c) || c == '(' || c == ')'; }

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : s_(text) {}

  Tree read_tree() {
    skip_space();
    if (pos_ >= s_.size() || s_[pos_] != '(') throw ParseError("expected '('", pos_);
    Tree t = read_node();
    skip_space();
    if (pos_ != s_.size()) throw ParseError("trailing characters after tree", pos_);
    return t;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  std::string read_atom() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !is_delim(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  Tree read_node() {
    const std::size_t open = pos_;
    ++pos_;  // '('
    skip_space();
    Tree node;
    node.label = read_atom();
    for (;;) {
      skip_space();
      if (pos_ >= s_.size()) throw ParseError("unbalanced parentheses: unexpected end of input", pos_);
      const char c = s_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        node.children.push_back(read_node());
      } else {
        node.children.push_back(Tree::leaf(read_atom(), 0));
      }
    }
    if (node.children.empty()) throw ParseError("empty constituent", open);
    return node;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void renumber(Tree& t, int& next) {
  if (t.is_leaf()) {
    t.index = next++;
    return;
  }
  for (Tree& c : t.children) renumber(c, next);
}

void serialize(const Tree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const Tree& c : t.children) {
    out += ' ';
    serialize(c, out);
  }
  out += ')';
}

std::vector<std::string> split_label(const std::string& label) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = label.find(kUnaryJoin, start);
    if (at == std::string::npos) {
      parts.push_back(label.substr(start));
      return parts;
    }
    parts.push_back(label.substr(start, at - start));
    start = at + 1;
  }
}

bool is_factored(const Tree& t) { return !t.is_leaf() && t.label == kFactoredLabel; }

Tree factor_right(std::vector<Tree>::iterator first, std::vector<Tree>::iterator last) {
  if (last - first == 1) return std::move(*first);
  std::vector<Tree> kids;
  kids.push_back(std::move(*first));
  kids.push_back(factor_right(first + 1, last));
  return Tree::node(std::string(kFactoredLabel), std::move(kids));
}

Tree factor_left(std::vector<Tree>::iterator first, std::vector<Tree>::iterator last) {
  if (last - first == 1) return std::move(*first);
  std::vector<Tree> kids;
  kids.push_back(factor_left(first, last - 1));
  kids.push_back(std::move(*(last - 1)));
  return Tree::node(std::string(kFactoredLabel), std::move(kids));
}

void collect_spans(const Tree& t, std::vector<LabeledSpan>& out) {
  if (t.is_leaf()) {
    out.push_back({{t.index, t.index}, ""});
    return;
  }
  if (t.is_preterminal()) {
    out.push_back({t.span(), t.label});
    return;
  }
  out.push_back({t.span(), t.label});
  for (const Tree& c : t.children) collect_spans(c, out);
}

std::set<Span> node_spans(const Tree& tree) {
  std::set<Span> spans;
  for (const LabeledSpan& ls : constituent_spans(tree)) spans.insert(ls.span);
  return spans;
}

void check_entities_in_range(const Tree& tree, const std::vector<EntitySpan>& entities) {
  const Span root = tree.span();
  for (const EntitySpan& e : entities) {
    if (e.span.i < root.i || e.span.j > root.j || e.span.i > e.span.j)
      throw ContractError("entity (" + std::to_string(e.span.i) + "," + std::to_string(e.span.j) +
                          ") outside tokens " + std::to_string(root.i) + ".." + std::to_string(root.j));
  }
}

}  // namespace

Span Tree::span() const {
  if (is_leaf()) return {index, index};
  return {children.front().span().i, children.back().span().j};
}

std::vector<std::string> Tree::tokens() const {
  std::vector<std::string> out;
  auto walk = [&out](const Tree& t, auto&& self) -> void {
    if (t.is_leaf()) {
      out.push_back(t.token);
      return;
    }
    for (const Tree& c : t.children) self(c, self);
  };
  walk(*this, walk);
  return out;
}

void renumber_leaves(Tree& tree) {
  int next = 1;
  renumber(tree, next);
}

Tree parse_bracketed(std::string_view text) {
  Tree t = BracketReader(text).read_tree();
  renumber_leaves(t);
  return t;
}

std::string serialize_bracketed(const Tree& tree) {
  std::string out;
  serialize(tree, out);
  return out;
}

Tree strip_function_tags(const Tree& tree) {
  if (tree.is_leaf()) return tree;
  Tree out = tree;
  if (!out.label.empty() && out.label.front() != '-') {
    const std::size_t cut = out.label.find_first_of("-=");
    if (cut != std::string::npos) out.label.resize(cut);
  }
  for (Tree& c : out.children) c = strip_function_tags(c);
  return out;
}

Tree collapse_unaries(const Tree& tree, UnaryPolicy policy) {
  if (tree.is_leaf()) return tree;
  Tree out = tree;
  while (out.children.size() == 1 && !out.children.front().is_leaf() &&
         (policy == UnaryPolicy::MergePreterminals || !out.children.front().is_preterminal())) {
    Tree child = std::move(out.children.front());
    out.label += kUnaryJoin;
    out.label += child.label;
    out.children = std::move(child.children);
  }
  for (Tree& c : out.children) c = collapse_unaries(c, policy);
  return out;
}

Tree expand_unaries(const Tree& tree) {
  if (tree.is_leaf()) return tree;
  std::vector<Tree> kids;
  kids.reserve(tree.children.size());
  for (const Tree& c : tree.children) kids.push_back(expand_unaries(c));
  const std::vector<std::string> parts = split_label(tree.label);
  Tree node = Tree::node(parts.back(), std::move(kids));
  for (auto it = parts.rbegin() + 1; it != parts.rend(); ++it) {
    std::vector<Tree> one;
    one.push_back(std::move(node));
    node = Tree::node(*it, std::move(one));
  }
  return node;
}

std::string_view to_string(Direction d) { return d == Direction::Left ? "left" : "right"; }

Tree binarize(const Tree& tree, Direction direction) {
  if (tree.is_leaf()) return tree;
  std::vector<Tree> kids;
  kids.reserve(tree.children.size());
  for (const Tree& c : tree.children) kids.push_back(binarize(c, direction));
  if (kids.size() <= 2) return Tree::node(tree.label, std::move(kids));
  std::vector<Tree> pair;
  if (direction == Direction::Right) {
    pair.push_back(std::move(kids.front()));
    pair.push_back(factor_right(kids.begin() + 1, kids.end()));
  } else {
    pair.push_back(factor_left(kids.begin(), kids.end() - 1));
    pair.push_back(std::move(kids.back()));
  }
  return Tree::node(tree.label, std::move(pair));
}

Tree debinarize(const Tree& tree) {
  if (tree.is_leaf()) return tree;
  std::vector<Tree> kids;
  for (const Tree& c : tree.children) {
    Tree d = debinarize(c);
    if (is_factored(d)) {
      for (Tree& g : d.children) kids.push_back(std::move(g));
    } else {
      kids.push_back(std::move(d));
    }
  }
  return Tree::node(tree.label, std::move(kids));
}

bool is_binary(const Tree& tree) {
  if (tree.is_leaf()) return true;
  if (tree.is_preterminal()) return true;
  if (tree.children.size() != 2) return false;
  return is_binary(tree.children[0]) && is_binary(tree.children[1]);
}

std::vector<LabeledSpan> constituent_spans(const Tree& tree) {
  std::vector<LabeledSpan> out;
  collect_spans(tree, out);
  return out;
}

std::vector<EntitySpan> entity_violations(const Tree& tree, const std::vector<EntitySpan>& entities) {
  check_entities_in_range(tree, entities);
  const std::set<Span> spans = node_spans(tree);
  std::vector<EntitySpan> out;
  for (const EntitySpan& e : entities)
    if (e.span.width() > 1 && !spans.contains(e.span)) out.push_back(e);
  return out;
}

std::vector<EntitySpan> entity_crossings(const Tree& tree, const std::vector<EntitySpan>& entities) {
  check_entities_in_range(tree, entities);
  const std::set<Span> spans = node_spans(tree);
  std::vector<EntitySpan> out;
  for (const EntitySpan& e : entities) {
    if (e.span.width() < 2) continue;
    const bool crosses = std::any_of(spans.begin(), spans.end(), [&e](const Span& s) {
      const bool overlap = s.i <= e.span.j && e.span.i <= s.j;
      const bool nested = (s.i <= e.span.i && e.span.j <= s.j) || (e.span.i <= s.i && s.j <= e.span.j);
      return overlap && !nested;
    });
    if (crosses) out.push_back(e);
  }
  return out;
}

Direction choose_split(const Tree& tree, const std::vector<EntitySpan>& entities) {
  const std::size_t left = entity_violations(binarize(tree, Direction::Left), entities).size();
  const std::size_t right = entity_violations(binarize(tree, Direction::Right), entities).size();
  return right < left ? Direction::Right : Direction::Left;
}

void SentenceRecord::validate() const {
  const int n = static_cast<int>(tokens.size());
  if (gold_tree) {
    if (gold_tree->tokens() != tokens)
      throw ContractError("tree tokens do not match record tokens (" + std::to_string(gold_tree->num_tokens()) +
                          " vs " + std::to_string(n) + ")");
  }
  std::set<Span> seen;
  for (const EntitySpan& e : entities) {
    if (e.span.i < 1 || e.span.j > n || e.span.i > e.span.j)
      throw ContractError("entity (" + std::to_string(e.span.i) + "," + std::to_string(e.span.j) +
                          ") outside 1.." + std::to_string(n));
    if (e.type.empty()) throw ContractError("entity with empty type");
    if (!seen.insert(e.span).second)
      throw ContractError("duplicate entity span (" + std::to_string(e.span.i) + "," + std::to_string(e.span.j) + ")");
  }
}

}  // namespace entichart
