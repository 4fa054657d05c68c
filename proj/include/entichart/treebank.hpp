#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace entichart {

/// Label of intermediate nodes introduced by binarization.
inline constexpr std::string_view kFactoredLabel = "\xE2\x88\x85";  // "∅"

/// Separator of composite labels produced by unary collapse.
inline constexpr char kUnaryJoin = '+';

/// Inclusive 1-based token interval.
struct Span {
  int i = 0;
  int j = 0;

  int width() const { return j - i + 1; }
  auto operator<=>(const Span&) const = default;
};

struct EntitySpan {
  Span span;
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

struct LabeledSpan {
  Span span;
  std::string label;

  auto operator<=>(const LabeledSpan&) const = default;
};

/// Either a leaf (token + 1-based position) or an internal node with an
/// ordered, non-empty list of children.
struct Tree {
  std::string label;
  std::string token;
  int index = 0;
  std::vector<Tree> children;

  static Tree leaf(std::string token, int index) {
    Tree t;
    t.token = std::move(token);
    t.index = index;
    return t;
  }
  static Tree node(std::string label, std::vector<Tree> children) {
    Tree t;
    t.label = std::move(label);
    t.children = std::move(children);
    return t;
  }

  bool is_leaf() const { return children.empty(); }
  /// Internal node whose only child is a leaf (a POS tag).
  bool is_preterminal() const { return children.size() == 1 && children.front().is_leaf(); }

  Span span() const;
  int num_tokens() const { return span().j - span().i + 1; }
  std::vector<std::string> tokens() const;

  bool operator==(const Tree&) const = default;
};

/// Renumbers leaves 1..n left to right.
void renumber_leaves(Tree& tree);

Tree parse_bracketed(std::string_view text);
std::string serialize_bracketed(const Tree& tree);

/// Drops function tags and indices ("NP-SBJ-1" -> "NP", "PP=2" -> "PP");
/// labels starting with '-' such as "-NONE-" are kept.
Tree strip_function_tags(const Tree& tree);

enum class UnaryPolicy {
  /// Stop merging at POS tags: (S (VP (VB go))) -> (S+VP (VB go)).
  KeepPreterminals,
  /// Merge through POS tags so every token carries exactly one node:
  /// (S (VP (VB go))) -> (S+VP+VB go).
  MergePreterminals,
};

Tree collapse_unaries(const Tree& tree, UnaryPolicy policy = UnaryPolicy::KeepPreterminals);
Tree expand_unaries(const Tree& tree);

enum class Direction { Left, Right };

std::string_view to_string(Direction d);

Tree binarize(const Tree& tree, Direction direction);
Tree debinarize(const Tree& tree);
bool is_binary(const Tree& tree);

/// One entry per node. A POS tag and its token count as a single node
/// labeled with the tag; a bare token gets an empty label.
std::vector<LabeledSpan> constituent_spans(const Tree& tree);

/// Multi-token entities whose span is not the span of any tree node.
std::vector<EntitySpan> entity_violations(const Tree& tree, const std::vector<EntitySpan>& entities);

/// Stricter diagnostic: multi-token entities that partially overlap some node
/// span (neither nested in it nor containing it).
std::vector<EntitySpan> entity_crossings(const Tree& tree, const std::vector<EntitySpan>& entities);

/// Binarization direction with strictly fewer entity violations; Left on ties.
Direction choose_split(const Tree& tree, const std::vector<EntitySpan>& entities);

/// Unit of ingestion: tokens, optional gold tree and standoff entities.
struct SentenceRecord {
  std::vector<std::string> tokens;
  std::optional<Tree> gold_tree;
  std::vector<EntitySpan> entities;

  /// Throws ContractError when the tree and tokens disagree, an entity lies
  /// outside 1..n, has an empty type, or is duplicated.
  void validate() const;
};

}  // namespace entichart
