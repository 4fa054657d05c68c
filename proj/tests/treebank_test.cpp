#include "entichart/error.hpp"
#include "entichart/treebank.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace entichart;

namespace {

std::set<LabeledSpan> span_set(const Tree& t) {
  const auto v = constituent_spans(t);
  return {v.begin(), v.end()};
}

const std::string kThreeChild = "(A (B b) (C c) (D d))";

EntitySpan ent(int i, int j, std::string type = "ORG") { return {{i, j}, std::move(type)}; }

}  // namespace

TEST_CASE("parse_bracketed builds numbered leaves") {
  const Tree t = parse_bracketed("(S (NP (DT the) (NN cat)))");
  CHECK(t.label == "S");
  REQUIRE(t.children.size() == 1);
  const Tree& np = t.children[0];
  CHECK(np.label == "NP");
  REQUIRE(np.children.size() == 2);
  CHECK(np.children[0].label == "DT");
  CHECK(np.children[0].children[0].token == "the");
  CHECK(np.children[0].children[0].index == 1);
  CHECK(np.children[1].children[0].token == "cat");
  CHECK(np.children[1].children[0].index == 2);
  CHECK(t.span() == Span{1, 2});
}

TEST_CASE("serialize round-trips to canonical whitespace") {
  CHECK(serialize_bracketed(parse_bracketed("  (S\n  (NP   (DT the)\t(NN cat)))  ")) == "(S (NP (DT the) (NN cat)))");
  CHECK(serialize_bracketed(parse_bracketed("( (S (NN x)) )")) == "( (S (NN x)))");
  for (const std::string& s : fixtures::fixture_trees()) CHECK(serialize_bracketed(parse_bracketed(s)) == s);
}

TEST_CASE("parse errors carry character offsets") {
  try {
    parse_bracketed("(S (NP");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 6);
  }
  CHECK_THROWS_AS(parse_bracketed("()"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S)"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S (NN x)) y"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S (NN x)))"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("S"), ParseError);
  CHECK_THROWS_AS(parse_bracketed(""), ParseError);
  try {
    parse_bracketed("(S (NN x)) y");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 11);
  }
}

TEST_CASE("strip_function_tags") {
  const Tree t = parse_bracketed("(S-TPC (NP-SBJ-1 (-NONE- *)) (PP=2 (IN of)))");
  CHECK(serialize_bracketed(strip_function_tags(t)) == "(S (NP (-NONE- *)) (PP (IN of)))");
}

TEST_CASE("collapse and expand unary chains") {
  CHECK(serialize_bracketed(collapse_unaries(parse_bracketed("(S (VP (VB go)))"))) == "(S+VP (VB go))");
  CHECK(serialize_bracketed(collapse_unaries(parse_bracketed("(S (VP (VB go)))"), UnaryPolicy::MergePreterminals)) ==
        "(S+VP+VB go)");
  const Tree plain = parse_bracketed(kThreeChild);
  CHECK(collapse_unaries(plain) == plain);
  for (const std::string& s : fixtures::fixture_trees()) {
    const Tree t = parse_bracketed(s);
    CHECK(expand_unaries(collapse_unaries(t)) == t);
    CHECK(expand_unaries(collapse_unaries(t, UnaryPolicy::MergePreterminals)) == t);
  }
  std::mt19937_64 rng(17);
  for (int k = 0; k < 100; ++k) {
    const Tree t = fixtures::random_tree(rng);
    CHECK(expand_unaries(collapse_unaries(t)) == t);
    CHECK(expand_unaries(collapse_unaries(t, UnaryPolicy::MergePreterminals)) == t);
  }
}

TEST_CASE("binarize factors wide nodes") {
  const Tree t = parse_bracketed(kThreeChild);
  const std::string phi(kFactoredLabel);

  const Tree left = binarize(t, Direction::Left);
  CHECK(serialize_bracketed(left) == "(A (" + phi + " (B b) (C c)) (D d))");
  CHECK(span_set(left) == std::set<LabeledSpan>{{{1, 3}, "A"}, {{1, 2}, phi}, {{1, 1}, "B"}, {{2, 2}, "C"}, {{3, 3}, "D"}});

  const Tree right = binarize(t, Direction::Right);
  CHECK(serialize_bracketed(right) == "(A (B b) (" + phi + " (C c) (D d)))");
  CHECK(span_set(right) == std::set<LabeledSpan>{{{1, 3}, "A"}, {{2, 3}, phi}, {{1, 1}, "B"}, {{2, 2}, "C"}, {{3, 3}, "D"}});

  CHECK(debinarize(left) == t);
  CHECK(debinarize(right) == t);

  const Tree binary = parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VB sat)))");
  CHECK(binarize(binary, Direction::Left) == binary);
  CHECK(binarize(binary, Direction::Right) == binary);
  CHECK(debinarize(binary) == binary);
}

TEST_CASE("nested factored chains flatten completely") {
  const Tree wide = parse_bracketed("(X (A a) (B b) (C c) (D d) (E e))");
  for (Direction d : {Direction::Left, Direction::Right}) {
    const Tree b = binarize(wide, d);
    CHECK(is_binary(b));
    CHECK(constituent_spans(b).size() == 2 * 5 - 1);
    CHECK(debinarize(b) == wide);
  }
}

TEST_CASE("binarization round-trip over random k-ary trees") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 100; ++k) {
    const Tree t = collapse_unaries(fixtures::random_tree(rng));
    for (Direction d : {Direction::Left, Direction::Right}) {
      const Tree b = binarize(t, d);
      CHECK(b.span() == t.span());
      CHECK(debinarize(b) == t);
      const Tree chart = binarize(collapse_unaries(t, UnaryPolicy::MergePreterminals), d);
      CHECK(is_binary(chart));
      CHECK(static_cast<int>(constituent_spans(chart).size()) == 2 * chart.num_tokens() - 1);
    }
  }
}

TEST_CASE("constituent_spans matches manual enumeration") {
  CHECK(span_set(parse_bracketed("(S (NP (DT the) (NN cat)))")) ==
        std::set<LabeledSpan>{{{1, 2}, "S"}, {{1, 2}, "NP"}, {{1, 1}, "DT"}, {{2, 2}, "NN"}});
  CHECK(span_set(parse_bracketed("(S (NP (NNP John)) (VP (VBZ loves) (NP (NNP Mary))))")) ==
        std::set<LabeledSpan>{{{1, 3}, "S"}, {{1, 1}, "NP"}, {{1, 1}, "NNP"}, {{2, 3}, "VP"},
                              {{2, 2}, "VBZ"}, {{3, 3}, "NP"}, {{3, 3}, "NNP"}});
  CHECK(span_set(parse_bracketed("(S a (X b c))")) ==
        std::set<LabeledSpan>{{{1, 3}, "S"}, {{1, 1}, ""}, {{2, 3}, "X"}, {{2, 2}, ""}, {{3, 3}, ""}});
}

TEST_CASE("entity_violations") {
  const Tree t = parse_bracketed(kThreeChild);
  const std::vector<EntitySpan> e23{ent(2, 3)};
  CHECK(entity_violations(binarize(t, Direction::Left), e23) == e23);
  CHECK(entity_violations(binarize(t, Direction::Right), e23).empty());
  CHECK(entity_violations(t, {ent(2, 2), ent(1, 1, "PERSON")}).empty());
  CHECK_THROWS_AS(entity_violations(t, {ent(2, 4)}), ContractError);
  CHECK_THROWS_AS(entity_violations(t, {ent(0, 1)}), ContractError);
}

TEST_CASE("entity_crossings is stricter than membership") {
  const Tree t = parse_bracketed("(S (NP (A a) (B b)) (VP (C c) (D d)))");
  CHECK(entity_crossings(t, {ent(2, 3)}).size() == 1);  // crosses NP and VP
  CHECK(entity_crossings(t, {ent(1, 2)}).empty());
  const Tree flat = parse_bracketed("(S (A a) (B b) (C c))");
  CHECK(entity_violations(flat, {ent(1, 2)}).size() == 1);
  CHECK(entity_crossings(flat, {ent(1, 2)}).empty());
}

TEST_CASE("choose_split") {
  const Tree t = parse_bracketed(kThreeChild);
  CHECK(choose_split(t, {ent(2, 3)}) == Direction::Right);
  CHECK(choose_split(t, {}) == Direction::Left);
  // Mirror: entity over the first two children; by hand Left keeps (1,2), Right drops it.
  CHECK(entity_violations(binarize(t, Direction::Left), {ent(1, 2)}).empty());
  CHECK(entity_violations(binarize(t, Direction::Right), {ent(1, 2)}).size() == 1);
  CHECK(choose_split(t, {ent(1, 2)}) == Direction::Left);
}

TEST_CASE("choose_split never picks the worse direction") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 100; ++k) {
    const Tree t = collapse_unaries(fixtures::random_tree(rng));
    const int n = t.num_tokens();
    std::vector<EntitySpan> es;
    std::uniform_int_distribution<int> pos(1, n);
    std::set<Span> used;
    for (int e = 0; e < 3; ++e) {
      int a = pos(rng), b = pos(rng);
      if (a > b) std::swap(a, b);
      if (used.insert({a, b}).second) es.push_back(ent(a, b));
    }
    const Direction chosen = choose_split(t, es);
    const Direction other = chosen == Direction::Left ? Direction::Right : Direction::Left;
    CHECK(entity_violations(binarize(t, chosen), es).size() <= entity_violations(binarize(t, other), es).size());
    // Binarization only adds nodes, so it never introduces violations.
    CHECK(entity_violations(binarize(t, chosen), es).size() <= entity_violations(t, es).size());
  }
}

TEST_CASE("SentenceRecord validation") {
  SentenceRecord r{{"the", "cat"}, parse_bracketed("(NP (DT the) (NN cat))"), {ent(1, 2)}};
  CHECK_NOTHROW(r.validate());
  r.entities.push_back(ent(1, 2, "PERSON"));
  CHECK_THROWS_AS(r.validate(), ContractError);
  r.entities = {ent(1, 3)};
  CHECK_THROWS_AS(r.validate(), ContractError);
  r.entities = {ent(1, 1, "")};
  CHECK_THROWS_AS(r.validate(), ContractError);
  r.entities.clear();
  r.tokens = {"the", "dog"};
  CHECK_THROWS_AS(r.validate(), ContractError);
}
