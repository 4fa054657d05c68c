#pragma once

#include "entichart/treebank.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixtures {

using entichart::Tree;

/// Random k-ary tree: internal nodes have 1..max_children children, depth at
/// most max_depth, every token under a POS tag.
inline Tree random_tree(std::mt19937_64& rng, int max_children = 5, int max_depth = 4) {
  static const char* kLabels[] = {"S", "NP", "VP", "PP", "ADJP"};
  static const char* kTags[] = {"DT", "NN", "VB", "IN", "JJ"};
  std::uniform_int_distribution<int> label(0, 4);
  std::uniform_int_distribution<int> kids(1, max_children);
  std::bernoulli_distribution stop(0.3);

  auto make = [&](int depth, auto&& self) -> Tree {
    if (depth > 0 && (depth >= max_depth || stop(rng))) {
      std::vector<Tree> leaf;
      leaf.push_back(Tree::leaf("w" + std::to_string(label(rng)), 0));
      return Tree::node(kTags[label(rng)], std::move(leaf));
    }
    const int k = kids(rng);
    std::vector<Tree> children;
    for (int c = 0; c < k; ++c) children.push_back(self(depth + 1, self));
    return Tree::node(kLabels[label(rng)], std::move(children));
  };
  Tree t = make(0, make);
  entichart::renumber_leaves(t);
  return t;
}

inline const std::vector<std::string>& fixture_trees() {
  static const std::vector<std::string> trees{
      "(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))) (. .))",
      "(S (NP (NNP John)) (VP (VBZ loves) (NP (NNP Mary))))",
      "(A (B b) (C c) (D d))",
      "(S (VP (VB go)))",
      "(NP (NP (DT the) (NNP US) (NNP Department)) (PP (IN of) (NP (NNP Defense))))",
  };
  return trees;
}

struct EvrFixture {
  std::string tree;
  std::vector<entichart::EntitySpan> entities;
  int violations;  // counted by hand
};

/// Eight records with three violating entities in total (EVR 0.375).
inline const std::vector<EvrFixture>& evr_corpus() {
  using entichart::EntitySpan;
  static const std::vector<EvrFixture> corpus{
      {"(S (NP (NNP John) (NNP Smith)) (VP (VBD left)))", {EntitySpan{{1, 2}, "PERSON"}}, 0},
      {"(NP (DT the) (NNP US) (NNP Department))", {EntitySpan{{2, 3}, "ORG"}}, 1},
      {"(S (NP (NNP Mary)) (VP (VBD met) (NP (NNP Bob))))", {EntitySpan{{1, 1}, "PERSON"}, EntitySpan{{3, 3}, "PERSON"}}, 0},
      {"(S (NP (DT the) (NNP New) (NNP York) (NN office)) (VP (VBD closed)))", {EntitySpan{{2, 3}, "GPE"}}, 1},
      {"(S (NP (NNP Acme) (NNP Corp)) (VP (VBZ sells) (NP (NNS tools))))", {EntitySpan{{1, 2}, "ORG"}}, 0},
      {"(S (NP (PRP we)) (VP (VBD saw) (NP (NNP Lake) (NNP Tahoe))))", {}, 0},
      {"(S (NP (NNP Dr) (NNP Ann) (NNP Lee)) (VP (VBD spoke)))",
       {EntitySpan{{1, 3}, "PERSON"}, EntitySpan{{2, 3}, "PERSON"}}, 1},
      {"(S (VP (VB go)))", {}, 0},
  };
  return corpus;
}

}  // namespace fixtures
