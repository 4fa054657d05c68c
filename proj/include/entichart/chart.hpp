#pragma once

#include "entichart/error.hpp"
#include "entichart/tape.hpp"
#include "entichart/treebank.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace entichart {

/// Upper-triangular table of span scores s(i,j), 1 <= i <= j <= n. Stored as
/// an n x n matrix whose strictly-lower triangle is unused.
template <typename Scalar>
class ChartScores {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ChartScores(int n) : s_(Matrix::Zero(n, n)) {
    if (n < 1) throw ContractError("chart: sentence length must be positive");
  }
  explicit ChartScores(Matrix full) : s_(std::move(full)) {
    if (s_.rows() != s_.cols() || s_.rows() < 1)
      throw ShapeError("chart: score matrix must be square and non-empty, got " + std::to_string(s_.rows()) + "x" +
                       std::to_string(s_.cols()));
    s_.template triangularView<Eigen::StrictlyLower>().setZero();
  }

  int n() const { return static_cast<int>(s_.rows()); }

  Scalar operator()(int i, int j) const { return s_(check(i, j), j - 1); }
  Scalar& operator()(int i, int j) { return s_(check(i, j), j - 1); }
  Scalar operator()(Span sp) const { return (*this)(sp.i, sp.j); }

  /// 0-based (i-1, j-1) view.
  const Matrix& matrix() const { return s_; }

  bool all_finite() const {
    for (int j = 1; j <= n(); ++j)
      for (int i = 1; i <= j; ++i)
        if (!std::isfinite(static_cast<double>((*this)(i, j)))) return false;
    return true;
  }

 private:
  int check(int i, int j) const {
    if (i < 1 || j > n() || i > j)
      throw ContractError("chart: span (" + std::to_string(i) + "," + std::to_string(j) +
                          ") is outside the upper triangle of a length-" + std::to_string(n()) + " chart");
    return i - 1;
  }

  Matrix s_;
};

using Chart = ChartScores<double>;

template <typename Scalar>
struct InsideTable {
  Scalar log_z;
  /// table(i-1, j-1) = log inside score of span (i,j).
  typename ChartScores<Scalar>::Matrix table;
};

namespace detail {

// s(node) + (s(left subtree) + s(right subtree)): the same association order
// the inside recursion uses, so single-tree charts give a loss of exactly 0.
template <typename Scalar>
Scalar subtree_score(const ChartScores<Scalar>& scores, const Tree& t) {
  if (t.is_leaf() || t.is_preterminal()) return scores(t.span());
  return scores(t.span()) + (subtree_score(scores, t.children[0]) + subtree_score(scores, t.children[1]));
}

}  // namespace detail

/// s(x,y): sum of s(i,j) over every node of a binary tree, width-1 spans included.
template <typename Scalar>
Scalar tree_score(const ChartScores<Scalar>& scores, const Tree& tree) {
  if (!is_binary(tree)) throw ContractError("tree_score: tree is not binary");
  if (tree.span() != Span{1, scores.n()})
    throw ContractError("tree_score: tree covers " + std::to_string(tree.num_tokens()) + " tokens, chart has " +
                        std::to_string(scores.n()));
  return detail::subtree_score(scores, tree);
}

/// Inside algorithm in log space: I(i,i) = s(i,i);
/// I(i,j) = s(i,j) + logsumexp_k (I(i,k) + I(k+1,j)); log Z = I(1,n).
template <typename Scalar>
InsideTable<Scalar> inside(const ChartScores<Scalar>& scores) {
  using std::exp;
  using std::log;
  if (!scores.all_finite()) throw ContractError("inside: chart contains non-finite scores");
  const int n = scores.n();
  InsideTable<Scalar> out{Scalar(0), ChartScores<Scalar>::Matrix::Zero(n, n)};
  auto& I = out.table;
  std::vector<Scalar> cand;
  for (int w = 1; w <= n; ++w) {
    for (int i = 1; i + w - 1 <= n; ++i) {
      const int j = i + w - 1;
      if (w == 1) {
        I(i - 1, j - 1) = scores(i, j);
        continue;
      }
      cand.clear();
      Scalar m = -std::numeric_limits<Scalar>::infinity();
      for (int k = i; k < j; ++k) {
        cand.push_back(I(i - 1, k - 1) + I(k, j - 1));
        if (cand.back() > m) m = cand.back();
      }
      Scalar acc(0);
      for (const Scalar& c : cand) acc += exp(c - m);
      I(i - 1, j - 1) = scores(i, j) + m + log(acc);
    }
  }
  out.log_z = I(0, n - 1);
  return out;
}

namespace detail {

inline Tree build_from_splits(const Eigen::MatrixXi& split, int i, int j) {
  if (i == j) return Tree::leaf("", i);
  const int k = split(i - 1, j - 1);
  std::vector<Tree> kids;
  kids.push_back(build_from_splits(split, i, k));
  kids.push_back(build_from_splits(split, k + 1, j));
  return Tree::node("", std::move(kids));
}

}  // namespace detail

/// Max-plus inside recursion with split backtracking. Returns an unlabeled
/// binary tree whose leaves carry indices 1..n and empty tokens. Ties go to
/// the split with the longest left child, so a flat chart decodes
/// left-branching.
template <typename Scalar>
Tree cky_decode(const ChartScores<Scalar>& scores) {
  if (!scores.all_finite()) throw ContractError("cky_decode: chart contains non-finite scores");
  const int n = scores.n();
  typename ChartScores<Scalar>::Matrix best = ChartScores<Scalar>::Matrix::Zero(n, n);
  Eigen::MatrixXi split = Eigen::MatrixXi::Zero(n, n);
  for (int w = 1; w <= n; ++w) {
    for (int i = 1; i + w - 1 <= n; ++i) {
      const int j = i + w - 1;
      if (w == 1) {
        best(i - 1, j - 1) = scores(i, j);
        continue;
      }
      Scalar top = -std::numeric_limits<Scalar>::infinity();
      int arg = i;
      for (int k = i; k < j; ++k) {
        const Scalar v = best(i - 1, k - 1) + best(k, j - 1);
        if (v >= top) {
          top = v;
          arg = k;
        }
      }
      best(i - 1, j - 1) = scores(i, j) + top;
      split(i - 1, j - 1) = arg;
    }
  }
  return detail::build_from_splits(split, 1, n);
}

/// −s(x,ŷ) + log Z(x) = −log p(ŷ|x).
template <typename Scalar>
Scalar span_loss(const ChartScores<Scalar>& scores, const Tree& gold) {
  return inside(scores).log_z - tree_score(scores, gold);
}

/// m(i,j) = ∂ log Z / ∂ s(i,j), computed by reverse-mode differentiation of
/// the inside recursion. Returned as an n x n upper-triangular matrix.
Eigen::MatrixXd marginals(const Chart& scores);

// Tape versions used in training. `scores` is an n x n variable whose upper
// triangle holds s(i,j) at (i-1, j-1).
namespace chart {

ad::Var log_partition(ad::Var scores);
ad::Var tree_score(ad::Var scores, const Tree& binary_tree);
ad::Var span_loss(ad::Var scores, const Tree& gold);

/// Σ over rows of −log softmax(row)[gold]; `logits` holds one row per gold
/// span, `gold_labels` the label ids in the same order.
ad::Var label_loss(ad::Var logits, std::span<const int> gold_labels);
/// Binary cross-entropy over every upper-triangle span; `logits` has one
/// 2-column row per span, `is_entity` its 0/1 target.
ad::Var ner_loss(ad::Var logits, std::span<const int> is_entity);
/// Unweighted sum of the three components.
ad::Var total_loss(ad::Var span, ad::Var label, ad::Var ner);

}  // namespace chart
}  // namespace entichart
