#include "entichart/chart.hpp"

#include "entichart/ops.hpp"

namespace entichart {

Eigen::MatrixXd marginals(const Chart& scores) {
  ad::Tape tape;
  ad::Var s = tape.variable(scores.matrix());
  tape.backward(chart::log_partition(s));
  Eigen::MatrixXd m = tape.grad(s);
  m.triangularView<Eigen::StrictlyLower>().setZero();
  return m;
}

namespace chart {

ad::Var log_partition(ad::Var scores) {
  const int n = static_cast<int>(scores.rows());
  if (scores.cols() != n || n < 1) throw ShapeError("log_partition: scores must be square and non-empty");
  if (!scores.value().allFinite()) throw ContractError("log_partition: chart contains non-finite scores");

  // cells[i-1][j-1] = I(i,j) as a 1x1 tape node.
  std::vector<std::vector<ad::Var>> cells(n, std::vector<ad::Var>(n));
  for (int i = 1; i <= n; ++i) cells[i - 1][i - 1] = ad::element(scores, i - 1, i - 1);
  std::vector<ad::Var> lefts, rights;
  for (int w = 2; w <= n; ++w) {
    for (int i = 1; i + w - 1 <= n; ++i) {
      const int j = i + w - 1;
      lefts.clear();
      rights.clear();
      for (int k = i; k < j; ++k) {
        lefts.push_back(cells[i - 1][k - 1]);
        rights.push_back(cells[k][j - 1]);
      }
      ad::Var splits = ad::add(ad::concat_rows(lefts), ad::concat_rows(rights));
      cells[i - 1][j - 1] = ad::add(ad::element(scores, i - 1, j - 1), ad::logsumexp(splits));
    }
  }
  return cells[0][n - 1];
}

namespace {

ad::Var subtree_score(ad::Var scores, const Tree& t) {
  const Span sp = t.span();
  ad::Var own = ad::element(scores, sp.i - 1, sp.j - 1);
  if (t.is_leaf() || t.is_preterminal()) return own;
  return ad::add(own, ad::add(subtree_score(scores, t.children[0]), subtree_score(scores, t.children[1])));
}

}  // namespace

ad::Var tree_score(ad::Var scores, const Tree& binary_tree) {
  const int n = static_cast<int>(scores.rows());
  if (!is_binary(binary_tree)) throw ContractError("tree_score: tree is not binary");
  if (binary_tree.span() != Span{1, n})
    throw ContractError("tree_score: tree covers " + std::to_string(binary_tree.num_tokens()) + " tokens, chart has " +
                        std::to_string(n));
  return subtree_score(scores, binary_tree);
}

ad::Var span_loss(ad::Var scores, const Tree& gold) {
  return ad::sub(log_partition(scores), tree_score(scores, gold));
}

ad::Var label_loss(ad::Var logits, std::span<const int> gold_labels) {
  return ad::softmax_cross_entropy(logits, gold_labels);
}

ad::Var ner_loss(ad::Var logits, std::span<const int> is_entity) {
  if (logits.cols() != 2) throw ShapeError("ner_loss: expected 2 columns, got " + std::to_string(logits.cols()));
  return ad::softmax_cross_entropy(logits, is_entity);
}

ad::Var total_loss(ad::Var span, ad::Var label, ad::Var ner) { return ad::add(ad::add(span, label), ner); }

}  // namespace chart
}  // namespace entichart
