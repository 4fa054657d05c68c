#pragma once

#include "entichart/chart.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using entichart::Span;

/// Every full binary bracketing of tokens i..j, as span lists (Catalan(j-i) of them).
inline std::vector<std::vector<Span>> enumerate_trees(int i, int j) {
  if (i == j) return {{Span{i, i}}};
  std::vector<std::vector<Span>> out;
  for (int k = i; k < j; ++k) {
    const auto lefts = enumerate_trees(i, k);
    const auto rights = enumerate_trees(k + 1, j);
    for (const auto& l : lefts)
      for (const auto& r : rights) {
        std::vector<Span> t{Span{i, j}};
        t.insert(t.end(), l.begin(), l.end());
        t.insert(t.end(), r.begin(), r.end());
        out.push_back(std::move(t));
      }
  }
  return out;
}

inline double score_of(const entichart::Chart& c, const std::vector<Span>& tree) {
  double s = 0.0;
  for (const Span& sp : tree) s += c.matrix()(sp.i - 1, sp.j - 1);
  return s;
}

struct Enumerated {
  double log_z;
  double max_score;
  Eigen::MatrixXd marginals;
};

inline Enumerated enumerate(const entichart::Chart& c) {
  const int n = c.n();
  const auto trees = enumerate_trees(1, n);
  std::vector<double> scores;
  for (const auto& t : trees) scores.push_back(score_of(c, t));
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  Enumerated e{m + std::log(z), m, Eigen::MatrixXd::Zero(n, n)};
  for (std::size_t k = 0; k < trees.size(); ++k) {
    const double p = std::exp(scores[k] - e.log_z);
    for (const Span& sp : trees[k]) e.marginals(sp.i - 1, sp.j - 1) += p;
  }
  return e;
}

}  // namespace oracle
