#pragma once

#include "entichart/tape.hpp"

#include <random>
#include <span>
#include <vector>

// Differentiable free functions over tape variables. Every op checks shapes
// and throws ShapeError naming the offending dimensions.
namespace entichart::ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x c row to every row of an r x c matrix.
Var add_row(Var a, Var row);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var transpose(Var a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
inline Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }
inline Var concat_rows(std::initializer_list<Var> parts) { return concat_rows(std::span<const Var>(parts.begin(), parts.size())); }

/// Embedding gather: result row k is a.row(ids[k]).
Var gather_rows(Var a, std::span<const int> ids);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

Var sum(Var a);
Var element(Var a, Eigen::Index r, Eigen::Index c);

/// uᵀ W v for vectors u, v of size d and W d x d. Returns 1x1.
Var bilinear(Var u, Var w, Var v);
/// c stacked bilinear forms; W is (c*d) x d with block k = W_k. Returns c x 1.
Var bilinear_multi(Var u, Var w, Var v);

/// Row-batched bilinear_multi: U and V are m x d, W is (c*d) x d; result row
/// r holds the c scores of (U.row(r), V.row(r)). Returns m x c.
Var bilinear_multi_rows(Var u, Var w, Var v);

/// log Σ exp over every element of a, with max subtraction.
Var logsumexp(Var a);
Var logsumexp(std::span<const Var> scalars);

/// Σ_r −log softmax(logits.row(r))[targets[r]].
Var softmax_cross_entropy(Var logits, std::span<const int> targets);

/// Inverted dropout: zeroes entries with probability `rate`, scales survivors
/// by 1/(1-rate). Identity when rate == 0.
Var dropout(Var a, double rate, std::mt19937_64& rng);

/// Plain (non-tape) helpers shared with the chart and heads.
double logsumexp_value(std::span<const double> xs);
Matrix softmax_rows(const Matrix& logits);

}  // namespace entichart::ad
