#include "entichart/heads.hpp"

#include "entichart/error.hpp"
#include "entichart/init.hpp"
#include "entichart/ops.hpp"

namespace entichart {
namespace {

ad::Matrix stacked_glorot(int blocks, int d, std::mt19937_64& rng) {
  ad::Matrix w(static_cast<Eigen::Index>(blocks) * d, d);
  for (int k = 0; k < blocks; ++k) w.middleRows(static_cast<Eigen::Index>(k) * d, d) = ad::glorot_uniform(d, d, rng);
  return w;
}

}  // namespace

std::string_view to_string(EntityMode m) {
  switch (m) {
    case EntityMode::Gold: return "gold";
    case EntityMode::Predicted: return "predicted";
    case EntityMode::None: return "none";
  }
  return "none";
}

EntityMode parse_entity_mode(std::string_view s) {
  if (s == "gold") return EntityMode::Gold;
  if (s == "predicted") return EntityMode::Predicted;
  if (s == "none") return EntityMode::None;
  throw ContractError("unknown entity mode '" + std::string(s) + "' (expected gold|predicted|none)");
}

int entity_indicator(Span span, const std::vector<EntitySpan>& entities) {
  for (const EntitySpan& e : entities)
    if (e.span == span) return 1;
  return 0;
}

Eigen::MatrixXi indicator_matrix(int n, std::span<const Span> spans) {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n, n);
  for (const Span& s : spans) {
    if (s.i < 1 || s.j > n || s.i > s.j)
      throw ContractError("indicator: span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ") outside 1.." +
                          std::to_string(n));
    m(s.i - 1, s.j - 1) = 1;
  }
  return m;
}

Eigen::MatrixXi indicator_matrix(int n, const std::vector<EntitySpan>& entities) {
  std::vector<Span> spans;
  spans.reserve(entities.size());
  for (const EntitySpan& e : entities) spans.push_back(e.span);
  return indicator_matrix(n, spans);
}

std::vector<Span> upper_triangle_spans(int n) {
  std::vector<Span> out;
  out.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) out.push_back({i, j});
  return out;
}

Heads::Heads(const EncoderConfig& config, int num_labels, bool biaffine_bias, ParameterStore& store,
             std::mt19937_64& rng)
    : num_labels_(num_labels), bias_(biaffine_bias), entity_dim_(config.entity_embed_dim) {
  if (num_labels < 2) throw ContractError("heads: label inventory needs at least two labels");
  const int extra = biaffine_bias ? 1 : 0;
  const int d_span = config.span_role_dim + extra + config.entity_embed_dim;
  const int d_label = config.label_role_dim + extra;
  const int d_ner = config.ner_role_dim + extra;
  indicator_table_ = &store.add("heads.entity_indicator", ad::glorot_uniform(2, config.entity_embed_dim, rng));
  w_span_ = &store.add("heads.w_span", ad::glorot_uniform(d_span, d_span, rng));
  w_label_ = &store.add("heads.w_label", stacked_glorot(num_labels, d_label, rng));
  w_ner_ = &store.add("heads.w_ner", stacked_glorot(2, d_ner, rng));
}

ad::Var Heads::augment(ad::Tape& tape, ad::Var x) const {
  if (!bias_) return x;
  return ad::concat_cols({x, tape.constant(ad::Matrix::Ones(x.rows(), 1))});
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Heads::span_vectors(int i, int j, const Roles& roles,
                                                                 int indicator) const {
  const int n = roles.num_tokens();
  if (i < 1 || j > n || i > j)
    throw ContractError("span_vectors: (" + std::to_string(i) + "," + std::to_string(j) +
                        ") is not in the upper triangle of a length-" + std::to_string(n) + " sentence");
  if (indicator != 0 && indicator != 1) throw ContractError("span_vectors: indicator must be 0 or 1");
  const Eigen::Index d = roles.span_l.cols();
  const Eigen::Index D = span_vector_dim();
  const Eigen::VectorXd e = indicator_table_->value.row(indicator).transpose();
  Eigen::VectorXd vl(D), vr(D);
  vl.head(d) = roles.span_l.value().row(i - 1).transpose();
  vr.head(d) = roles.span_r.value().row(j).transpose();
  if (bias_) {
    vl(d) = 1.0;
    vr(d) = 1.0;
  }
  vl.tail(entity_dim_) = e;
  vr.tail(entity_dim_) = e;
  return {vl, vr};
}

ad::Var Heads::score_all_spans(ad::Tape& tape, const Roles& roles, const Eigen::MatrixXi& indicators) const {
  const int n = roles.num_tokens();
  if (indicators.rows() != n || indicators.cols() != n)
    throw ShapeError("score_all_spans: indicator matrix " + std::to_string(indicators.rows()) + "x" +
                     std::to_string(indicators.cols()) + " for a length-" + std::to_string(n) + " sentence");
  ad::Var starts = augment(tape, ad::slice_rows(roles.span_l, 0, n));
  ad::Var ends = augment(tape, ad::slice_rows(roles.span_r, 1, n));
  const Eigen::Index d = starts.cols();
  const Eigen::Index e = entity_dim_;

  ad::Var w = tape.parameter(*w_span_);
  ad::Var table = tape.parameter(*indicator_table_);
  ad::Var role_rows = ad::slice_rows(w, 0, d);
  ad::Var entity_rows = ad::slice_rows(w, d, e);
  ad::Var w_rr = ad::slice_cols(role_rows, 0, d);
  ad::Var w_re = ad::slice_cols(role_rows, d, e);
  ad::Var w_er = ad::slice_cols(entity_rows, 0, d);
  ad::Var w_ee = ad::slice_cols(entity_rows, d, e);

  ad::Matrix upper = ad::Matrix::Zero(n, n);
  upper.triangularView<Eigen::Upper>().setOnes();
  ad::Var scores = ad::cmul(ad::matmul(ad::matmul(starts, w_rr), ad::transpose(ends)), tape.constant(upper));

  ad::Var ones_col = tape.constant(ad::Matrix::Ones(n, 1));
  ad::Var ones_row = tape.constant(ad::Matrix::Ones(1, n));
  for (int k = 0; k < 2; ++k) {
    ad::Matrix mask = ad::Matrix::Zero(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) mask(i, j) = (indicators(i, j) != 0) == (k == 1) ? 1.0 : 0.0;
    if (mask.isZero()) continue;
    ad::Var ek = ad::slice_rows(table, k, 1);
    ad::Var start_term = ad::matmul(starts, ad::matmul(w_re, ad::transpose(ek)));  // n x 1
    ad::Var end_term = ad::matmul(ad::matmul(ek, w_er), ad::transpose(ends));      // 1 x n
    ad::Var entity_term = ad::matmul(ad::matmul(ek, w_ee), ad::transpose(ek));     // 1 x 1
    ad::Var extra = ad::add(ad::add(ad::matmul(start_term, ones_row), ad::matmul(ones_col, end_term)),
                            ad::matmul(ones_col, ad::matmul(entity_term, ones_row)));
    scores = ad::add(scores, ad::cmul(extra, tape.constant(std::move(mask))));
  }
  return scores;
}

ad::Var Heads::label_scores(ad::Tape& tape, const Roles& roles, std::span<const Span> spans) const {
  std::vector<int> starts, ends;
  for (const Span& s : spans) {
    starts.push_back(s.i - 1);
    ends.push_back(s.j);
  }
  return ad::bilinear_multi_rows(augment(tape, ad::gather_rows(roles.label_l, starts)), tape.parameter(*w_label_),
                                 augment(tape, ad::gather_rows(roles.label_r, ends)));
}

ad::Var Heads::ner_scores(ad::Tape& tape, const Roles& roles, std::span<const Span> spans) const {
  std::vector<int> starts, ends;
  for (const Span& s : spans) {
    starts.push_back(s.i - 1);
    ends.push_back(s.j);
  }
  return ad::bilinear_multi_rows(augment(tape, ad::gather_rows(roles.entity_l, starts)), tape.parameter(*w_ner_),
                                 augment(tape, ad::gather_rows(roles.entity_r, ends)));
}

std::vector<Span> Heads::predict_entities(ad::Tape& tape, const Roles& roles, double threshold) const {
  const std::vector<Span> spans = upper_triangle_spans(roles.num_tokens());
  const ad::Matrix probs = ad::softmax_rows(ner_scores(tape, roles, spans).value());
  std::vector<Span> out;
  for (std::size_t k = 0; k < spans.size(); ++k)
    if (probs(static_cast<Eigen::Index>(k), 1) >= threshold) out.push_back(spans[k]);
  return out;
}

}  // namespace entichart
