#pragma once

#include "entichart/encoder.hpp"
#include "entichart/params.hpp"
#include "entichart/treebank.hpp"

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace entichart {

/// Where inference-time entity indicators come from.
enum class EntityMode { Gold, Predicted, None };

std::string_view to_string(EntityMode m);
EntityMode parse_entity_mode(std::string_view s);

/// 1 iff the span equals some entity's span; entity types are ignored.
int entity_indicator(Span span, const std::vector<EntitySpan>& entities);

/// n x n 0/1 matrix, entry (i-1, j-1) set for every listed span.
Eigen::MatrixXi indicator_matrix(int n, std::span<const Span> spans);
Eigen::MatrixXi indicator_matrix(int n, const std::vector<EntitySpan>& entities);

/// Every (i,j) with 1 <= i <= j <= n, sorted by (i,j).
std::vector<Span> upper_triangle_spans(int n);

/// Entity-aware span scorer, label scorer and binary NER scorer.
///
/// A span (i,j) with indicator e is scored as v_l(i,j)ᵀ W_span v_r(i,j) where
/// v_l(i,j) = [span_l(i-1); E(e)] and v_r(i,j) = [span_r(j); E(e)]. The
/// vectors are never materialized for the whole chart; W_span is split into
/// role and entity blocks and the entity terms are added per indicator value.
class Heads {
 public:
  Heads(const EncoderConfig& config, int num_labels, bool biaffine_bias, ParameterStore& store,
        std::mt19937_64& init_rng);

  int num_labels() const { return num_labels_; }
  bool biaffine_bias() const { return bias_; }
  /// Width D of v_l and v_r.
  int span_vector_dim() const { return static_cast<int>(w_span_->value.rows()); }

  /// Values of v_l(i,j) and v_r(i,j). Throws ContractError below the diagonal.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> span_vectors(int i, int j, const Roles& roles, int indicator) const;

  /// n x n variable; entry (i-1, j-1) = s(i,j) on the upper triangle, zero below.
  ad::Var score_all_spans(ad::Tape& tape, const Roles& roles, const Eigen::MatrixXi& indicators) const;
  /// m x c label logits for the listed spans.
  ad::Var label_scores(ad::Tape& tape, const Roles& roles, std::span<const Span> spans) const;
  /// m x 2 NER logits; column 1 is "entity".
  ad::Var ner_scores(ad::Tape& tape, const Roles& roles, std::span<const Span> spans) const;

  /// All spans with P(entity) >= threshold, sorted by (i,j).
  std::vector<Span> predict_entities(ad::Tape& tape, const Roles& roles, double threshold = 0.5) const;

  ad::Parameter& indicator_table() { return *indicator_table_; }
  ad::Parameter& w_span() { return *w_span_; }
  ad::Parameter& w_label() { return *w_label_; }
  ad::Parameter& w_ner() { return *w_ner_; }

 private:
  ad::Var augment(ad::Tape& tape, ad::Var x) const;

  int num_labels_;
  bool bias_;
  int entity_dim_;
  ad::Parameter* indicator_table_;
  ad::Parameter* w_span_;
  ad::Parameter* w_label_;
  ad::Parameter* w_ner_;
};

}  // namespace entichart
