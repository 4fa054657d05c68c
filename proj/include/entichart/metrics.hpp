#pragma once

#include "entichart/treebank.hpp"

#include <string>
#include <utility>
#include <vector>

namespace entichart {

struct BracketScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long matched = 0;
  long gold_total = 0;
  long pred_total = 0;
};

/// Labeled internal spans a tree contributes to bracket scoring: every
/// non-root internal node that is not a POS tag.
std::vector<LabeledSpan> scored_brackets(const Tree& tree);

/// Corpus-level labeled bracket P/R/F1 (counts summed before dividing). Trees
/// must be debinarized and unary-expanded. Empty denominators give 0.
BracketScore bracket_prf(const std::vector<Tree>& golds, const std::vector<Tree>& preds);

struct EvrResult {
  double evr = 0.0;  ///< num_v / num_s, may exceed 1
  long num_v = 0;
  long num_s = 0;
  /// Secondary column: fraction of sentences with at least one violation.
  long violating_sentences = 0;
  double sentence_rate = 0.0;
  /// Diagnostic column: entities crossing some bracket.
  long num_crossing = 0;
};

using EntityRecord = std::pair<Tree, std::vector<EntitySpan>>;

/// Entity Violating Rate over a corpus. Throws ContractError when empty.
EvrResult evr(const std::vector<EntityRecord>& records);

struct EvalReport {
  BracketScore brackets;
  EvrResult entities;

  double precision() const { return brackets.precision; }
  double recall() const { return brackets.recall; }
  double f1() const { return brackets.f1; }
  double evr_percent() const { return 100.0 * entities.evr; }
};

/// Two-decimal percentage, e.g. 0.0264 -> "2.64".
std::string format_percent(double fraction);

/// Aligned two-line text table.
std::string format_report_text(const EvalReport& report);
/// {precision, recall, f1, evr_percent, num_v, num_s, ...} on one line.
std::string format_report_json(const EvalReport& report);

}  // namespace entichart
