#pragma once

#include "entichart/encoder.hpp"
#include "entichart/heads.hpp"
#include "entichart/params.hpp"
#include "entichart/treebank.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace entichart {

/// How gold trees are factored before training.
enum class SplitMode { Left, Right, Entity };

std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view s);

/// Factoring direction for one record: fixed, or the entity-compatible choice.
Direction split_direction(SplitMode mode, const Tree& tree, const std::vector<EntitySpan>& entities);

/// Gold tree in the form the chart scores: unaries merged down to the tokens,
/// then binarized. The result has exactly 2n-1 nodes, one per chart span.
Tree to_chart_tree(const Tree& gold, Direction direction);

/// Chart spans of a binary tree in preorder with their labels. Bare tokens
/// carry the factored label.
std::vector<LabeledSpan> chart_spans(const Tree& chart_tree);

/// Inverse of to_chart_tree for decoded trees: `shape` is a binary tree over
/// 1..n, `labels` gives the label of every node span.
Tree from_chart_tree(const Tree& shape, const std::vector<std::string>& tokens,
                     const std::function<std::string(Span)>& label_of);

/// Ordered label inventory; the factored label is always id 0.
class LabelSet {
 public:
  LabelSet();
  explicit LabelSet(const std::vector<std::string>& labels);

  static LabelSet from_trees(const std::vector<Tree>& chart_trees);

  int id(const std::string& label) const;  ///< ContractError when absent
  const std::string& str(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& strings() const { return labels_; }
  bool operator==(const LabelSet& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  EncoderConfig encoder;
  bool biaffine_bias = false;
  /// Feed gold entity indicators to the span scorer during training.
  bool entity_indicators = true;
  /// Train the NER head jointly.
  bool ner = true;
  SplitMode split = SplitMode::Entity;
  /// Inference defaults.
  EntityMode entity_mode = EntityMode::Gold;
  double threshold = 0.5;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Tape variables for one sentence's training objective.
struct SentenceLoss {
  ad::Var span, label, entity, total;
};

/// Encoder plus heads with the vocabularies and label inventory they were
/// sized for. Parameters are owned by the internal store.
class Parser {
 public:
  Parser(ModelConfig config, Vocab words, Vocab chars, LabelSet labels, std::uint64_t seed);

  /// Vocabularies and labels from a training corpus.
  static Parser from_corpus(const std::vector<SentenceRecord>& corpus, const ModelConfig& config,
                            std::uint64_t seed);

  Parser(Parser&&) noexcept = default;
  Parser& operator=(Parser&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const Encoder& encoder() const { return *encoder_; }
  Encoder& encoder() { return *encoder_; }
  const Heads& heads() const { return *heads_; }
  Heads& heads() { return *heads_; }
  const LabelSet& labels() const { return labels_; }
  ParameterStore& params() { return *store_; }
  const ParameterStore& params() const { return *store_; }

  /// Shared encoder pass: one boundary matrix feeds every head.
  Roles encode(ad::Tape& tape, const std::vector<std::string>& tokens, RunMode mode) const;

  /// Objective for one record with a gold tree.
  SentenceLoss loss(ad::Tape& tape, const SentenceRecord& record, RunMode mode) const;

  /// Indicators the span scorer sees for a sentence under `mode`.
  Eigen::MatrixXi indicators(ad::Tape& tape, const Roles& roles, const std::vector<EntitySpan>& entities,
                             EntityMode mode, double threshold) const;

  /// n x n span scores for a sentence (dropout off).
  Eigen::MatrixXd span_scores(const std::vector<std::string>& tokens, const std::vector<EntitySpan>& entities,
                              EntityMode mode, double threshold = 0.5) const;

  /// Full decode: chart, CKY, argmax labels, debinarize, expand unaries.
  Tree parse(const std::vector<std::string>& tokens, const std::vector<EntitySpan>& entities, EntityMode mode,
             double threshold = 0.5) const;

 private:
  ModelConfig config_;
  LabelSet labels_;
  std::unique_ptr<ParameterStore> store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Heads> heads_;
};

}  // namespace entichart
