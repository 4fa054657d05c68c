#include "entichart/model.hpp"

#include "entichart/chart.hpp"
#include "entichart/error.hpp"
#include "entichart/ops.hpp"

#include <map>

namespace entichart {

std::string_view to_string(SplitMode m) {
  switch (m) {
    case SplitMode::Left: return "left";
    case SplitMode::Right: return "right";
    case SplitMode::Entity: return "entity";
  }
  return "left";
}

SplitMode parse_split_mode(std::string_view s) {
  if (s == "left") return SplitMode::Left;
  if (s == "right") return SplitMode::Right;
  if (s == "entity") return SplitMode::Entity;
  throw ContractError("unknown split mode '" + std::string(s) + "' (expected left|right|entity)");
}

Direction split_direction(SplitMode mode, const Tree& tree, const std::vector<EntitySpan>& entities) {
  switch (mode) {
    case SplitMode::Left: return Direction::Left;
    case SplitMode::Right: return Direction::Right;
    case SplitMode::Entity: return choose_split(tree, entities);
  }
  return Direction::Left;
}

Tree to_chart_tree(const Tree& gold, Direction direction) {
  return binarize(collapse_unaries(gold, UnaryPolicy::MergePreterminals), direction);
}

std::vector<LabeledSpan> chart_spans(const Tree& chart_tree) {
  std::vector<LabeledSpan> spans = constituent_spans(chart_tree);
  for (LabeledSpan& s : spans)
    if (s.label.empty()) s.label = std::string(kFactoredLabel);
  return spans;
}

namespace {

Tree rebuild(const Tree& shape, const std::vector<std::string>& tokens,
             const std::function<std::string(Span)>& label_of) {
  const Span sp = shape.span();
  std::string label = label_of(sp);
  if (sp.i == sp.j) {
    Tree leaf = Tree::leaf(tokens.at(static_cast<std::size_t>(sp.i - 1)), sp.i);
    if (label == kFactoredLabel) return leaf;
    std::vector<Tree> kids;
    kids.push_back(std::move(leaf));
    return Tree::node(std::move(label), std::move(kids));
  }
  std::vector<Tree> kids;
  for (const Tree& c : shape.children) kids.push_back(rebuild(c, tokens, label_of));
  return Tree::node(std::move(label), std::move(kids));
}

}  // namespace

Tree from_chart_tree(const Tree& shape, const std::vector<std::string>& tokens,
                     const std::function<std::string(Span)>& label_of) {
  if (shape.span() != Span{1, static_cast<int>(tokens.size())})
    throw ContractError("from_chart_tree: tree does not cover the " + std::to_string(tokens.size()) + " tokens");
  return expand_unaries(debinarize(rebuild(shape, tokens, label_of)));
}

LabelSet::LabelSet() : LabelSet(std::vector<std::string>{}) {}

LabelSet::LabelSet(const std::vector<std::string>& labels) {
  labels_.emplace_back(kFactoredLabel);
  index_.emplace(labels_.front(), 0);
  for (const std::string& l : labels) {
    if (index_.contains(l)) continue;
    index_.emplace(l, static_cast<int>(labels_.size()));
    labels_.push_back(l);
  }
}

LabelSet LabelSet::from_trees(const std::vector<Tree>& chart_trees) {
  std::map<std::string, long> counts;
  for (const Tree& t : chart_trees)
    for (const LabeledSpan& s : chart_spans(t)) ++counts[s.label];
  counts.erase(std::string(kFactoredLabel));
  std::vector<std::string> labels;
  for (const auto& [l, c] : counts) labels.push_back(l);
  LabelSet out(labels);
  // Two labels keep the label head well-formed even for a one-label corpus.
  if (out.size() < 2) out = LabelSet({"X"});
  return out;
}

int LabelSet::id(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw ContractError("label '" + label + "' is not in the inventory");
  return it->second;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (threshold < 0.0) throw ContractError("model config: threshold must be non-negative");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"encoder", c.encoder},
                     {"biaffine_bias", c.biaffine_bias},
                     {"entity_indicators", c.entity_indicators},
                     {"ner", c.ner},
                     {"split", std::string(to_string(c.split))},
                     {"entity_mode", std::string(to_string(c.entity_mode))},
                     {"threshold", c.threshold}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ContractError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "encoder") {
      if (value.is_string()) {
        if (value == "desk") c.encoder = EncoderConfig::desk();
        else if (value == "default") c.encoder = EncoderConfig{};
        else throw ContractError("model config: unknown encoder preset " + value.dump());
      } else {
        value.get_to(c.encoder);
      }
    } else if (key == "biaffine_bias") c.biaffine_bias = value.get<bool>();
    else if (key == "entity_indicators") c.entity_indicators = value.get<bool>();
    else if (key == "ner") c.ner = value.get<bool>();
    else if (key == "split") c.split = parse_split_mode(value.get<std::string>());
    else if (key == "entity_mode") c.entity_mode = parse_entity_mode(value.get<std::string>());
    else if (key == "threshold") c.threshold = value.get<double>();
    else throw ContractError("model config: unknown key '" + key + "'");
  }
  c.validate();
}

Parser::Parser(ModelConfig config, Vocab words, Vocab chars, LabelSet labels, std::uint64_t seed)
    : config_(std::move(config)), labels_(std::move(labels)), store_(std::make_unique<ParameterStore>()) {
  config_.validate();
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<Encoder>(config_.encoder, words, chars, *store_, rng);
  heads_ = std::make_unique<Heads>(config_.encoder, labels_.size(), config_.biaffine_bias, *store_, rng);
}

Parser Parser::from_corpus(const std::vector<SentenceRecord>& corpus, const ModelConfig& config,
                           std::uint64_t seed) {
  std::map<std::string, long> words, chars;
  std::vector<Tree> chart_trees;
  for (const SentenceRecord& r : corpus) {
    for (const std::string& tok : r.tokens) {
      ++words[tok];
      for (const std::string& ch : utf8_chars(tok)) ++chars[ch];
    }
    if (r.gold_tree)
      chart_trees.push_back(to_chart_tree(*r.gold_tree, split_direction(config.split, *r.gold_tree, r.entities)));
  }
  return Parser(config, Vocab::build(words), Vocab::build(chars), LabelSet::from_trees(chart_trees), seed);
}

Roles Parser::encode(ad::Tape& tape, const std::vector<std::string>& tokens, RunMode mode) const {
  const Contextual ctx = encoder_->contextualize(tape, encoder_->embed_tokens(tape, tokens, mode), mode);
  return encoder_->role_project(tape, ctx.boundaries, mode);
}

SentenceLoss Parser::loss(ad::Tape& tape, const SentenceRecord& record, RunMode mode) const {
  if (!record.gold_tree) throw ContractError("training record has no gold tree");
  const Tree& gold = *record.gold_tree;
  const int n = static_cast<int>(record.tokens.size());
  const Tree target = to_chart_tree(gold, split_direction(config_.split, gold, record.entities));

  const Roles roles = encode(tape, record.tokens, mode);
  const Eigen::MatrixXi ind = config_.entity_indicators ? indicator_matrix(n, record.entities)
                                                        : Eigen::MatrixXi::Zero(n, n);
  SentenceLoss out;
  out.span = chart::span_loss(heads_->score_all_spans(tape, roles, ind), target);

  std::vector<Span> spans;
  std::vector<int> gold_labels;
  for (const LabeledSpan& s : chart_spans(target)) {
    spans.push_back(s.span);
    gold_labels.push_back(labels_.id(s.label));
  }
  out.label = chart::label_loss(heads_->label_scores(tape, roles, spans), gold_labels);

  if (config_.ner) {
    const std::vector<Span> all = upper_triangle_spans(n);
    std::vector<int> targets;
    targets.reserve(all.size());
    for (const Span& s : all) targets.push_back(entity_indicator(s, record.entities));
    out.entity = chart::ner_loss(heads_->ner_scores(tape, roles, all), targets);
  } else {
    out.entity = tape.constant(ad::Matrix::Zero(1, 1));
  }
  out.total = chart::total_loss(out.span, out.label, out.entity);
  return out;
}

Eigen::MatrixXi Parser::indicators(ad::Tape& tape, const Roles& roles, const std::vector<EntitySpan>& entities,
                                   EntityMode mode, double threshold) const {
  const int n = roles.num_tokens();
  switch (mode) {
    case EntityMode::Gold: return indicator_matrix(n, entities);
    case EntityMode::Predicted: {
      const std::vector<Span> found = heads_->predict_entities(tape, roles, threshold);
      return indicator_matrix(n, found);
    }
    case EntityMode::None: break;
  }
  return Eigen::MatrixXi::Zero(n, n);
}

Eigen::MatrixXd Parser::span_scores(const std::vector<std::string>& tokens, const std::vector<EntitySpan>& entities,
                                    EntityMode mode, double threshold) const {
  ad::Tape tape;
  const Roles roles = encode(tape, tokens, RunMode::eval());
  return heads_->score_all_spans(tape, roles, indicators(tape, roles, entities, mode, threshold)).value();
}

Tree Parser::parse(const std::vector<std::string>& tokens, const std::vector<EntitySpan>& entities, EntityMode mode,
                   double threshold) const {
  if (tokens.empty()) throw ContractError("parse: empty sentence");
  const int n = static_cast<int>(tokens.size());
  ad::Tape tape;
  const Roles roles = encode(tape, tokens, RunMode::eval());
  const Chart scores(heads_->score_all_spans(tape, roles, indicators(tape, roles, entities, mode, threshold)).value());
  const Tree shape = cky_decode(scores);

  std::vector<Span> spans;
  for (const LabeledSpan& s : constituent_spans(shape)) spans.push_back(s.span);
  const ad::Matrix logits = heads_->label_scores(tape, roles, spans).value();
  std::map<Span, std::string> chosen;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto row = logits.row(static_cast<Eigen::Index>(k));
    const bool root = spans[k] == Span{1, n};
    Eigen::Index best = root ? 1 : 0;
    for (Eigen::Index c = best + 1; c < row.size(); ++c)
      if (row(c) > row(best)) best = c;
    chosen.emplace(spans[k], labels_.str(static_cast<int>(best)));
  }
  return from_chart_tree(shape, tokens, [&](Span s) { return chosen.at(s); });
}

}  // namespace entichart
