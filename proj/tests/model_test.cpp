#include "entichart/chart.hpp"
#include "entichart/error.hpp"
#include "entichart/model.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace entichart;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.encoder = EncoderConfig::desk();
  c.encoder.word_dim = 8;
  c.encoder.char_feature_dim = 4;
  c.encoder.recurrent_hidden = 6;
  c.encoder.layers = 1;
  c.encoder.span_role_dim = 5;
  c.encoder.label_role_dim = 4;
  c.encoder.entity_embed_dim = 3;
  c.encoder.ner_role_dim = 4;
  return c;
}

Tree relabel(const Tree& chart_tree) {
  std::map<Span, std::string> labels;
  for (const LabeledSpan& s : chart_spans(chart_tree)) labels.emplace(s.span, s.label);
  return from_chart_tree(chart_tree, chart_tree.tokens(), [&](Span s) { return labels.at(s); });
}

}  // namespace

TEST_CASE("chart trees have one node per chart span and invert exactly") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Tree t = fixtures::random_tree(rng);
    for (Direction d : {Direction::Left, Direction::Right}) {
      const Tree c = to_chart_tree(t, d);
      CHECK(is_binary(c));
      const auto spans = chart_spans(c);
      CHECK(static_cast<int>(spans.size()) == 2 * t.num_tokens() - 1);
      for (const LabeledSpan& s : spans) CHECK_FALSE(s.label.empty());
      CHECK(relabel(c) == t);
    }
  }
  for (const std::string& text : fixtures::fixture_trees()) {
    const Tree t = parse_bracketed(text);
    CHECK(serialize_bracketed(relabel(to_chart_tree(t, Direction::Right))) == serialize_bracketed(t));
  }
}

TEST_CASE("bare tokens become factored chart spans and come back bare") {
  const Tree t = parse_bracketed("(S (NP the cat) (VP sat))");
  const Tree c = to_chart_tree(t, Direction::Left);
  const auto spans = chart_spans(c);
  CHECK(spans.size() == 5);
  CHECK(std::count_if(spans.begin(), spans.end(), [](const LabeledSpan& s) { return s.label == kFactoredLabel; }) == 2);
  CHECK(serialize_bracketed(relabel(c)) == "(S (NP the cat) (VP sat))");
}

TEST_CASE("single-token sentences map to one merged preterminal") {
  const Tree t = parse_bracketed("(S (VP (VB go)))");
  const Tree c = to_chart_tree(t, Direction::Left);
  REQUIRE(chart_spans(c).size() == 1);
  CHECK(chart_spans(c).front().label == "S+VP+VB");
  CHECK(relabel(c) == t);
}

TEST_CASE("label inventory") {
  const LabelSet empty;
  CHECK(empty.size() == 1);
  CHECK(empty.str(0) == kFactoredLabel);
  const LabelSet ls({"NP", "VP", "NP"});
  CHECK(ls.size() == 3);
  CHECK(ls.id("VP") == 2);
  CHECK(ls.id(std::string(kFactoredLabel)) == 0);
  CHECK_THROWS_AS(ls.id("PP"), ContractError);

  const Tree only = parse_bracketed("(X (Y a) (Y b))");
  const LabelSet from = LabelSet::from_trees({to_chart_tree(only, Direction::Left)});
  CHECK(from.strings() == std::vector<std::string>{std::string(kFactoredLabel), "X", "Y"});
}

TEST_CASE("split modes") {
  const Tree t = parse_bracketed("(A (B b) (C c) (D d))");
  const std::vector<EntitySpan> es{{{2, 3}, "ORG"}};
  CHECK(split_direction(SplitMode::Left, t, es) == Direction::Left);
  CHECK(split_direction(SplitMode::Right, t, {}) == Direction::Right);
  CHECK(split_direction(SplitMode::Entity, t, es) == Direction::Right);
  CHECK(split_direction(SplitMode::Entity, t, {}) == Direction::Left);
  for (SplitMode m : {SplitMode::Left, SplitMode::Right, SplitMode::Entity}) CHECK(parse_split_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_split_mode("middle"), ContractError);
}

TEST_CASE("model config JSON") {
  ModelConfig c = tiny_config();
  c.split = SplitMode::Right;
  c.ner = false;
  c.entity_mode = EntityMode::Predicted;
  const ModelConfig back = nlohmann::json(c).get<ModelConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  CHECK(nlohmann::json::parse(R"({"encoder":"desk"})").get<ModelConfig>().encoder.word_dim == 50);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"encoder":"huge"})").get<ModelConfig>(), ContractError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"dropuot":0.1})").get<ModelConfig>(), ContractError);
}

TEST_CASE("parser decodes well-formed trees over the input tokens") {
  const auto corpus = synthetic::overfit_corpus(3, 6);
  const Parser p = Parser::from_corpus(corpus, tiny_config(), 5);
  CHECK(p.labels().str(0) == kFactoredLabel);
  for (const SentenceRecord& r : corpus)
    for (EntityMode m : {EntityMode::Gold, EntityMode::Predicted, EntityMode::None}) {
      const Tree t = p.parse(r.tokens, r.entities, m);
      CHECK(t.tokens() == r.tokens);
      CHECK(parse_bracketed(serialize_bracketed(t)) == t);
      CHECK_FALSE(t.is_leaf());
    }
  const Tree one = p.parse({"zzz"}, {}, EntityMode::None);
  CHECK(one.tokens() == std::vector<std::string>{"zzz"});
  CHECK(one.label != kFactoredLabel);
  CHECK_THROWS_AS(p.parse({}, {}, EntityMode::None), ContractError);
}

TEST_CASE("no-entity mode equals a model with tied indicator rows") {
  const auto corpus = synthetic::entity_corpus(4, 4);
  Parser p = Parser::from_corpus(corpus, tiny_config(), 6);
  const SentenceRecord& r = corpus.front();
  const Eigen::MatrixXd gold = p.span_scores(r.tokens, r.entities, EntityMode::Gold);
  const Eigen::MatrixXd none = p.span_scores(r.tokens, r.entities, EntityMode::None);
  CHECK((gold - none).cwiseAbs().maxCoeff() > 1e-6);

  ad::Matrix& table = p.heads().indicator_table().value;
  table.row(1) = table.row(0);
  const Eigen::MatrixXd tied = p.span_scores(r.tokens, r.entities, EntityMode::Gold);
  CHECK((tied - none).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(p.parse(r.tokens, r.entities, EntityMode::Gold) == p.parse(r.tokens, r.entities, EntityMode::None));
}

TEST_CASE("sentence loss components") {
  const auto corpus = synthetic::overfit_corpus(8, 4);
  ModelConfig cfg = tiny_config();
  const Parser p = Parser::from_corpus(corpus, cfg, 9);
  for (const SentenceRecord& r : corpus) {
    ad::Tape t;
    const SentenceLoss l = p.loss(t, r, RunMode::eval());
    CHECK(l.span.scalar() >= 0.0);
    CHECK(l.label.scalar() > 0.0);
    CHECK(l.entity.scalar() > 0.0);
    CHECK(l.total.scalar() == doctest::Approx(l.span.scalar() + l.label.scalar() + l.entity.scalar()).epsilon(1e-14));
  }
  cfg.ner = false;
  const Parser q = Parser::from_corpus(corpus, cfg, 9);
  ad::Tape t;
  CHECK(q.loss(t, corpus.front(), RunMode::eval()).entity.scalar() == 0.0);

  SentenceRecord bare = corpus.front();
  bare.gold_tree.reset();
  CHECK_THROWS_AS(p.loss(t, bare, RunMode::eval()), ContractError);
}

TEST_CASE("full objective gradients pass finite differences") {
  const auto corpus = synthetic::entity_corpus(10, 3);
  ModelConfig cfg = tiny_config();
  cfg.encoder.dropout = 0.0;
  Parser p = Parser::from_corpus(corpus, cfg, 11);
  const SentenceRecord& r = corpus.front();
  auto loss = [&](ad::Tape& t) { return p.loss(t, r, RunMode::eval()).total; };
  for (const char* name : {"heads.w_span", "heads.entity_indicator", "heads.w_label", "heads.w_ner",
                           "encoder.lstm0.fwd.w_hidden", "encoder.mlp_span_l.weight", "encoder.word_embedding"})
    CHECK_MESSAGE(testutil::max_param_fd_error(p.params().get(name), loss, 24) <= 1e-4, name);
}
