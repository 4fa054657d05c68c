#include "entichart/checkpoint.hpp"
#include "entichart/error.hpp"
#include "entichart/training.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

using namespace entichart;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.encoder = EncoderConfig::desk();
  c.encoder.word_dim = 12;
  c.encoder.char_feature_dim = 6;
  c.encoder.recurrent_hidden = 10;
  c.encoder.layers = 2;
  c.encoder.span_role_dim = 10;
  c.encoder.label_role_dim = 8;
  c.encoder.entity_embed_dim = 4;
  c.encoder.ner_role_dim = 8;
  return c;
}

TrainConfig quick(int epochs) {
  TrainConfig t;
  t.max_epochs = epochs;
  t.patience = epochs;
  t.batch_size_tokens = 20;
  t.seed = 17;
  return t;
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(out, c);
  return out.str();
}

double total_loss(const Parser& p, const std::vector<SentenceRecord>& batch) {
  double sum = 0.0;
  for (const SentenceRecord& r : batch) {
    ad::Tape t;
    sum += p.loss(t, r, RunMode::eval()).total.scalar();
  }
  return sum;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  const TrainConfig c;
  CHECK(c.rate_at(0) == 0.001);
  CHECK(c.rate_at(99) == 0.001);
  CHECK(c.rate_at(100) == 0.001 * 0.999);
  CHECK(c.rate_at(250) == 0.001 * std::pow(0.999, 2.0));
  for (long k : {0L, 1L, 100L, 199L, 200L, 12345L}) CHECK(c.rate_at(k) == 0.001 * std::pow(0.999, std::floor(k / 100.0)));
}

TEST_CASE("train config validation and JSON") {
  TrainConfig c;
  c.batch_size_tokens = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = TrainConfig{};
  c.target_f1 = 0.9;
  const TrainConfig back = nlohmann::json(c).get<TrainConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"learning_rat":1})").get<TrainConfig>(), ContractError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"patience":-1})").get<TrainConfig>(), ContractError);
}

TEST_CASE("batches hold whole sentences within the token budget") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int count = 1 + static_cast<int>(rng() % 40);
    const int limit = 1 + static_cast<int>(rng() % 60);
    std::vector<int> lengths(static_cast<std::size_t>(count));
    for (int& l : lengths) l = 1 + static_cast<int>(rng() % 30);
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    const auto batches = make_batches(order, lengths, limit);
    std::vector<std::size_t> flat;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      REQUIRE_FALSE(batch.empty());
      int tokens = 0;
      for (std::size_t idx : batch) tokens += lengths[idx];
      CHECK((tokens <= limit || batch.size() == 1));
      // Greedy: the next batch's first sentence would not have fit.
      if (b + 1 < batches.size()) CHECK(tokens + lengths[batches[b + 1].front()] > limit);
      flat.insert(flat.end(), batch.begin(), batch.end());
    }
    CHECK(flat == order);
  }
}

TEST_CASE("Adam first step against a hand-computed update") {
  ParameterStore store;
  ad::Parameter& p = store.add("w", (ad::Matrix(1, 3) << 1.0, -2.0, 0.5).finished());
  p.grad = (ad::Matrix(1, 3) << 0.5, -4.0, 0.0).finished();
  Adam adam(0.9, 0.999, 1e-8);
  adam.step(store, 0.1);
  CHECK(adam.steps() == 1);
  // Bias-corrected moments are g and g^2, so each entry moves by lr * g / (|g| + eps).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(0, 1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(0, 2) == 0.5);
  CHECK(adam.first_moments().at("w")(0, 1) == doctest::Approx(-0.4));
  CHECK(adam.second_moments().at("w")(0, 1) == doctest::Approx(0.016));
}

TEST_CASE("global norm clipping") {
  ParameterStore store;
  store.add("a", ad::Matrix::Zero(1, 2)).grad = (ad::Matrix(1, 2) << 6.0, 0.0).finished();
  store.add("b", ad::Matrix::Zero(1, 1)).grad = (ad::Matrix(1, 1) << 8.0).finished();
  CHECK(clip_global_norm(store, 5.0) == doctest::Approx(10.0));
  CHECK(store.get("a").grad(0, 0) == doctest::Approx(3.0));
  CHECK(store.get("b").grad(0, 0) == doctest::Approx(4.0));
  CHECK(clip_global_norm(store, 5.0) == doctest::Approx(5.0));
  CHECK(store.get("b").grad(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("one update lowers the batch loss") {
  const auto corpus = synthetic::overfit_corpus(2, 4);
  ModelConfig mc = small_config();
  mc.encoder.dropout = 0.0;
  Parser p = Parser::from_corpus(corpus, mc, 3);
  const double before = total_loss(p, corpus);
  TrainConfig tc = quick(1);
  tc.batch_size_tokens = 1000;
  const TrainResult r = train(p, corpus, corpus, tc);
  CHECK(r.state.step == 1);
  CHECK(total_loss(p, corpus) < before);
}

TEST_CASE("training log and early stopping") {
  const auto corpus = synthetic::overfit_corpus(4, 8);
  Parser p = Parser::from_corpus(corpus, small_config(), 5);
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  TrainHooks hooks{[&](const StepLog& s) { steps.push_back(s); }, [&](const EpochLog& e) { epochs.push_back(e); }};
  TrainConfig tc = quick(6);
  tc.patience = 2;
  const TrainResult r = train(p, corpus, {}, tc, hooks);

  REQUIRE_FALSE(steps.empty());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    CHECK(steps[k].step == static_cast<long>(k));
    CHECK(steps[k].lr == tc.rate_at(steps[k].step));
    CHECK(steps[k].loss == doctest::Approx(steps[k].loss_span + steps[k].loss_label + steps[k].loss_entity));
  }
  CHECK(r.state.step == static_cast<long>(steps.size()));
  CHECK(epochs.size() == r.epochs.size());
  CHECK(epochs.size() <= 6);
  for (std::size_t e = 1; e < epochs.size(); ++e) CHECK(epochs[e].best_dev_f1 >= epochs[e - 1].best_dev_f1);
  CHECK(r.state.best_dev_f1 == epochs.back().best_dev_f1);
  // Stopping before max_epochs only happens after `patience` stale epochs.
  if (epochs.size() < 6) {
    const auto n = epochs.size();
    CHECK(epochs[n - 1].dev_f1 <= epochs[n - 3].best_dev_f1);
    CHECK(epochs[n - 2].dev_f1 <= epochs[n - 3].best_dev_f1);
  }
  // The parser is left holding the selected parameters.
  CHECK(evaluate(p, corpus, EntityMode::Gold).f1() == r.state.best_dev_f1);
}

TEST_CASE("training input contracts") {
  const auto corpus = synthetic::overfit_corpus(4, 2);
  Parser p = Parser::from_corpus(corpus, small_config(), 5);
  CHECK_THROWS_AS(train(p, {}, {}, quick(1)), ContractError);
  auto broken = corpus;
  broken.back().gold_tree.reset();
  CHECK_THROWS_AS(train(p, broken, {}, quick(1)), ContractError);
}

TEST_CASE("identical seeds give bit-identical checkpoints") {
  const auto corpus = synthetic::entity_corpus(6, 6);
  auto run = [&] {
    Parser p = Parser::from_corpus(corpus, small_config(), 7);
    const TrainConfig tc = quick(2);
    const TrainResult r = train(p, corpus, {}, tc);
    return bytes_of(make_checkpoint(p, &tc, &r.state));
  };
  const std::string a = run();
  CHECK(a == run());
}

TEST_CASE("checkpoint round trip") {
  const auto corpus = synthetic::entity_corpus(8, 5);
  Parser p = Parser::from_corpus(corpus, small_config(), 9);
  const TrainConfig tc = quick(1);
  const TrainResult r = train(p, corpus, {}, tc);
  const Checkpoint ckpt = make_checkpoint(p, &tc, &r.state);
  const std::string bytes = bytes_of(ckpt);
  CHECK(bytes.substr(0, 8) == "ENTICKPT");

  std::istringstream in(bytes);
  const Checkpoint back = read_checkpoint(in);
  CHECK(bytes_of(back) == bytes);
  const Parser q = parser_from_checkpoint(back);
  CHECK(q.labels() == p.labels());
  CHECK(q.encoder().words() == p.encoder().words());
  for (const SentenceRecord& rec : corpus)
    for (EntityMode m : {EntityMode::Gold, EntityMode::Predicted, EntityMode::None}) {
      CHECK(q.span_scores(rec.tokens, rec.entities, m) == p.span_scores(rec.tokens, rec.entities, m));
      CHECK(q.parse(rec.tokens, rec.entities, m) == p.parse(rec.tokens, rec.entities, m));
    }

  const TrainState s = train_state_from_checkpoint(back);
  CHECK(s.step == r.state.step);
  CHECK(s.epoch == 1);
  CHECK(s.adam_m.size() == p.params().size());
  CHECK(train_config_from_checkpoint(back)->batch_size_tokens == tc.batch_size_tokens);
  CHECK_FALSE(train_config_from_checkpoint(make_checkpoint(p)).has_value());

  // Resuming continues the step counter and epoch.
  Parser resumed = parser_from_checkpoint(back);
  TrainConfig more = tc;
  more.max_epochs = 2;
  const TrainResult r2 = train(resumed, corpus, {}, more, {}, &s);
  CHECK(r2.state.step == 2 * r.state.step);
  CHECK(r2.state.epoch == 2);
  CHECK(r2.epochs.size() == 1);
}

TEST_CASE("checkpoint load errors") {
  const auto corpus = synthetic::entity_corpus(8, 2);
  const Parser p = Parser::from_corpus(corpus, small_config(), 9);
  const std::string bytes = bytes_of(make_checkpoint(p));
  auto load = [](std::string b) {
    std::istringstream in(b);
    return read_checkpoint(in);
  };
  CHECK_THROWS_AS(load("NOTACKPT" + bytes.substr(8)), IoError);
  CHECK_THROWS_AS(load(bytes.substr(0, bytes.size() / 2)), IoError);
  std::string future = bytes;
  future[8] = 2;
  CHECK_THROWS_WITH_AS(load(future), doctest::Contains("version 2"), IoError);

  Checkpoint c = load(bytes);
  c.arrays.erase(c.arrays.begin());
  CHECK_THROWS_WITH_AS(parser_from_checkpoint(c), doctest::Contains("lacks parameter"), IoError);
  c = load(bytes);
  c.arrays.front().second = ad::Matrix::Zero(1, 1);
  CHECK_THROWS_AS(parser_from_checkpoint(c), IoError);
  c = load(bytes);
  c.trailer.erase("labels");
  CHECK_THROWS_AS(parser_from_checkpoint(c), IoError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), IoError);
}

TEST_CASE("evaluation") {
  const auto corpus = synthetic::entity_corpus(12, 9);
  std::vector<Tree> golds;
  std::vector<EntityRecord> with;
  for (const SentenceRecord& r : corpus) {
    golds.push_back(*r.gold_tree);
    with.emplace_back(*r.gold_tree, r.entities);
  }
  const EvalReport self = score_trees(corpus, golds);
  CHECK(self.f1() == 1.0);
  CHECK(self.precision() == 1.0);
  CHECK(self.entities.evr == evr(with).evr);
  // Every flat X phrase hides its right pair.
  CHECK(self.entities.num_v == 9);
  CHECK_THROWS_AS(score_trees(corpus, {}), ContractError);

  const Parser p = Parser::from_corpus(corpus, small_config(), 13);
  const std::vector<Tree> serial = parse_all(p, corpus, EntityMode::Predicted, 0.5, 1);
  CHECK(parse_all(p, corpus, EntityMode::Predicted, 0.5, 4) == serial);
  const EvalReport direct = evaluate(p, corpus, EntityMode::Predicted, 0.5, 3);
  const EvalReport via = score_trees(corpus, serial);
  CHECK(format_report_json(direct) == format_report_json(via));
}

TEST_CASE("worker count honours the environment") {
  ::setenv("ENTICHART_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("ENTICHART_THREADS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), ContractError);
  ::unsetenv("ENTICHART_THREADS");
  CHECK(worker_count() >= 1);
}
