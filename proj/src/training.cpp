#include "entichart/training.hpp"

#include "entichart/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace entichart {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("train config: learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw ContractError("train config: decay_factor must be positive");
  if (decay_every_steps <= 0) throw ContractError("train config: decay_every_steps must be positive");
  if (batch_size_tokens <= 0) throw ContractError("train config: batch_size_tokens must be positive");
  if (max_epochs <= 0) throw ContractError("train config: max_epochs must be positive");
  if (patience <= 0) throw ContractError("train config: patience must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("train config: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("train config: epsilon must be positive");
  if (!(clip_norm > 0.0)) throw ContractError("train config: clip_norm must be positive");
}

double TrainConfig::rate_at(long step) const {
  return learning_rate * std::pow(decay_factor, static_cast<double>(step / decay_every_steps));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"decay_factor", c.decay_factor},
                     {"decay_every_steps", c.decay_every_steps},
                     {"batch_size_tokens", c.batch_size_tokens},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"seed", c.seed},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"epsilon", c.epsilon},
                     {"clip_norm", c.clip_norm}};
  if (c.target_f1) j["target_f1"] = *c.target_f1;
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ContractError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "decay_factor") c.decay_factor = value.get<double>();
    else if (key == "decay_every_steps") c.decay_every_steps = value.get<int>();
    else if (key == "batch_size_tokens") c.batch_size_tokens = value.get<int>();
    else if (key == "max_epochs") c.max_epochs = value.get<int>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "beta1") c.beta1 = value.get<double>();
    else if (key == "beta2") c.beta2 = value.get<double>();
    else if (key == "epsilon") c.epsilon = value.get<double>();
    else if (key == "clip_norm") c.clip_norm = value.get<double>();
    else if (key == "target_f1") {
      if (value.is_null()) c.target_f1.reset();
      else c.target_f1 = value.get<double>();
    } else throw ContractError("train config: unknown key '" + key + "'");
  }
  c.validate();
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   const std::vector<int>& lengths, int max_tokens) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  long tokens = 0;
  for (std::size_t idx : order) {
    const int len = lengths.at(idx);
    if (!cur.empty() && tokens + len > max_tokens) {
      out.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
    cur.push_back(idx);
    tokens += len;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Adam::Adam(double beta1, double beta2, double epsilon) : beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(ParameterStore& store, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : store) {
    auto [mi, fresh_m] = m_.try_emplace(p->name, ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    auto [vi, fresh_v] = v_.try_emplace(p->name, ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    ad::Matrix& m = mi->second;
    ad::Matrix& v = vi->second;
    m = beta1_ * m + (1.0 - beta1_) * p->grad;
    v = beta2_ * v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : store) p->grad *= scale;
  }
  return norm;
}

namespace {

using Snapshot = std::vector<ad::Matrix>;

Snapshot snapshot(const ParameterStore& store) {
  Snapshot s;
  for (const auto& p : store) s.push_back(p->value);
  return s;
}

void restore(ParameterStore& store, const Snapshot& s) {
  std::size_t k = 0;
  for (auto& p : store) p->value = s[k++];
}

EntityMode selection_mode(const ModelConfig& c) {
  return c.entity_indicators ? c.entity_mode : EntityMode::None;
}

}  // namespace

TrainResult train(Parser& parser, const std::vector<SentenceRecord>& train_set,
                  const std::vector<SentenceRecord>& dev_set, const TrainConfig& config, const TrainHooks& hooks,
                  const TrainState* resume) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training corpus");
  for (std::size_t k = 0; k < train_set.size(); ++k) {
    if (!train_set[k].gold_tree)
      throw ContractError("train: record " + std::to_string(k + 1) + " has no gold tree");
    train_set[k].validate();
  }
  const std::vector<SentenceRecord>& select_on = dev_set.empty() ? train_set : dev_set;
  ParameterStore& store = parser.params();

  TrainResult result;
  if (resume) result.state = *resume;
  TrainState& state = result.state;
  Adam adam(config.beta1, config.beta2, config.epsilon);
  adam.first_moments() = state.adam_m;
  adam.second_moments() = state.adam_v;
  adam.set_steps(state.step);

  std::vector<int> lengths;
  for (const SentenceRecord& r : train_set) lengths.push_back(static_cast<int>(r.tokens.size()));

  Snapshot best = snapshot(store);
  int stale = 0;
  for (int epoch = state.epoch; epoch < config.max_epochs; ++epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    for (const auto& batch : make_batches(order, lengths, config.batch_size_tokens)) {
      store.zero_grad();
      StepLog log{state.step, config.rate_at(state.step), 0.0, 0.0, 0.0, 0.0};
      for (std::size_t idx : batch) {
        ad::Tape tape;
        const SentenceLoss l = parser.loss(tape, train_set[idx], RunMode::training(rng));
        tape.backward(l.total);
        log.loss_span += l.span.scalar();
        log.loss_label += l.label.scalar();
        log.loss_entity += l.entity.scalar();
        log.loss += l.total.scalar();
      }
      clip_global_norm(store, config.clip_norm);
      adam.step(store, log.lr);
      ++state.step;
      if (hooks.on_step) hooks.on_step(log);
    }

    const double f1 = evaluate(parser, select_on, selection_mode(parser.config()), parser.config().threshold).f1();
    if (f1 > state.best_dev_f1) {
      state.best_dev_f1 = f1;
      best = snapshot(store);
      stale = 0;
    } else {
      ++stale;
    }
    state.epoch = epoch + 1;
    result.epochs.push_back({epoch, f1, state.best_dev_f1});
    if (hooks.on_epoch) hooks.on_epoch(result.epochs.back());
    if (config.target_f1 && state.best_dev_f1 >= *config.target_f1) break;
    if (stale >= config.patience) break;
  }
  restore(store, best);
  state.adam_m = adam.first_moments();
  state.adam_v = adam.second_moments();
  return result;
}

int worker_count() {
  if (const char* env = std::getenv("ENTICHART_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v <= 0) throw ContractError(std::string("ENTICHART_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Tree> parse_all(const Parser& parser, const std::vector<SentenceRecord>& records, EntityMode mode,
                            double threshold, int threads) {
  std::vector<Tree> out(records.size());
  const int workers = std::min<int>(threads > 0 ? threads : worker_count(), static_cast<int>(records.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t k = next++; k < records.size(); k = next++) {
      try {
        out[k] = parser.parse(records[k].tokens, records[k].entities, mode, threshold);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport score_trees(const std::vector<SentenceRecord>& records, const std::vector<Tree>& predicted) {
  if (records.size() != predicted.size())
    throw ContractError("score_trees: " + std::to_string(records.size()) + " records but " +
                        std::to_string(predicted.size()) + " trees");
  std::vector<Tree> golds;
  std::vector<EntityRecord> with_entities;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (!records[k].gold_tree) throw ContractError("evaluate: record " + std::to_string(k + 1) + " has no gold tree");
    golds.push_back(*records[k].gold_tree);
    with_entities.emplace_back(predicted[k], records[k].entities);
  }
  EvalReport report;
  report.brackets = bracket_prf(golds, predicted);
  report.entities = evr(with_entities);
  return report;
}

EvalReport evaluate(const Parser& parser, const std::vector<SentenceRecord>& records, EntityMode mode,
                    double threshold, int threads) {
  return score_trees(records, parse_all(parser, records, mode, threshold, threads));
}

}  // namespace entichart
