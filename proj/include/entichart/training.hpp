#pragma once

#include "entichart/metrics.hpp"
#include "entichart/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace entichart {

struct TrainConfig {
  double learning_rate = 0.001;
  double decay_factor = 0.999;
  int decay_every_steps = 100;
  int batch_size_tokens = 1000;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 1;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  /// Stop as soon as dev F1 reaches this value.
  std::optional<double> target_f1;

  void validate() const;
  /// Learning rate in effect after `step` updates.
  double rate_at(long step) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Groups `order` into consecutive batches of whole sentences whose token
/// total stays within `max_tokens`; an oversized sentence forms its own batch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   const std::vector<int>& lengths, int max_tokens);

/// Adam with first and second moments kept per parameter name.
class Adam {
 public:
  Adam(double beta1, double beta2, double epsilon);

  /// Applies one update from the gradients currently in `store`.
  void step(ParameterStore& store, double learning_rate);

  long steps() const { return t_; }
  std::map<std::string, ad::Matrix>& first_moments() { return m_; }
  std::map<std::string, ad::Matrix>& second_moments() { return v_; }
  const std::map<std::string, ad::Matrix>& first_moments() const { return m_; }
  const std::map<std::string, ad::Matrix>& second_moments() const { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, ad::Matrix> m_, v_;
};

/// Rescales every gradient so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(ParameterStore& store, double max_norm);

struct StepLog {
  long step;
  double lr;
  double loss_span, loss_label, loss_entity, loss;
};

struct EpochLog {
  int epoch;
  double dev_f1;
  double best_dev_f1;
};

/// Optimizer position carried across a resume.
struct TrainState {
  long step = 0;
  int epoch = 0;
  double best_dev_f1 = -1.0;
  std::map<std::string, ad::Matrix> adam_m, adam_v;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> epochs;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains `parser` in place and leaves it holding the best-dev parameters.
/// With an empty dev set the training set is used for selection.
TrainResult train(Parser& parser, const std::vector<SentenceRecord>& train_set,
                  const std::vector<SentenceRecord>& dev_set, const TrainConfig& config,
                  const TrainHooks& hooks = {}, const TrainState* resume = nullptr);

/// Worker count for per-sentence parallel loops: ENTICHART_THREADS when set,
/// else the hardware concurrency.
int worker_count();

/// Decodes every record, keeping input order.
std::vector<Tree> parse_all(const Parser& parser, const std::vector<SentenceRecord>& records, EntityMode mode,
                            double threshold = 0.5, int threads = 0);

/// Bracket scores and EVR of the parser's trees against gold trees, with the
/// records' entities as the EVR reference.
EvalReport evaluate(const Parser& parser, const std::vector<SentenceRecord>& records, EntityMode mode,
                    double threshold = 0.5, int threads = 0);

/// Scores given predicted trees against the records.
EvalReport score_trees(const std::vector<SentenceRecord>& records, const std::vector<Tree>& predicted);

}  // namespace entichart
