#pragma once

#include "entichart/params.hpp"
#include "entichart/tape.hpp"

#include <json.hpp>

#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace entichart {

struct EncoderConfig {
  int word_dim = 300;
  int char_feature_dim = 100;
  int recurrent_hidden = 400;  ///< per direction
  int layers = 3;
  int span_role_dim = 450;
  int label_role_dim = 100;
  int entity_embed_dim = 50;
  int ner_role_dim = 150;
  double dropout = 0.33;

  /// Small dimensions for CPU experiments and tests.
  static EncoderConfig desk();

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
/// Rejects unknown keys and non-positive sizes.
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// String-to-id map with ids dense from 0 and fixed reserved entries.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr std::string_view kReserved[] = {"<unk>", "<bos>", "<eos>"};

  Vocab();

  /// Ids assigned by descending frequency, ties broken lexicographically.
  static Vocab build(const std::map<std::string, long>& counts);
  static Vocab from_strings(std::vector<std::string> strings, std::vector<long> counts);

  int id(std::string_view s) const;  ///< kUnk when absent
  bool contains(std::string_view s) const { return index_.contains(std::string(s)); }
  const std::string& str(int id) const { return strings_.at(static_cast<std::size_t>(id)); }
  long count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(strings_.size()); }
  const std::vector<std::string>& strings() const { return strings_; }
  const std::vector<long>& counts() const { return counts_; }

  bool operator==(const Vocab& o) const { return strings_ == o.strings_ && counts_ == o.counts_; }

 private:
  std::vector<std::string> strings_;
  std::vector<long> counts_;
  std::map<std::string, int> index_;
};

/// Splits UTF-8 text into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view s);

/// Per-call settings: dropout and UNK replacement only happen in training.
struct RunMode {
  bool train = false;
  std::mt19937_64* rng = nullptr;

  static RunMode eval() { return {}; }
  static RunMode training(std::mt19937_64& r) { return {true, &r}; }
};

struct Contextual {
  ad::Var forward;     ///< (n+2) x H forward states over BOS, tokens, EOS
  ad::Var backward;    ///< (n+2) x H backward states
  ad::Var boundaries;  ///< (n+1) x 2H; row k = [f_k ; b_{k+1}], the fence before token k+1
};

/// Role vectors for every boundary row. A span (i,j) reads its left roles at
/// row i-1 and its right roles at row j.
struct Roles {
  ad::Var span_l, span_r;
  ad::Var label_l, label_r;
  ad::Var entity_l, entity_r;
  /// The boundary matrix every role was projected from.
  ad::Var source;

  int num_tokens() const { return static_cast<int>(span_l.rows()) - 1; }
};

/// Word + character embeddings, stacked bidirectional LSTM, fencepost
/// boundaries and six single-hidden-layer role projections.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, const Vocab& words, const Vocab& chars, ParameterStore& store,
          std::mt19937_64& init_rng);

  const EncoderConfig& config() const { return config_; }
  const Vocab& words() const { return words_; }
  const Vocab& chars() const { return chars_; }

  /// n x (word_dim + char_feature_dim).
  ad::Var embed_tokens(ad::Tape& tape, const std::vector<std::string>& tokens, RunMode mode) const;
  /// Pads X with BOS/EOS rows and runs the recurrent stack.
  Contextual contextualize(ad::Tape& tape, ad::Var x, RunMode mode) const;
  Roles role_project(ad::Tape& tape, ad::Var boundaries, RunMode mode) const;

  /// Overwrites word embedding rows from whitespace-separated "token v1 ... vD"
  /// lines. Returns the number of rows replaced; a width other than word_dim
  /// raises IoError.
  int load_word_vectors(const std::string& path);

 private:
  struct Lstm {
    ad::Parameter* w_in;      // in x 4H
    ad::Parameter* w_hidden;  // H x 4H
    ad::Parameter* bias;      // 1 x 4H
  };
  struct Mlp {
    ad::Parameter* weight;
    ad::Parameter* bias;
  };

  Lstm make_lstm(ParameterStore& store, const std::string& name, int in, int hidden, std::mt19937_64& rng);
  Mlp make_mlp(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);

  /// Hidden states of one direction, one row per input row.
  ad::Var run_lstm(ad::Tape& tape, const Lstm& cell, ad::Var x, bool reverse) const;
  ad::Var char_feature(ad::Tape& tape, const std::string& token, bool sentinel, int sentinel_id) const;
  ad::Var apply_mlp(ad::Tape& tape, const Mlp& mlp, ad::Var x, RunMode mode) const;

  EncoderConfig config_;
  Vocab words_;
  Vocab chars_;
  ad::Parameter* word_embedding_;
  ad::Parameter* char_embedding_;
  Lstm char_fwd_, char_bwd_;
  Mlp char_proj_;
  std::vector<Lstm> fwd_layers_, bwd_layers_;
  Mlp span_l_, span_r_, label_l_, label_r_, entity_l_, entity_r_;
};

}  // namespace entichart
