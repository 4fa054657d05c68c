#include "entichart/encoder.hpp"

#include "entichart/error.hpp"
#include "entichart/init.hpp"
#include "entichart/ops.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace entichart {

EncoderConfig EncoderConfig::desk() {
  EncoderConfig c;
  c.word_dim = 50;
  c.char_feature_dim = 20;
  c.recurrent_hidden = 64;
  c.layers = 3;
  c.span_role_dim = 64;
  c.label_role_dim = 32;
  c.entity_embed_dim = 8;
  c.ner_role_dim = 32;
  return c;
}

void EncoderConfig::validate() const {
  for (int v : {word_dim, char_feature_dim, recurrent_hidden, layers, span_role_dim, label_role_dim, entity_embed_dim,
                ner_role_dim})
    if (v <= 0) throw ContractError("encoder config: every dimension must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("encoder config: dropout must be in [0, 1)");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"word_dim", c.word_dim},
                     {"char_feature_dim", c.char_feature_dim},
                     {"recurrent_hidden", c.recurrent_hidden},
                     {"layers", c.layers},
                     {"span_role_dim", c.span_role_dim},
                     {"label_role_dim", c.label_role_dim},
                     {"entity_embed_dim", c.entity_embed_dim},
                     {"ner_role_dim", c.ner_role_dim},
                     {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  if (!j.is_object()) throw ContractError("encoder config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "word_dim") c.word_dim = value.get<int>();
    else if (key == "char_feature_dim") c.char_feature_dim = value.get<int>();
    else if (key == "recurrent_hidden") c.recurrent_hidden = value.get<int>();
    else if (key == "layers") c.layers = value.get<int>();
    else if (key == "span_role_dim") c.span_role_dim = value.get<int>();
    else if (key == "label_role_dim") c.label_role_dim = value.get<int>();
    else if (key == "entity_embed_dim") c.entity_embed_dim = value.get<int>();
    else if (key == "ner_role_dim") c.ner_role_dim = value.get<int>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else throw ContractError("encoder config: unknown key '" + key + "'");
  }
  c.validate();
}

Vocab::Vocab() {
  for (std::string_view r : kReserved) {
    index_.emplace(std::string(r), static_cast<int>(strings_.size()));
    strings_.emplace_back(r);
    counts_.push_back(0);
  }
}

Vocab Vocab::build(const std::map<std::string, long>& counts) {
  std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> strings;
  std::vector<long> cs;
  for (auto& [s, c] : items) {
    strings.push_back(s);
    cs.push_back(c);
  }
  return from_strings(std::move(strings), std::move(cs));
}

Vocab Vocab::from_strings(std::vector<std::string> strings, std::vector<long> counts) {
  if (strings.size() != counts.size()) throw ContractError("vocab: strings and counts differ in length");
  Vocab v;
  for (std::size_t k = 0; k < strings.size(); ++k) {
    if (v.index_.contains(strings[k])) continue;
    v.index_.emplace(strings[k], static_cast<int>(v.strings_.size()));
    v.strings_.push_back(std::move(strings[k]));
    v.counts_.push_back(counts[k]);
  }
  return v;
}

int Vocab::id(std::string_view s) const {
  auto it = index_.find(std::string(s));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t k = 0;
  while (k < s.size()) {
    const auto lead = static_cast<unsigned char>(s[k]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (k + len > s.size()) len = 1;
    out.emplace_back(s.substr(k, len));
    k += len;
  }
  return out;
}

Encoder::Lstm Encoder::make_lstm(ParameterStore& store, const std::string& name, int in, int hidden,
                                 std::mt19937_64& rng) {
  return {&store.add(name + ".w_in", ad::glorot_uniform(in, 4 * hidden, rng)),
          &store.add(name + ".w_hidden", ad::glorot_uniform(hidden, 4 * hidden, rng)),
          &store.add(name + ".bias", ad::Matrix::Zero(1, 4 * hidden))};
}

Encoder::Mlp Encoder::make_mlp(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
  return {&store.add(name + ".weight", ad::glorot_uniform(in, out, rng)),
          &store.add(name + ".bias", ad::Matrix::Zero(1, out))};
}

Encoder::Encoder(const EncoderConfig& config, const Vocab& words, const Vocab& chars, ParameterStore& store,
                 std::mt19937_64& rng)
    : config_(config), words_(words), chars_(chars) {
  config_.validate();
  const int cf = config_.char_feature_dim;
  const int h = config_.recurrent_hidden;
  word_embedding_ = &store.add("encoder.word_embedding", ad::glorot_uniform(words_.size(), config_.word_dim, rng));
  char_embedding_ = &store.add("encoder.char_embedding", ad::glorot_uniform(chars_.size(), cf, rng));
  char_fwd_ = make_lstm(store, "encoder.char_lstm.fwd", cf, cf, rng);
  char_bwd_ = make_lstm(store, "encoder.char_lstm.bwd", cf, cf, rng);
  char_proj_ = make_mlp(store, "encoder.char_proj", 2 * cf, cf, rng);
  int in = config_.word_dim + cf;
  for (int l = 0; l < config_.layers; ++l) {
    fwd_layers_.push_back(make_lstm(store, "encoder.lstm" + std::to_string(l) + ".fwd", in, h, rng));
    bwd_layers_.push_back(make_lstm(store, "encoder.lstm" + std::to_string(l) + ".bwd", in, h, rng));
    in = 2 * h;
  }
  span_l_ = make_mlp(store, "encoder.mlp_span_l", 2 * h, config_.span_role_dim, rng);
  span_r_ = make_mlp(store, "encoder.mlp_span_r", 2 * h, config_.span_role_dim, rng);
  label_l_ = make_mlp(store, "encoder.mlp_label_l", 2 * h, config_.label_role_dim, rng);
  label_r_ = make_mlp(store, "encoder.mlp_label_r", 2 * h, config_.label_role_dim, rng);
  entity_l_ = make_mlp(store, "encoder.mlp_entity_l", 2 * h, config_.ner_role_dim, rng);
  entity_r_ = make_mlp(store, "encoder.mlp_entity_r", 2 * h, config_.ner_role_dim, rng);
}

ad::Var Encoder::run_lstm(ad::Tape& tape, const Lstm& cell, ad::Var x, bool reverse) const {
  const int steps = static_cast<int>(x.rows());
  const Eigen::Index hidden = cell.w_hidden->value.rows();
  ad::Var w_hidden = tape.parameter(*cell.w_hidden);
  ad::Var projected = ad::add_row(ad::matmul(x, tape.parameter(*cell.w_in)), tape.parameter(*cell.bias));

  std::vector<ad::Var> states(static_cast<std::size_t>(steps));
  ad::Var h, c;
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    ad::Var pre = ad::slice_rows(projected, t, 1);
    if (s > 0) pre = ad::add(pre, ad::matmul(h, w_hidden));
    // Gate layout: input, forget, output (sigmoid) then candidate (tanh).
    ad::Var gates = ad::sigmoid(ad::slice_cols(pre, 0, 3 * hidden));
    ad::Var candidate = ad::tanh(ad::slice_cols(pre, 3 * hidden, hidden));
    ad::Var fresh = ad::cmul(ad::slice_cols(gates, 0, hidden), candidate);
    c = s > 0 ? ad::add(fresh, ad::cmul(ad::slice_cols(gates, hidden, hidden), c)) : fresh;
    h = ad::cmul(ad::slice_cols(gates, 2 * hidden, hidden), ad::tanh(c));
    states[static_cast<std::size_t>(t)] = h;
  }
  return ad::concat_rows(states);
}

ad::Var Encoder::char_feature(ad::Tape& tape, const std::string& token, bool sentinel, int sentinel_id) const {
  std::vector<int> ids;
  if (sentinel) {
    ids.push_back(sentinel_id);
  } else {
    for (const std::string& ch : utf8_chars(token)) ids.push_back(chars_.id(ch));
    if (ids.empty()) ids.push_back(Vocab::kUnk);
  }
  ad::Var emb = ad::gather_rows(tape.parameter(*char_embedding_), ids);
  const auto last = static_cast<Eigen::Index>(ids.size()) - 1;
  ad::Var fwd = ad::slice_rows(run_lstm(tape, char_fwd_, emb, false), last, 1);
  ad::Var bwd = ad::slice_rows(run_lstm(tape, char_bwd_, emb, true), 0, 1);
  return ad::add_row(ad::matmul(ad::concat_cols({fwd, bwd}), tape.parameter(*char_proj_.weight)),
                     tape.parameter(*char_proj_.bias));
}

ad::Var Encoder::embed_tokens(ad::Tape& tape, const std::vector<std::string>& tokens, RunMode mode) const {
  if (tokens.empty()) throw ContractError("embed_tokens: empty sentence");
  std::vector<int> word_ids;
  word_ids.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    int id = words_.id(tok);
    if (mode.train && id != Vocab::kUnk && words_.count(id) < 2 && std::bernoulli_distribution(0.5)(*mode.rng))
      id = Vocab::kUnk;
    word_ids.push_back(id);
  }
  ad::Var words = ad::gather_rows(tape.parameter(*word_embedding_), word_ids);

  std::unordered_map<std::string, ad::Var> cache;
  std::vector<ad::Var> feats;
  for (const std::string& tok : tokens) {
    auto it = cache.find(tok);
    if (it == cache.end()) it = cache.emplace(tok, char_feature(tape, tok, false, 0)).first;
    feats.push_back(it->second);
  }
  ad::Var x = ad::concat_cols({words, ad::concat_rows(feats)});
  if (mode.train) x = ad::dropout(x, config_.dropout, *mode.rng);
  return x;
}

Contextual Encoder::contextualize(ad::Tape& tape, ad::Var x, RunMode mode) const {
  if (x.cols() != config_.word_dim + config_.char_feature_dim)
    throw ShapeError("contextualize: expected " + std::to_string(config_.word_dim + config_.char_feature_dim) +
                     " columns, got " + std::to_string(x.cols()));
  const int n = static_cast<int>(x.rows());
  ad::Var table = tape.parameter(*word_embedding_);
  const std::vector<int> bos{Vocab::kBos}, eos{Vocab::kEos};
  ad::Var bos_row = ad::concat_cols({ad::gather_rows(table, bos), char_feature(tape, "", true, Vocab::kBos)});
  ad::Var eos_row = ad::concat_cols({ad::gather_rows(table, eos), char_feature(tape, "", true, Vocab::kEos)});
  ad::Var input = ad::concat_rows({bos_row, x, eos_row});

  ad::Var f, b;
  for (int l = 0; l < config_.layers; ++l) {
    if (l > 0) {
      input = ad::concat_cols({f, b});
      if (mode.train) input = ad::dropout(input, config_.dropout, *mode.rng);
    }
    f = run_lstm(tape, fwd_layers_[static_cast<std::size_t>(l)], input, false);
    b = run_lstm(tape, bwd_layers_[static_cast<std::size_t>(l)], input, true);
  }
  ad::Var h = ad::concat_cols({ad::slice_rows(f, 0, n + 1), ad::slice_rows(b, 1, n + 1)});
  return {f, b, h};
}

ad::Var Encoder::apply_mlp(ad::Tape& tape, const Mlp& mlp, ad::Var x, RunMode mode) const {
  ad::Var y = ad::tanh(ad::add_row(ad::matmul(x, tape.parameter(*mlp.weight)), tape.parameter(*mlp.bias)));
  if (mode.train) y = ad::dropout(y, config_.dropout, *mode.rng);
  return y;
}

Roles Encoder::role_project(ad::Tape& tape, ad::Var boundaries, RunMode mode) const {
  if (boundaries.cols() != 2 * config_.recurrent_hidden)
    throw ShapeError("role_project: expected " + std::to_string(2 * config_.recurrent_hidden) + " columns, got " +
                     std::to_string(boundaries.cols()));
  return {apply_mlp(tape, span_l_, boundaries, mode),   apply_mlp(tape, span_r_, boundaries, mode),
          apply_mlp(tape, label_l_, boundaries, mode),  apply_mlp(tape, label_r_, boundaries, mode),
          apply_mlp(tape, entity_l_, boundaries, mode), apply_mlp(tape, entity_r_, boundaries, mode),
          boundaries};
}

int Encoder::load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vectors '" + path + "'");
  std::string line;
  int replaced = 0;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != config_.word_dim)
      throw IoError(path + ":" + std::to_string(lineno) + ": vector width " + std::to_string(values.size()) +
                    " does not match word_dim " + std::to_string(config_.word_dim));
    if (!words_.contains(token)) continue;
    const int id = words_.id(token);
    for (int k = 0; k < config_.word_dim; ++k) word_embedding_->value(id, k) = values[static_cast<std::size_t>(k)];
    ++replaced;
  }
  return replaced;
}

}  // namespace entichart
