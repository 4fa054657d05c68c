#include "entichart/checkpoint.hpp"

#include "entichart/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace entichart {
namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  out.write(b, 8);
}

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IoError(std::string("checkpoint truncated while reading ") + what);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

nlohmann::json vocab_json(const Vocab& v) {
  return {{"strings", v.strings()}, {"counts", v.counts()}};
}

Vocab vocab_from(const nlohmann::json& j) {
  return Vocab::from_strings(j.at("strings").get<std::vector<std::string>>(), j.at("counts").get<std::vector<long>>());
}

}  // namespace

const ad::Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return &m;
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, ckpt.arrays.size());
  for (const auto& [name, m] : ckpt.arrays) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
  }
  const std::string trailer = ckpt.trailer.dump();
  put_u64(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  read_exact(in, magic, sizeof magic, "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw IoError("not a checkpoint file (bad magic)");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCheckpointVersion)
    throw IoError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  Checkpoint ckpt;
  const std::uint64_t count = get_u64(in, "array count");
  for (std::uint64_t a = 0; a < count; ++a) {
    const std::uint32_t len = get_u32(in, "name length");
    std::string name(len, '\0');
    read_exact(in, name.data(), len, "array name");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank > 2) throw IoError("checkpoint array '" + name + "' has rank " + std::to_string(rank));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) dims[rank == 1 ? 1 : r] = get_u64(in, "dims");
    ad::Matrix m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_u64(in, "values"));
    ckpt.arrays.emplace_back(std::move(name), std::move(m));
  }
  const std::uint64_t len = get_u64(in, "trailer length");
  std::string trailer(len, '\0');
  read_exact(in, trailer.data(), len, "trailer");
  try {
    ckpt.trailer = nlohmann::json::parse(trailer);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint trailer is not valid JSON: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

Checkpoint make_checkpoint(const Parser& parser, const TrainConfig* config, const TrainState* state) {
  Checkpoint ckpt;
  for (const auto& p : parser.params()) ckpt.arrays.emplace_back(p->name, p->value);
  ckpt.trailer["model"] = parser.config();
  ckpt.trailer["words"] = vocab_json(parser.encoder().words());
  ckpt.trailer["chars"] = vocab_json(parser.encoder().chars());
  ckpt.trailer["labels"] = parser.labels().strings();
  if (config) ckpt.trailer["train"] = *config;
  if (state) {
    ckpt.trailer["state"] = {{"step", state->step}, {"epoch", state->epoch}, {"best_dev_f1", state->best_dev_f1}};
    for (const auto& [name, m] : state->adam_m) ckpt.arrays.emplace_back("adam.m." + name, m);
    for (const auto& [name, v] : state->adam_v) ckpt.arrays.emplace_back("adam.v." + name, v);
  }
  return ckpt;
}

Parser parser_from_checkpoint(const Checkpoint& ckpt) {
  const nlohmann::json& t = ckpt.trailer;
  for (const char* key : {"model", "words", "chars", "labels"})
    if (!t.contains(key)) throw IoError(std::string("checkpoint trailer lacks '") + key + "'");
  ModelConfig config;
  std::vector<std::string> labels;
  Vocab words, chars;
  try {
    config = t.at("model").get<ModelConfig>();
    words = vocab_from(t.at("words"));
    chars = vocab_from(t.at("chars"));
    labels = t.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint trailer is malformed: ") + e.what());
  }
  if (labels.empty() || labels.front() != kFactoredLabel) throw IoError("checkpoint label inventory is malformed");
  labels.erase(labels.begin());
  Parser parser(config, std::move(words), std::move(chars), LabelSet(labels), 0);
  for (auto& p : parser.params()) {
    const ad::Matrix* m = ckpt.find(p->name);
    if (m == nullptr) throw IoError("checkpoint lacks parameter '" + p->name + "'");
    if (m->rows() != p->value.rows() || m->cols() != p->value.cols())
      throw IoError("checkpoint parameter '" + p->name + "' is " + std::to_string(m->rows()) + "x" +
                    std::to_string(m->cols()) + ", model expects " + std::to_string(p->value.rows()) + "x" +
                    std::to_string(p->value.cols()));
    p->value = *m;
  }
  return parser;
}

std::optional<TrainConfig> train_config_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.trailer.contains("train")) return std::nullopt;
  return ckpt.trailer.at("train").get<TrainConfig>();
}

TrainState train_state_from_checkpoint(const Checkpoint& ckpt) {
  TrainState s;
  if (ckpt.trailer.contains("state")) {
    const nlohmann::json& j = ckpt.trailer.at("state");
    s.step = j.at("step").get<long>();
    s.epoch = j.at("epoch").get<int>();
    s.best_dev_f1 = j.at("best_dev_f1").get<double>();
  }
  for (const auto& [name, m] : ckpt.arrays) {
    if (name.starts_with("adam.m.")) s.adam_m.emplace(name.substr(7), m);
    else if (name.starts_with("adam.v.")) s.adam_v.emplace(name.substr(7), m);
  }
  return s;
}

}  // namespace entichart
