#pragma once

#include "entichart/model.hpp"
#include "entichart/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace entichart {

// Layout, all integers little-endian:
//   8 bytes   magic "ENTICKPT"
//   u32       format version
//   u64       number of arrays
//   per array: u32 name length, name bytes (UTF-8), u32 rank, rank x u64 dims,
//              prod(dims) x f64 values in row-major order
//   u64       trailer length, then that many bytes of JSON
// Model parameters use their registry names; Adam moments are stored as
// "adam.m.<name>" and "adam.v.<name>".
inline constexpr char kCheckpointMagic[8] = {'E', 'N', 'T', 'I', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, ad::Matrix>> arrays;
  nlohmann::json trailer = nlohmann::json::object();

  const ad::Matrix* find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Parameters, vocabularies, labels and configs; optionally the training
/// configuration and optimizer position.
Checkpoint make_checkpoint(const Parser& parser, const TrainConfig* config = nullptr,
                           const TrainState* state = nullptr);

/// Rebuilds a parser whose inference matches the saved one bit for bit.
Parser parser_from_checkpoint(const Checkpoint& ckpt);
std::optional<TrainConfig> train_config_from_checkpoint(const Checkpoint& ckpt);
TrainState train_state_from_checkpoint(const Checkpoint& ckpt);

}  // namespace entichart
