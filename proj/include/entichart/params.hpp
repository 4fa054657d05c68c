#pragma once

#include "entichart/tape.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace entichart {

/// Owns every trainable array of a model in registration order. Parameter
/// addresses are stable for the lifetime of the store, including across moves.
class ParameterStore {
 public:
  ad::Parameter& add(std::string name, ad::Matrix init);

  ad::Parameter& get(std::string_view name);
  const ad::Parameter& get(std::string_view name) const;
  const ad::Parameter* find(std::string_view name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

 private:
  std::vector<std::unique_ptr<ad::Parameter>> params_;
};

}  // namespace entichart
