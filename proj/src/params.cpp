#include "entichart/params.hpp"

#include "entichart/error.hpp"

#include <utility>

namespace entichart {

ad::Parameter& ParameterStore::add(std::string name, ad::Matrix init) {
  if (find(name) != nullptr) throw ContractError("parameter '" + name + "' registered twice");
  params_.push_back(std::make_unique<ad::Parameter>(std::move(name), std::move(init)));
  return *params_.back();
}

const ad::Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

ad::Parameter& ParameterStore::get(std::string_view name) {
  return const_cast<ad::Parameter&>(std::as_const(*this).get(name));
}

const ad::Parameter& ParameterStore::get(std::string_view name) const {
  const ad::Parameter* p = find(name);
  if (p == nullptr) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return *p;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace entichart
