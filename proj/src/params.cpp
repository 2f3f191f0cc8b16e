#include "graphvec/params.hpp"

#include "graphvec/errors.hpp"

namespace graphvec {

int ParamSet::add(const std::string& name, const Matrix& value, double lr_override,
                  bool decay) {
  if (index_of(name) >= 0) throw ContractError("ParamSet: duplicate parameter '" + name + "'");
  if (!value.allFinite())
    throw NumericError("ParamSet: nonfinite initial value for '" + name + "'");
  params_.push_back(Param{name, value, lr_override, decay});
  return static_cast<int>(params_.size()) - 1;
}

int ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

Param& ParamSet::at(int index) {
  if (index < 0 || index >= size()) throw ContractError("ParamSet: index out of range");
  return params_[static_cast<std::size_t>(index)];
}

const Param& ParamSet::at(int index) const {
  if (index < 0 || index >= size()) throw ContractError("ParamSet: index out of range");
  return params_[static_cast<std::size_t>(index)];
}

Param& ParamSet::by_name(const std::string& name) {
  const int idx = index_of(name);
  if (idx < 0) throw ContractError("ParamSet: unknown parameter '" + name + "'");
  return at(idx);
}

std::vector<ad::Var> ParamSet::bind(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.input(p.value));
  return vars;
}

}  // namespace graphvec
