#pragma once

#include <string>
#include <vector>

#include "graphvec/tape.hpp"

namespace graphvec {

// Flat registry of learnable matrices.  Registration order is canonical: the
// same model configuration always registers the same names in the same order,
// so checkpoints can restore by name and optimizer state can key by index.
struct Param {
  std::string name;
  Matrix value;
  double lr_override = -1.0;  // < 0: use the optimizer's global learning rate
  bool decay = true;          // participates in decoupled weight decay
};

class ParamSet {
 public:
  int add(const std::string& name, const Matrix& value, double lr_override = -1.0,
          bool decay = true);

  int index_of(const std::string& name) const;  // -1 when absent
  Param& at(int index);
  const Param& at(int index) const;
  Param& by_name(const std::string& name);  // ContractError when absent
  int size() const { return static_cast<int>(params_.size()); }

  // Registers every value as a tape input, in index order.
  std::vector<ad::Var> bind(ad::Tape& tape) const;

 private:
  std::vector<Param> params_;
};

}  // namespace graphvec
