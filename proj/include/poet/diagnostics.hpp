#pragma once

#include <string>
#include <vector>

#include "poet/nn.hpp"

namespace poet::diagnostics {

struct LayerCheck {
  std::string name;
  double max_rel_err = 0;
  int seeds = 0;
  bool pass = false;  // max_rel_err <= 1e-4
};

// Central finite-difference checks for every layer plus the full model loss
// on a two-example batch, `seeds_per_layer` random shapes each, 64-bit.
std::vector<LayerCheck> gradcheck_suite(int seeds_per_layer, uint64_t seed);

}  // namespace poet::diagnostics
