#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcnet/data/cohort.hpp"
#include "mcnet/model/config.hpp"

namespace mcnet {

/// Parameters of one MinimalRNN cell as tape leaves.
struct CellParams {
  Var w_x;  // D_in x D'
  Var b_x;  // 1 x D'
  Var w_h;  // D' x D'
  Var w_z;  // D' x D'
};

/// Leaves for "<prefix>.{w_x,b_x,w_h,w_z}".
CellParams cell_params(const ParamAccess& p, const std::string& prefix);

/// "rnn.<modality>.l<k>"
std::string cell_prefix(Modality s, int layer);

struct CellOutput {
  Var h;
  Var z;
};

/// z = tanh(x W_x + b_x); g = sigmoid(h_prev W_h + z W_z);
/// h = g * h_prev + (1 - g) * z. Rows are independent subjects.
CellOutput cell_step(const Var& x, const Var& h_prev, const CellParams& cell);

/// Advances a stack one time step. Layer 0 reads `u`; layer k reads layer
/// k-1's new state. Returns the new state of every layer, bottom first.
std::vector<Var> stack_forward(const Var& u, std::span<const Var> h_prev, std::span<const CellParams> stack);

}  // namespace mcnet
