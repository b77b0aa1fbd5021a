#include "mcnet/model/minimal_rnn.hpp"

#include "mcnet/core/errors.hpp"

namespace mcnet {

std::string cell_prefix(Modality s, int layer) {
  return "rnn." + std::string(modality_name(s)) + ".l" + std::to_string(layer);
}

CellParams cell_params(const ParamAccess& p, const std::string& prefix) {
  return {p(prefix + ".w_x"), p(prefix + ".b_x"), p(prefix + ".w_h"), p(prefix + ".w_z")};
}

CellOutput cell_step(const Var& x, const Var& h_prev, const CellParams& cell) {
  if (x.cols() != cell.w_x.rows()) throw ContractViolation("cell_step: input width does not match w_x");
  if (h_prev.cols() != cell.w_h.rows() || h_prev.rows() != x.rows())
    throw ContractViolation("cell_step: hidden state shape mismatch");
  Var z = tanh(affine(x, cell.w_x, cell.b_x));
  Var g = sigmoid(matmul(h_prev, cell.w_h) + matmul(z, cell.w_z));
  Var h = hadamard(g, h_prev) + hadamard(one_minus(g), z);
  return {h, z};
}

std::vector<Var> stack_forward(const Var& u, std::span<const Var> h_prev, std::span<const CellParams> stack) {
  if (h_prev.size() != stack.size()) throw ContractViolation("stack_forward: one hidden state per layer required");
  std::vector<Var> out;
  out.reserve(stack.size());
  Var input = u;
  for (std::size_t k = 0; k < stack.size(); ++k) {
    out.push_back(cell_step(input, h_prev[k], stack[k]).h);
    input = out.back();
  }
  return out;
}

}  // namespace mcnet
