#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>

#include "mcnet/core/parameter_store.hpp"

namespace mcnet {

/// Named-array container written by `train` and read by every command that
/// needs a model. Layout (all integers little-endian u32):
///
///   "MCNETCKP"                      8-byte magic
///   version                         currently 1
///   meta_len, meta bytes            UTF-8 "key=value\n" lines
///   count                           number of arrays
///   count x { name_len, name, rows, cols, rows*cols f64 LE, row-major }
///
/// Arrays are written in lexicographic name order, so identical contents give
/// byte-identical files.
struct Checkpoint {
  std::string metadata;
  std::map<std::string, Eigen::MatrixXd> arrays;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Copies every parameter value into `ckpt.arrays` under "param/<name>".
void store_to_checkpoint(const ParameterStore& store, Checkpoint& ckpt);
/// Overwrites the values of `store` from "param/<name>" arrays. Every store
/// entry must be present with a matching shape.
void checkpoint_to_store(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace mcnet
