#pragma once

#include "nimp/nn.hpp"

#include <filesystem>
#include <iosfwd>

namespace nimp {

/// Binary checkpoint layout (all integers and floats little-endian):
///
///   "NIMLP1"                      6-byte magic
///   u8   activation               0 = relu, 1 = sigmoid, 2 = linear
///   u32  layer count L            entries of layer_sizes, input and output included
///   u32  layer_sizes[L]
///   u8   batch-norm flag          1 if hidden layers carry batch-norm vectors
///   for each of the L-1 parameter blocks:
///     f64 weights[fan_in * fan_out]   row-major
///     f64 bias[fan_out]
///     if flag and block is hidden: f64 gamma, beta, running_mean, running_var [fan_out each]
void write_checkpoint(std::ostream& out, const MlpModel& model);
MlpModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nimp
