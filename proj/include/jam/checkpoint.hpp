#pragma once

#include "jam/tensor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace jam {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint layout (all little-endian):
///   "JAMC" | u32 version | u64 count |
///   count x ( u32 name_len | name bytes | u32 rank | rank x u64 extent | f64 values... )
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store);
/// Decodes into a standalone store (names/shapes from the file).
ParameterStore decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::string& path);

/// Copies values from `loaded` into `target`, which must hold exactly the same
/// names and shapes in the same order.
void assign_parameters(ParameterStore& target, const ParameterStore& loaded);

}  // namespace jam
