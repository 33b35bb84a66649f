#pragma once

#include "live/params.hpp"

#include <string>

namespace live {

// Named-tensor container, little-endian:
//
//   "LIVM" | u32 version=1 | u32 tensor_count
//   tensor_count x ( u32 name_len | name bytes | u8 partition
//                    | u32 rows | u32 cols | rows*cols f32 row-major )
//
// partition: 0 backbone, 1 fusion, 2 projection.
void save_checkpoint(const ParamSet<float>& params, const std::string& path);
ParamSet<float> load_checkpoint(const std::string& path);

std::string serialize_checkpoint(const ParamSet<float>& params);
ParamSet<float> deserialize_checkpoint(const std::string& bytes);

}  // namespace live
