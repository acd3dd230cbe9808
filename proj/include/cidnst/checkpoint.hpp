// cidnst/checkpoint.hpp  Binary containers for trained parameters. The model
// uses magic "CIDM" and the language model "CIDL"; both share one layout:
// magic, format version, config echo, then named tensors (name length and
// UTF-8 name, rank, dims as 32-bit little-endian, values as 64-bit
// little-endian floats). Round-trips are bit-exact.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_CHECKPOINT_HPP_
#define CIDNST_CHECKPOINT_HPP_

#include <map>
#include <string>

#include "cidnst/model.hpp"
#include "cidnst/tensor.hpp"

namespace cidnst {

inline constexpr char kModelMagic[] = "CIDM";
inline constexpr char kLmMagic[] = "CIDL";
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensorFile {
  std::string config_json;
  std::map<std::string, Tensor> tensors;
};

void SaveNamedTensors(const std::string& path, const std::string& magic,
                      const std::string& config_json,
                      const std::map<std::string, Tensor>& tensors);
NamedTensorFile LoadNamedTensors(const std::string& path,
                                 const std::string& magic);

// Model wrappers; loading validates names and shapes against the config echo.
void SaveModel(const std::string& path, const Model& m);
Model LoadModel(const std::string& path);

}  // namespace cidnst

#endif  // CIDNST_CHECKPOINT_HPP_
