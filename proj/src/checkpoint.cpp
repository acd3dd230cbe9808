// cidnst/checkpoint.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/checkpoint.hpp"

#include <limits>

#include "cidnst/bytes.hpp"
#include "cidnst/common.hpp"

namespace cidnst {

void SaveNamedTensors(const std::string& path, const std::string& magic,
                      const std::string& config_json,
                      const std::map<std::string, Tensor>& tensors) {
  if (magic.size() != 4) Fail(ErrorKind::kFormat, "checkpoint: bad magic");
  std::string out = magic;
  bytes::PutU32(&out, kCheckpointVersion);
  bytes::PutU32(&out, static_cast<uint32_t>(config_json.size()));
  out += config_json;
  bytes::PutU32(&out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<uint16_t>::max()) {
      Fail(ErrorKind::kFormat, "checkpoint: tensor name too long");
    }
    bytes::PutU16(&out, static_cast<uint16_t>(name.size()));
    out += name;
    bytes::PutU32(&out, static_cast<uint32_t>(t.Rank()));
    for (int d = 0; d < t.Rank(); d++) {
      bytes::PutU32(&out, static_cast<uint32_t>(t.Dim(d)));
    }
    for (double v : t.Vec()) bytes::PutF64(&out, v);
  }
  bytes::WriteAll(path, out);
}

NamedTensorFile LoadNamedTensors(const std::string& path,
                                 const std::string& magic) {
  bytes::ByteReader in(bytes::ReadAll(path), path);
  if (in.Str(4) != magic) {
    Fail(ErrorKind::kFormat, path + ": not a " + magic + " file");
  }
  uint32_t version = in.U32();
  if (version != kCheckpointVersion) {
    Fail(ErrorKind::kFormat,
         path + ": unsupported version " + std::to_string(version));
  }
  NamedTensorFile file;
  file.config_json = in.Str(in.U32());
  uint32_t count = in.U32();
  for (uint32_t i = 0; i < count; i++) {
    std::string name = in.Str(in.U16());
    if (file.tensors.count(name)) {
      Fail(ErrorKind::kFormat, path + ": duplicate tensor " + name);
    }
    uint32_t rank = in.U32();
    if (rank > 8) Fail(ErrorKind::kFormat, path + ": implausible rank");
    std::vector<int> dims(rank);
    size_t numel = 1;
    for (uint32_t d = 0; d < rank; d++) {
      uint32_t v = in.U32();
      if (v > (1u << 24)) Fail(ErrorKind::kFormat, path + ": implausible dim");
      dims[d] = static_cast<int>(v);
      numel *= v;
    }
    Tensor t(dims);
    for (size_t j = 0; j < numel; j++) t.At(j) = in.F64();
    if (!t.AllFinite()) {
      Fail(ErrorKind::kNumericFault, path + ": non-finite value in " + name);
    }
    file.tensors.emplace(std::move(name), std::move(t));
  }
  if (!in.AtEnd()) Fail(ErrorKind::kFormat, path + ": trailing bytes");
  return file;
}

void SaveModel(const std::string& path, const Model& m) {
  SaveNamedTensors(path, kModelMagic, m.Config().ToJson(), m.StateDict());
}

Model LoadModel(const std::string& path) {
  NamedTensorFile file = LoadNamedTensors(path, kModelMagic);
  Model m = Model::Shaped(ModelConfig::FromJson(file.config_json));
  m.LoadState(file.tensors);
  return m;
}

}  // namespace cidnst
