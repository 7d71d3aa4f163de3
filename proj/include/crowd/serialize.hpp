#pragma once

#include <string>
#include <vector>

#include "crowd/graph.hpp"
#include "crowd/tensor.hpp"
#include "json.hpp"

namespace crowd {

// Tensors serialize as {"shape": [...], "data": [...]}.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j, const std::string& what);

// A checkpoint is an object mapping parameter name to its tensor. Names must
// be unique.
nlohmann::json checkpoint_to_json(const std::vector<NamedParam>& params);
// Loads values into matching parameters; every name in the checkpoint must
// exist with the same shape, and every parameter must be covered.
void checkpoint_from_json(const nlohmann::json& j,
                          const std::vector<NamedParam>& params);

// File round trip with a stable byte layout: two-space indent, sorted keys
// (nlohmann objects are ordered maps), trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace crowd
