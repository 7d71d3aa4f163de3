#include "crowd/serialize.hpp"

#include <set>

#include "crowd/util.hpp"

namespace crowd {

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape;
  j["data"] = t.data;
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j, const std::string& what) {
  require(j.is_object() && j.contains("shape") && j.contains("data"), what,
          ": expected an object with shape and data");
  Tensor t;
  t.shape = j.at("shape").get<std::vector<std::size_t>>();
  t.data = j.at("data").get<std::vector<double>>();
  require(shape_product(t.shape) == t.data.size(), what, ": shape ",
          shape_str(t.shape), " does not match ", t.data.size(), " values");
  require(t.all_finite(), what, ": non-finite entries");
  return t;
}

nlohmann::json checkpoint_to_json(const std::vector<NamedParam>& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& p : params) {
    require(p.value != nullptr, "checkpoint: parameter '", p.name,
            "' has no storage");
    require(!j.contains(p.name), "checkpoint: duplicate parameter name '",
            p.name, "'");
    j[p.name] = tensor_to_json(*p.value);
  }
  return j;
}

void checkpoint_from_json(const nlohmann::json& j,
                          const std::vector<NamedParam>& params) {
  require(j.is_object(), "checkpoint: expected a JSON object");
  std::set<std::string> seen;
  for (const auto& p : params) {
    require(j.contains(p.name), "checkpoint: missing parameter '", p.name,
            "'");
    Tensor t = tensor_from_json(j.at(p.name), "checkpoint '" + p.name + "'");
    require(t.shape == p.value->shape, "checkpoint: parameter '", p.name,
            "' has shape ", shape_str(t.shape), ", expected ",
            shape_str(p.value->shape));
    *p.value = std::move(t);
    seen.insert(p.name);
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    require(seen.count(it.key()) == 1, "checkpoint: unknown parameter '",
            it.key(), "'");
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  require(!j.is_discarded(), path, ": invalid JSON");
  return j;
}

}  // namespace crowd
