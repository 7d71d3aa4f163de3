#include "crowd/config.hpp"

#include <cstdlib>

#include "crowd/simulate.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

const std::vector<std::string>& key_list() {
  static const std::vector<std::string> keys = {
      "task",          "method",       "protocol",      "features",
      "answers",       "gold",         "test_features", "test_gold",
      "num_classes",   "hidden",       "dropout",       "optimizer",
      "learning_rate", "epochs",       "batch_size",    "seed",
      "replicas",      "em_schedule",  "prior_strength", "ds_labels",
      "crowd_learning_rate", "crowd_l2",
  };
  return keys;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    require(pos == value.size() && v >= 0, "bad value");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail("config: key '", key, "' needs a non-negative integer, got '", value,
         "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    require(pos == value.size(), "bad value");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    fail("config: key '", key, "' needs an unsigned integer, got '", value,
         "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    require(pos == value.size(), "bad value");
    return v;
  } catch (const std::exception&) {
    fail("config: key '", key, "' needs a number, got '", value, "'");
  }
}

std::vector<std::size_t> parse_hidden(const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;  // linear model: no hidden blocks
  for (const std::string& part : split(value, ',')) {
    const std::size_t w = parse_size("hidden", trim(part));
    require(w > 0, "config: key 'hidden' needs positive widths, got '", value,
            "'");
    out.push_back(w);
  }
  return out;
}

}  // namespace

Method method_from_string(const std::string& s) {
  if (s == "mv") return Method::mv;
  if (s == "ds") return Method::ds;
  if (s == "mean") return Method::mean;
  if (s == "em") return Method::em;
  if (s == "dn") return Method::dn;
  if (s == "wdn") return Method::wdn;
  if (s == "cl-vw") return Method::cl_vw;
  if (s == "cl-vw+b") return Method::cl_vwb;
  if (s == "cl-mw") return Method::cl_mw;
  if (s == "cl-s") return Method::cl_s;
  if (s == "cl-b") return Method::cl_b;
  if (s == "cl-s+b") return Method::cl_sb;
  if (s == "true") return Method::true_labels;
  fail("unknown method '", s, "' (expected mv, ds, mean, em, dn, wdn, ",
       "cl-vw, cl-vw+b, cl-mw, cl-s, cl-b, cl-s+b, or true)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::mv: return "mv";
    case Method::ds: return "ds";
    case Method::mean: return "mean";
    case Method::em: return "em";
    case Method::dn: return "dn";
    case Method::wdn: return "wdn";
    case Method::cl_vw: return "cl-vw";
    case Method::cl_vwb: return "cl-vw+b";
    case Method::cl_mw: return "cl-mw";
    case Method::cl_s: return "cl-s";
    case Method::cl_b: return "cl-b";
    case Method::cl_sb: return "cl-s+b";
    case Method::true_labels: return "true";
  }
  fail("unreachable method");
}

bool method_supports_task(Method m, TaskKind task) {
  switch (m) {
    case Method::mean:
    case Method::cl_s:
    case Method::cl_b:
    case Method::cl_sb:
      return task == TaskKind::regression;
    case Method::mv:
    case Method::ds:
    case Method::cl_vw:
    case Method::cl_vwb:
    case Method::cl_mw:
      return task != TaskKind::regression;
    case Method::em:
    case Method::dn:
    case Method::wdn:
    case Method::true_labels:
      return true;
  }
  fail("unreachable method");
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "task") {
    task = task_kind_from_string(value);
  } else if (key == "method") {
    method = method_from_string(value);
  } else if (key == "protocol") {
    protocol = value;
  } else if (key == "features") {
    features = value;
  } else if (key == "answers") {
    answers = value;
  } else if (key == "gold") {
    gold = value;
  } else if (key == "test_features") {
    test_features = value;
  } else if (key == "test_gold") {
    test_gold = value;
  } else if (key == "num_classes") {
    num_classes = parse_size(key, value);
  } else if (key == "hidden") {
    hidden = parse_hidden(value);
  } else if (key == "dropout") {
    dropout = parse_real(key, value);
  } else if (key == "optimizer") {
    optimizer.kind = optimizer_kind_from_string(value);
  } else if (key == "learning_rate") {
    optimizer.learning_rate = parse_real(key, value);
  } else if (key == "epochs") {
    epochs = parse_size(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_size(key, value);
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "replicas") {
    replicas = parse_size(key, value);
  } else if (key == "em_schedule") {
    em_schedule = parse_size(key, value);
  } else if (key == "prior_strength") {
    prior_strength = parse_real(key, value);
  } else if (key == "ds_labels") {
    ds_labels = value;
  } else if (key == "crowd_learning_rate") {
    crowd_learning_rate = parse_real(key, value);
  } else if (key == "crowd_l2") {
    crowd_l2 = parse_real(key, value);
  } else {
    fail("config: unknown key '", key, "'");
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "config: line ", line_no,
            " is not key=value: '", trim(raw), "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  return parse(read_file(path));
}

void ExperimentConfig::validate() const {
  require(method_supports_task(method, task), "config: method ",
          to_string(method), " does not support ", to_string(task),
          " tasks");
  require(replicas >= 1, "config: replicas must be at least 1");
  require(epochs >= 1, "config: epochs must be at least 1");
  require(batch_size >= 1, "config: batch_size must be at least 1");
  require(dropout >= 0.0 && dropout < 1.0,
          "config: dropout must lie in [0, 1)");
  require(optimizer.learning_rate > 0.0,
          "config: learning_rate must be positive");
  require(ds_labels == "hard" || ds_labels == "soft",
          "config: ds_labels must be hard or soft, got '", ds_labels, "'");
  require(prior_strength >= 0.0, "config: prior_strength must be >= 0");
  require(crowd_learning_rate >= 0.0,
          "config: crowd_learning_rate must be >= 0");
  require(crowd_l2 >= 0.0, "config: crowd_l2 must be >= 0");
  if (protocol.empty()) {
    require(!features.empty() && !answers.empty(),
            "config: need either a protocol or features+answers paths");
  } else {
    const TaskSpec spec = crowd::protocol(protocol);  // rejects unknown names
    require(spec.kind == task, "config: protocol '", protocol, "' is a ",
            to_string(spec.kind), " task, not ", to_string(task));
    require(features.empty() && answers.empty() && gold.empty() &&
                test_features.empty() && test_gold.empty(),
            "config: protocol and file paths are mutually exclusive");
  }
  if (method == Method::true_labels && protocol.empty())
    require(!gold.empty(), "config: method true needs a gold path");
}

std::vector<std::string> config_keys() { return key_list(); }

}  // namespace crowd
