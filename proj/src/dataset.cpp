#include "crowd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "crowd/util.hpp"

namespace crowd {

namespace {

struct Line {
  std::size_t number;  // 1-based line in the file
  std::vector<std::string> cells;
};

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells = split(line, ',');
  for (std::string& c : cells) c = trim(c);
  return cells;
}

// Sentences are maximal runs of non-empty lines. Flat files come back as one
// sentence regardless of blank lines.
std::vector<std::vector<Line>> read_rows(const std::string& path,
                                         bool keep_sentences,
                                         bool expect_header,
                                         std::size_t* header_width) {
  const std::string text = read_file(path);
  std::vector<std::vector<Line>> sentences;
  std::vector<Line> current;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool header_done = !expect_header;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string t = trim(raw);
    if (t.empty()) {
      if (keep_sentences && !current.empty()) {
        sentences.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    if (!header_done) {
      header_done = true;
      if (header_width != nullptr) *header_width = split_cells(t).size();
      continue;
    }
    current.push_back({line_no, split_cells(t)});
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  require(!sentences.empty(), path, ": no data rows");
  return sentences;
}

double parse_double(const std::string& s, const std::string& path,
                    std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  require(end == begin + s.size() && !s.empty(), path, " line ", line_no,
          ": '", s, "' is not a number");
  require(std::isfinite(v), path, " line ", line_no, ": non-finite value '",
          s, "'");
  return v;
}

long parse_int(const std::string& s, const std::string& path,
               std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  require(end == begin + s.size() && !s.empty(), path, " line ", line_no,
          ": '", s, "' is not an integer");
  return v;
}

void check_width(const Line& line, std::size_t expected,
                 const std::string& path) {
  require(line.cells.size() == expected, path, " line ", line.number,
          ": has ", line.cells.size(), " cells, expected ", expected);
}

AnnotationTable answers_from_rows(
    const std::vector<std::vector<Line>>& ans_rows, bool classify,
    std::size_t num_classes, const std::string& path) {
  std::size_t n = 0;
  for (const auto& sentence : ans_rows) n += sentence.size();
  const std::size_t r = ans_rows[0][0].cells.size();
  require(r > 0, path, ": no annotator columns");

  AnnotationTable table;
  if (classify) {
    // First pass collects labels so the class count can be inferred.
    std::vector<std::vector<long>> labels;
    long max_label = -1;
    for (const auto& sentence : ans_rows) {
      for (const Line& line : sentence) {
        check_width(line, r, path);
        std::vector<long> row(r, -1);
        for (std::size_t a = 0; a < r; ++a) {
          const std::string& cell = line.cells[a];
          if (cell.empty() || cell == "-1") continue;
          const long v = parse_int(cell, path, line.number);
          require(v >= 0, path, " line ", line.number, ": label ", v,
                  " is negative (only -1 marks a missing cell)");
          row[a] = v;
          max_label = std::max(max_label, v);
        }
        labels.push_back(std::move(row));
      }
    }
    std::size_t c = num_classes;
    if (c == 0) {
      require(max_label >= 0, path, ": no labels present");
      c = static_cast<std::size_t>(max_label) + 1;
    } else {
      require(max_label < static_cast<long>(c), path, ": label ", max_label,
              " exceeds the configured class count ", c);
    }
    table = AnnotationTable::classification(n, r, c);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < r; ++a)
        if (labels[i][a] >= 0)
          table.set_label(i, a, static_cast<int>(labels[i][a]));
  } else {
    table = AnnotationTable::regression(n, r);
    std::size_t i = 0;
    for (const auto& sentence : ans_rows) {
      for (const Line& line : sentence) {
        check_width(line, r, path);
        for (std::size_t a = 0; a < r; ++a) {
          const std::string& cell = line.cells[a];
          if (cell.empty()) continue;
          table.set_value(i, a, parse_double(cell, path, line.number));
        }
        ++i;
      }
    }
  }
  table.validate(path);
  return table;
}

}  // namespace

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "regression") return TaskKind::regression;
  if (s == "sequence") return TaskKind::sequence;
  fail("unknown task '", s,
       "' (expected classification, regression, or sequence)");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::classification: return "classification";
    case TaskKind::regression: return "regression";
    case TaskKind::sequence: return "sequence";
  }
  fail("unreachable task kind");
}

AnnotationTable load_answers(const std::string& path, TaskKind kind,
                             std::size_t num_classes) {
  const auto rows = read_rows(path, kind == TaskKind::sequence, false,
                              nullptr);
  return answers_from_rows(rows, kind != TaskKind::regression, num_classes,
                           path);
}

Dataset load_dataset(const std::string& features_path,
                     const std::string& answers_path,
                     const std::string& gold_path, TaskKind kind,
                     std::size_t num_classes) {
  const bool seq = kind == TaskKind::sequence;
  const bool classify = kind != TaskKind::regression;

  Dataset ds;
  ds.kind = kind;

  std::size_t width = 0;
  auto feat_rows = read_rows(features_path, seq, true, &width);
  require(width > 0, features_path, ": empty header");
  std::size_t n = 0;
  for (const auto& sentence : feat_rows) n += sentence.size();
  ds.features = Tensor::matrix(n, width);
  {
    std::size_t i = 0;
    for (const auto& sentence : feat_rows) {
      ds.sentence_lengths.push_back(sentence.size());
      for (const Line& line : sentence) {
        check_width(line, width, features_path);
        for (std::size_t j = 0; j < width; ++j)
          ds.features.at(i, j) =
              parse_double(line.cells[j], features_path, line.number);
        ++i;
      }
    }
  }
  if (!seq) ds.sentence_lengths.clear();

  // An empty answers path loads a gold-only evaluation set; the answers
  // table stays empty.
  if (!answers_path.empty()) {
    auto ans_rows = read_rows(answers_path, seq, false, nullptr);
    {
      std::size_t ans_n = 0;
      for (const auto& sentence : ans_rows) ans_n += sentence.size();
      require(ans_n == n, answers_path, ": ", ans_n, " rows vs ", n,
              " feature rows");
      if (seq) {
        require(ans_rows.size() == feat_rows.size(), answers_path, ": ",
                ans_rows.size(), " sentences vs ", feat_rows.size(),
                " in the features file");
        for (std::size_t s = 0; s < ans_rows.size(); ++s)
          require(ans_rows[s].size() == feat_rows[s].size(), answers_path,
                  ": sentence ", s + 1, " has ", ans_rows[s].size(),
                  " tokens vs ", feat_rows[s].size(),
                  " in the features file");
      }
    }
    ds.answers = answers_from_rows(ans_rows, classify, num_classes,
                                   answers_path);
  }

  if (!gold_path.empty()) {
    auto gold_rows = read_rows(gold_path, seq, false, nullptr);
    std::size_t gold_n = 0;
    for (const auto& sentence : gold_rows) gold_n += sentence.size();
    require(gold_n == n, gold_path, ": ", gold_n, " rows vs ", n,
            " feature rows");
    for (const auto& sentence : gold_rows) {
      for (const Line& line : sentence) {
        check_width(line, 1, gold_path);
        if (classify) {
          // Bound from the answers when loaded, else from the caller; 0
          // leaves gold labels unbounded.
          const std::size_t bound = answers_path.empty()
                                        ? num_classes
                                        : ds.answers.num_classes();
          const long v = parse_int(line.cells[0], gold_path, line.number);
          require(v >= 0 && (bound == 0 ||
                             static_cast<std::size_t>(v) < bound),
                  gold_path, " line ", line.number, ": label ", v,
                  " out of range [0, ", bound, ")");
          ds.gold_labels.push_back(static_cast<int>(v));
        } else {
          ds.gold_values.push_back(
              parse_double(line.cells[0], gold_path, line.number));
        }
      }
    }
    ds.has_gold = true;
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& answers_path,
                  const std::string& gold_path) {
  const bool seq = ds.kind == TaskKind::sequence;
  const bool classify = ds.kind != TaskKind::regression;
  const std::size_t n = ds.features.rows();
  const std::size_t d = ds.features.cols();
  std::vector<std::size_t> lengths = ds.sentence_lengths;
  if (!seq) lengths.assign(1, n);
  {
    std::size_t total = 0;
    for (std::size_t len : lengths) total += len;
    require(total == n, "save_dataset: sentence lengths sum to ", total,
            ", expected ", n);
  }

  std::ostringstream feat;
  for (std::size_t j = 0; j < d; ++j) feat << (j ? "," : "") << "f" << j;
  feat << "\n";
  std::ostringstream ans;
  std::ostringstream gold;
  std::size_t i = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    if (s > 0 && seq) {
      feat << "\n";
      ans << "\n";
      gold << "\n";
    }
    for (std::size_t t = 0; t < lengths[s]; ++t, ++i) {
      for (std::size_t j = 0; j < d; ++j)
        feat << (j ? "," : "") << fmt_double(ds.features.at(i, j));
      feat << "\n";
      for (std::size_t a = 0; a < ds.answers.num_annotators(); ++a) {
        if (a > 0) ans << ",";
        if (!ds.answers.present(i, a)) {
          ans << (classify ? "-1" : "");
        } else if (classify) {
          ans << ds.answers.label(i, a);
        } else {
          ans << fmt_double(ds.answers.value(i, a));
        }
      }
      ans << "\n";
      if (ds.has_gold) {
        if (classify)
          gold << ds.gold_labels[i] << "\n";
        else
          gold << fmt_double(ds.gold_values[i]) << "\n";
      }
    }
  }
  write_file(features_path, feat.str());
  if (!answers_path.empty()) write_file(answers_path, ans.str());
  if (!gold_path.empty() && ds.has_gold) write_file(gold_path, gold.str());
}

}  // namespace crowd
