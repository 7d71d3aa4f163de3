#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace crowd {

// One kernel timed in both modes on the same inputs. identical is a bitwise
// comparison of the two output buffers.
struct BenchResult {
  std::string op;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  double serial_ms = 0.0;
  double openmp_ms = 0.0;
  bool identical = false;
};

std::vector<BenchResult> run_kernel_bench(std::uint64_t seed);
std::string bench_table(const std::vector<BenchResult>& results);

}  // namespace crowd
