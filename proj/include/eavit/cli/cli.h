#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace eavit::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kData = 2;
inline constexpr int kNumeric = 3;

// Runs one subcommand (args excludes the program name). Messages go to err;
// results and progress to out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchOptions {
  std::vector<std::size_t> tokens{128, 256, 512};
  std::size_t batch = 8;
  std::size_t dim = 32;
  std::size_t heads = 8;
  std::size_t memory = 64;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string kind;  // "external" or "self"
  std::size_t tokens = 0;
  double median_ms = 0;
};

// Times inference of multi-head external attention and of the self-attention
// baseline on random [batch, N, dim] inputs; median over repeats.
std::vector<BenchRow> bench_attention(const BenchOptions& options);

}  // namespace eavit::cli
