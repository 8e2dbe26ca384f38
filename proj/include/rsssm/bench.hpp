#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace rsssm {

struct BenchRow {
  std::size_t length = 0;
  std::size_t channels = 0, state_dim = 0;
  double forward_ms = 0;   // median
  double backward_ms = 0;  // median of the adjoint pass alone
  /// Median over repeats of this length's time divided by the previous
  /// length's time in the same repeat; 0 for the first row.
  double forward_ratio = 0;
  double backward_ratio = 0;
};

/// Times the scan at f32 for each sequence length (median of `repeats`).
/// Every repeat sweeps all lengths, so each ratio compares timings taken
/// moments apart.
std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths, std::size_t channels,
                                 std::size_t state_dim, std::size_t repeats, std::uint64_t seed);

/// Header "L_seq,D,Ds,seconds_forward,seconds_backward".
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace rsssm
