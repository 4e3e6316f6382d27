#pragma once

#include <string>
#include <vector>

#include "model/grounding.hpp"

namespace dtg::harness {

// Where in their videos do intervals fall? 20 position-ratio bins of width
// 0.05; each interval contributes one unit of mass spread over its span, and
// the result is normalized to percentages (sums to 100).
struct CoverageHistogram {
  static constexpr int kBins = 20;
  static constexpr double kBinWidth = 0.05;
  std::vector<double> percent;  // kBins entries
};

CoverageHistogram coverage_histogram(const std::vector<model::Interval>& intervals,
                                     const std::vector<double>& video_lengths);

// CSV: bin_start,bin_end,percent
std::string coverage_csv(const CoverageHistogram& hist);

}  // namespace dtg::harness
