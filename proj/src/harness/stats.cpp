#include "harness/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dtg::harness {

CoverageHistogram coverage_histogram(const std::vector<model::Interval>& intervals,
                                     const std::vector<double>& video_lengths) {
  if (intervals.size() != video_lengths.size())
    throw Error("coverage_histogram: intervals and lengths differ in count");
  if (intervals.empty()) throw Error("coverage_histogram: nothing to bin");

  constexpr int kBins = CoverageHistogram::kBins;
  constexpr double kW = CoverageHistogram::kBinWidth;
  std::vector<double> mass(kBins, 0.0);
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const double len = video_lengths[i];
    if (len <= 0) throw Error("coverage_histogram: non-positive video length");
    double lo = std::clamp(intervals[i].start / len, 0.0, 1.0);
    double hi = std::clamp(intervals[i].end / len, 0.0, 1.0);
    if (hi < lo) std::swap(lo, hi);
    if (hi == lo) {
      // point interval: all mass in its bin
      mass[std::min(kBins - 1, static_cast<int>(lo / kW))] += 1.0;
      continue;
    }
    for (int b = 0; b < kBins; ++b) {
      const double overlap = std::min(hi, (b + 1) * kW) - std::max(lo, b * kW);
      if (overlap > 0) mass[b] += overlap / (hi - lo);
    }
  }

  CoverageHistogram hist;
  hist.percent.resize(kBins);
  const double total = static_cast<double>(intervals.size());
  for (int b = 0; b < kBins; ++b) hist.percent[b] = 100.0 * mass[b] / total;
  return hist;
}

std::string coverage_csv(const CoverageHistogram& hist) {
  std::ostringstream os;
  os << "bin_start,bin_end,percent\n";
  os.precision(6);
  os << std::fixed;
  for (int b = 0; b < CoverageHistogram::kBins; ++b)
    os << b * CoverageHistogram::kBinWidth << ',' << (b + 1) * CoverageHistogram::kBinWidth << ','
       << hist.percent[b] << '\n';
  return os.str();
}

}  // namespace dtg::harness
