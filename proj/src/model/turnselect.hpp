#pragma once

#include <vector>

#include "model/grounding.hpp"

namespace dtg::model {

// One history question-answer pair with its (predicted or ground-truth) interval.
struct TurnRecord {
  int turn_index = 0;  // 1-based
  std::vector<int> question;
  std::vector<int> answer;
  Interval interval;
};

struct TurnSelection {
  std::vector<int> chosen;          // turn indices, chronological order
  std::vector<double> ious;         // parallel to chosen
  std::vector<bool> supplemented;   // true where the turn was a nearest-turn fill-in
};

// Interval IoU in [0,1]. Point intervals: 1 for identical points, else 0.
double interval_iou(const Interval& a, const Interval& b);

// Top-k by IoU with recency tie-breaking; zero-IoU slots fill with the most
// recent unselected turns. Output is re-sorted chronologically.
TurnSelection select_turns(const std::vector<TurnRecord>& history, const Interval& current, int k);

}  // namespace dtg::model
