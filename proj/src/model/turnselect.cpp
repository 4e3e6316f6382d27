#include "model/turnselect.hpp"

#include <algorithm>
#include <map>

namespace dtg::model {

double interval_iou(const Interval& a, const Interval& b) {
  if (a.start > a.end || b.start > b.end) throw Error("interval_iou: malformed interval");
  if (a.length() == 0.0 && b.length() == 0.0)
    return (a.start == b.start) ? 1.0 : 0.0;
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

TurnSelection select_turns(const std::vector<TurnRecord>& history, const Interval& current, int k) {
  if (k < 1) throw Error("select_turns: k must be >= 1");
  struct Ranked {
    int pos;
    double iou;
    int turn_index;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(history.size());
  for (std::size_t i = 0; i < history.size(); ++i)
    ranked.push_back({static_cast<int>(i), interval_iou(history[i].interval, current),
                      history[i].turn_index});
  // IoU descending, then recency (larger turn index first); the zero-IoU tail
  // ordered this way supplements the selection with the nearest turns.
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return a.turn_index > b.turn_index;
  });
  const std::size_t take = std::min<std::size_t>(k, ranked.size());
  std::vector<Ranked> top(ranked.begin(), ranked.begin() + take);
  std::sort(top.begin(), top.end(),
            [](const Ranked& a, const Ranked& b) { return a.turn_index < b.turn_index; });
  TurnSelection sel;
  for (const Ranked& r : top) {
    sel.chosen.push_back(r.turn_index);
    sel.ious.push_back(r.iou);
    sel.supplemented.push_back(r.iou == 0.0);
  }
  return sel;
}

}  // namespace dtg::model
