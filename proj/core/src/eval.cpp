#include "s2c/eval.hpp"

#include <algorithm>
#include <cmath>

#include "s2c/mapping.hpp"

namespace s2c::eval {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  if (!pred.same_shape(truth)) throw ShapeMismatch("confusion: shape mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.bits.size(); ++i) {
    bool p = pred.bits[i], t = truth.bits[i];
    if (p && t) c.tp++;
    else if (p && !t) c.fp++;
    else if (!p && t) c.fn++;
    else c.tn++;
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  const double total = static_cast<double>(c.total());
  m.oa = total > 0 ? static_cast<double>(c.tp + c.tn) / total : 0.0;
  m.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

ChangeProbMap cva_baseline(const ImagePair& pair) {
  const RasterImage& a = pair.t1;
  const RasterImage& b = pair.t2;
  const int h = a.height(), w = a.width();
  std::vector<double> mag(static_cast<size_t>(h) * w);
  double lo = 1e300, hi = -1e300;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0;
      for (int ch = 0; ch < a.channels(); ++ch) {
        double d = b.at(r, c, ch) - a.at(r, c, ch);
        s += d * d;
      }
      double v = std::sqrt(s);
      mag[static_cast<size_t>(r) * w + c] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  ChangeProbMap out(h, w);
  const double span = hi - lo;
  for (size_t i = 0; i < mag.size(); ++i)
    out.probs[i] = span > 0 ? static_cast<float>((mag[i] - lo) / span) : 0.f;
  return out;
}

double best_f1_over_thresholds(const ChangeProbMap& probs,
                               const BinaryMask& truth, int n_thresholds) {
  double best = 0;
  for (int i = 1; i <= n_thresholds; ++i) {
    double t = static_cast<double>(i) / (n_thresholds + 1);
    BinaryMask pred = mapping::binarize(probs, t, truth.h, truth.w);
    best = std::max(best, metrics(confusion(pred, truth)).f1);
  }
  return best;
}

std::vector<SweepRow> sweep(
    const std::vector<std::pair<double, double>>& grid,
    const std::function<double(double, double, uint64_t)>& run,
    const std::vector<uint64_t>& trial_seeds) {
  if (grid.empty()) throw ValueRange("sweep: empty grid");
  if (trial_seeds.empty()) throw ValueRange("sweep: no trial seeds");
  std::vector<SweepRow> rows;
  for (auto [alpha, beta] : grid) {
    SweepRow row;
    row.alpha = alpha;
    row.beta = beta;
    for (uint64_t s : trial_seeds) row.trial_f1.push_back(run(alpha, beta, s));
    double sum = 0;
    for (double f : row.trial_f1) sum += f;
    row.mean_f1 = sum / row.trial_f1.size();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace s2c::eval
