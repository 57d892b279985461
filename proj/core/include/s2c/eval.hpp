#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "s2c/types.hpp"

namespace s2c::eval {

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  double oa = 0, precision = 0, recall = 0, f1 = 0;
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

// Positive class is "changed"; zero denominators yield 0.
Metrics metrics(const ConfusionCounts& c);

// Per-pixel change-vector magnitude of t2 - t1, min-max normalized.
ChangeProbMap cva_baseline(const ImagePair& pair);

// Best F1 over a threshold scan of a probability map (used to give the
// classical baseline its most favorable operating point).
double best_f1_over_thresholds(const ChangeProbMap& probs,
                               const BinaryMask& truth, int n_thresholds = 99);

struct SweepRow {
  double alpha = 0, beta = 0, mean_f1 = 0;
  std::vector<double> trial_f1;
};

// Runs the train+eval closure per (alpha, beta) cell over n_trials seeds.
std::vector<SweepRow> sweep(
    const std::vector<std::pair<double, double>>& grid,
    const std::function<double(double alpha, double beta, uint64_t seed)>& run,
    const std::vector<uint64_t>& trial_seeds);

}  // namespace s2c::eval
