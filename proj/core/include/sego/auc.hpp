#pragma once

#include <span>

namespace sego {

// Area under the ROC curve in Mann-Whitney form: the fraction of
// (positive, negative) pairs ranked correctly, ties counting one half.
// labels: 1 = positive (OOD), 0 = negative. Throws UndefinedMetric when
// either class is empty.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace sego
