#include "wav/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace wav::metrics {

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& y, const char* who) {
  if (x.size() != y.size()) throw PreconditionError(std::string(who) + ": inputs differ in length");
  if (x.size() < 2) throw PreconditionError(std::string(who) + ": need at least two observations");
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) throw UndefinedMetric(std::string(who) + ": constant input has no ranking");
}

// Sum over runs of equal values of t(t-1)/2; v must be sorted.
template <class It, class Eq>
double tied_pairs(It first, It last, Eq eq) {
  double total = 0.0;
  while (first != last) {
    It run = first;
    double t = 0.0;
    while (run != last && eq(*run, *first)) {
      ++run;
      t += 1.0;
    }
    total += t * (t - 1.0) / 2.0;
    first = run;
  }
  return total;
}

// Merge sort counting strict inversions.
double count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0.0;
  const std::size_t mid = lo + (hi - lo) / 2;
  double inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<double>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace

double dynamics_accuracy(const std::vector<DynamicsItem>& items) {
  std::size_t changed = 0;
  std::size_t correct = 0;
  for (const auto& it : items) {
    for (auto g : grid::changed_groups(it.prior, it.truth)) {
      ++changed;
      if (it.prediction.classes.at(static_cast<std::size_t>(g)) == it.truth.classes[static_cast<std::size_t>(g)]) {
        ++correct;
      }
    }
  }
  if (changed == 0) throw UndefinedMetric("dynamics_accuracy: no element changes in the evaluation set");
  return static_cast<double>(correct) / static_cast<double>(changed);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    i = j;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "spearman");
  const auto r = average_ranks(x);
  const auto q = average_ranks(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) d2 += (r[i] - q[i]) * (r[i] - q[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double kendall(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "kendall");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double n1 = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const double n3 = tied_pairs(order.begin(), order.end(),
                               [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> buf(n);
  const double discordant = count_inversions(ys, buf, 0, n);
  // ys is now sorted.
  const double n2 = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });
  return (n0 - n1 - n2 + n3 - 2.0 * discordant) / n0;
}

double prediction_loss(const model::WorldModel& wm, const std::vector<data::LabeledTransition>& test) {
  if (test.empty()) throw PreconditionError("prediction_loss: empty test set");
  double total = 0.0;
  for (const auto& t : test) total += wm.loss(t.s, t.a, t.s_next);
  return total / static_cast<double>(test.size());
}

}  // namespace wav::metrics
