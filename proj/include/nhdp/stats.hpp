#pragma once

namespace nhdp {

// Sufficient statistics of a set of scalar observations under the Gaussian
// model: count, sum, sum of squares. Supports O(1) add/remove so the sampler
// can maintain per-table and per-dish stats incrementally.
struct ClusterStats {
  int n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double y) {
    ++n;
    sum += y;
    sumsq += y * y;
  }

  void remove(double y) {
    --n;
    sum -= y;
    sumsq -= y * y;
    if (n == 0) {
      // Pin the empty state exactly; avoids float residue accumulating over
      // millions of add/remove cycles.
      sum = 0.0;
      sumsq = 0.0;
    }
  }

  void merge(const ClusterStats& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }

  void unmerge(const ClusterStats& o) {
    n -= o.n;
    sum -= o.sum;
    sumsq -= o.sumsq;
    if (n == 0) {
      sum = 0.0;
      sumsq = 0.0;
    }
  }

  friend ClusterStats operator+(ClusterStats a, const ClusterStats& b) {
    a.merge(b);
    return a;
  }
};

}  // namespace nhdp
