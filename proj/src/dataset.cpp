#include "koop/dataset.hpp"

#include <sstream>

namespace koop {

Index TimeSeriesDataset::snapshot_count() const {
  Index s = 0;
  for (const Matrix& t : trajectories) s += t.cols();
  return s;
}

Index TimeSeriesDataset::pair_count() const {
  Index n = 0;
  for (const Matrix& t : trajectories) n += t.cols() - 1;
  return n;
}

Matrix TimeSeriesDataset::snapshots() const {
  Matrix all(state_dim, snapshot_count());
  Index at = 0;
  for (const Matrix& t : trajectories) {
    all.middleCols(at, t.cols()) = t;
    at += t.cols();
  }
  return all;
}

void TimeSeriesDataset::pair_indices(std::vector<Index>& first, std::vector<Index>& second) const {
  first.clear();
  second.clear();
  first.reserve(static_cast<std::size_t>(pair_count()));
  second.reserve(static_cast<std::size_t>(pair_count()));
  Index at = 0;
  for (const Matrix& t : trajectories) {
    for (Index s = 0; s + 1 < t.cols(); ++s) {
      first.push_back(at + s);
      second.push_back(at + s + 1);
    }
    at += t.cols();
  }
}

void TimeSeriesDataset::validate() const {
  if (state_dim < 1) throw InvalidInput("dataset: state dimension must be positive");
  if (trajectories.empty()) throw InvalidInput("dataset: no trajectories");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Matrix& t = trajectories[i];
    std::ostringstream whom;
    whom << "dataset: trajectory " << i;
    if (t.rows() != state_dim) throw InvalidInput(whom.str() + " has the wrong state dimension");
    if (t.cols() < 2) throw InvalidInput(whom.str() + " has fewer than two snapshots");
    if (!t.allFinite()) throw InvalidInput(whom.str() + " contains non-finite values");
  }
}

Matrix sample_box(const Box& box, Index count, Rng& rng) {
  box.validate();
  if (count < 1) throw InvalidInput("sample_box: count must be positive");
  Matrix X(box.dim(), count);
  for (Index j = 0; j < count; ++j)
    for (Index i = 0; i < box.dim(); ++i) X(i, j) = rng.uniform(box.lo(i), box.hi(i));
  return X;
}

}  // namespace koop
