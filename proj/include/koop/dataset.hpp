#pragma once

#include <json.hpp>
#include <vector>

#include "koop/rng.hpp"
#include "koop/types.hpp"

namespace koop {

// Snapshot data grouped by trajectory.  Transition pairs (x_n, x_{n+1}) are a
// derived view that never straddles trajectory boundaries.
struct TimeSeriesDataset {
  Index state_dim = 0;
  std::vector<Matrix> trajectories;  // each state_dim x len_i with len_i >= 2
  nlohmann::json system;             // descriptor of the generating system
  std::uint64_t seed = 0;

  Index snapshot_count() const;
  Index pair_count() const;

  // All snapshots concatenated trajectory by trajectory (state_dim x S).
  Matrix snapshots() const;

  // Column indices into snapshots() for the pair view: pair n is
  // (snapshots.col(first[n]), snapshots.col(second[n])).
  void pair_indices(std::vector<Index>& first, std::vector<Index>& second) const;

  void validate() const;  // throws InvalidInput on shape or finiteness problems
};

// count uniform samples from the box, one per column.
Matrix sample_box(const Box& box, Index count, Rng& rng);

}  // namespace koop
