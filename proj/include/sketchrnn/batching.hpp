// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "numerics.hpp"

namespace sketchrnn {

/// Indices into the item list; every member has the same sequence length.
using Batch = std::vector<std::size_t>;

/// Groups items by sequence length, shuffles each bucket, chunks buckets
/// into batches of at most `max_batch`, then shuffles batch order.
inline std::vector<Batch> bucket_batches(std::span<const std::size_t> lengths,
                                         std::size_t max_batch,
                                         SeededRng &rng) {
  if (max_batch == 0)
    throw InvalidInput("max_batch must be >= 1");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < lengths.size(); ++i)
    buckets[lengths[i]].push_back(i);

  std::vector<Batch> batches;
  for (auto &[length, members] : buckets) {
    rng.shuffle(members);
    for (std::size_t start = 0; start < members.size(); start += max_batch) {
      const auto stop = std::min(members.size(), start + max_batch);
      batches.emplace_back(members.begin() + static_cast<long>(start),
                           members.begin() + static_cast<long>(stop));
    }
  }
  rng.shuffle(batches);
  return batches;
}

inline std::vector<Batch> bucket_batches(std::span<const FeatureSequence> seqs,
                                         std::size_t max_batch,
                                         SeededRng &rng) {
  std::vector<std::size_t> lengths;
  lengths.reserve(seqs.size());
  for (const auto &s : seqs)
    lengths.push_back(s.length());
  return bucket_batches(lengths, max_batch, rng);
}

} // namespace sketchrnn
