#pragma once

#include <cstdint>
#include <vector>

#include "mmclass/rng.hpp"

/// Class-imbalance strategies: balanced class weights plus the two batch
/// sampling policies (task-proportional and uniform-class) used by the
/// neural trainers.
namespace mmc::imbalance {

/// w_c = N / (C * N_c) with N = sum of counts, C = number of classes.
/// Throws DataError on a zero count (weight undefined).
std::vector<double> balanced_class_weights(const std::vector<std::int64_t>& counts);

enum class SamplerKind { proportional_task, uniform_class_and_task };

/// Sample pools grouped by task and class. Sample ids are opaque indices
/// owned by the caller (the trainers use per-embedding instance ids).
struct SampleIndex {
    // pools[task][class] = sample ids labeled with that class
    std::vector<std::vector<std::vector<std::size_t>>> pools;

    std::size_t task_total(std::size_t task) const;
    bool empty() const;
};

struct Batch {
    std::size_t task = 0;
    std::vector<std::size_t> samples;
};

/// Stateful, seeded batch stream. One task per batch; classes mix within a
/// batch. All draws are with replacement, so rare classes repeat as needed.
class BatchSampler {
public:
    /// Throws DataError if every task pool is empty.
    BatchSampler(SamplerKind kind, const SampleIndex& index, std::uint64_t seed);

    /// proportional_task: task drawn with probability proportional to its
    /// labeled-sample count, then uniform draws from the whole task pool.
    /// uniform_class_and_task: task uniform, then per sample class uniform,
    /// then uniform within the class.
    /// Throws ConfigError when batch_size <= 0.
    Batch next_batch(std::int64_t batch_size);

private:
    SamplerKind kind_;
    SampleIndex index_;
    Rng rng_;
    std::vector<std::size_t> active_tasks_;  // tasks with non-empty pools
    std::vector<std::size_t> task_totals_;   // aligned with active_tasks_
    std::size_t grand_total_ = 0;
    std::vector<std::vector<std::size_t>> flat_pools_;      // per active task
    std::vector<std::vector<std::size_t>> active_classes_;  // per active task
};

}  // namespace mmc::imbalance
