#include "mmclass/imbalance.hpp"

#include "mmclass/error.hpp"

namespace mmc::imbalance {

std::vector<double> balanced_class_weights(const std::vector<std::int64_t>& counts) {
    std::int64_t n = 0;
    for (const auto c : counts) {
        if (c <= 0)
            throw DataError("balanced class weights undefined for a class with count " +
                            std::to_string(c));
        n += c;
    }
    const auto c_count = static_cast<double>(counts.size());
    std::vector<double> weights(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        weights[i] = static_cast<double>(n) / (c_count * static_cast<double>(counts[i]));
    return weights;
}

std::size_t SampleIndex::task_total(std::size_t task) const {
    std::size_t total = 0;
    for (const auto& pool : pools.at(task)) total += pool.size();
    return total;
}

bool SampleIndex::empty() const {
    for (std::size_t t = 0; t < pools.size(); ++t)
        if (task_total(t) > 0) return false;
    return true;
}

BatchSampler::BatchSampler(SamplerKind kind, const SampleIndex& index,
                           std::uint64_t seed)
    : kind_(kind), index_(index), rng_(seed) {
    for (std::size_t t = 0; t < index_.pools.size(); ++t) {
        const std::size_t total = index_.task_total(t);
        if (total == 0) continue;
        active_tasks_.push_back(t);
        task_totals_.push_back(total);
        grand_total_ += total;

        std::vector<std::size_t> flat;
        std::vector<std::size_t> classes;
        flat.reserve(total);
        for (std::size_t k = 0; k < index_.pools[t].size(); ++k) {
            const auto& pool = index_.pools[t][k];
            if (!pool.empty()) classes.push_back(k);
            flat.insert(flat.end(), pool.begin(), pool.end());
        }
        flat_pools_.push_back(std::move(flat));
        active_classes_.push_back(std::move(classes));
    }
    if (active_tasks_.empty())
        throw DataError("batch sampler needs at least one non-empty task pool");
}

Batch BatchSampler::next_batch(std::int64_t batch_size) {
    if (batch_size <= 0)
        throw ConfigError("batch_size must be positive, got " +
                          std::to_string(batch_size));

    std::size_t slot = 0;
    if (kind_ == SamplerKind::proportional_task) {
        std::uint64_t u = rng_.next_below(grand_total_);
        while (u >= task_totals_[slot]) {
            u -= task_totals_[slot];
            ++slot;
        }
    } else {
        slot = rng_.next_below(active_tasks_.size());
    }

    Batch batch;
    batch.task = active_tasks_[slot];
    batch.samples.reserve(static_cast<std::size_t>(batch_size));
    if (kind_ == SamplerKind::proportional_task) {
        const auto& flat = flat_pools_[slot];
        for (std::int64_t i = 0; i < batch_size; ++i)
            batch.samples.push_back(flat[rng_.next_below(flat.size())]);
    } else {
        const auto& classes = active_classes_[slot];
        const auto& pools = index_.pools[batch.task];
        for (std::int64_t i = 0; i < batch_size; ++i) {
            const auto k = classes[rng_.next_below(classes.size())];
            const auto& pool = pools[k];
            batch.samples.push_back(pool[rng_.next_below(pool.size())]);
        }
    }
    return batch;
}

}  // namespace mmc::imbalance
