#pragma once

#include <cstddef>
#include <vector>

namespace coag2d {

/// Binary indexed tree over non-negative values with proportional sampling.
class FenwickSampler {
public:
    FenwickSampler() = default;
    explicit FenwickSampler(std::size_t capacity) { reset(capacity); }

    void reset(std::size_t capacity) {
        values_.assign(capacity, 0.0);
        tree_.assign(capacity + 1, 0.0);
        top_bit_ = 1;
        while (top_bit_ * 2 <= capacity) top_bit_ *= 2;
    }

    /// Rebuilds the tree from scratch in O(n); removes accumulated rounding drift.
    void rebuild() {
        tree_.assign(values_.size() + 1, 0.0);
        for (std::size_t i = 1; i <= values_.size(); ++i) {
            tree_[i] += values_[i - 1];
            const std::size_t parent = i + (i & (~i + 1));
            if (parent <= values_.size()) tree_[parent] += tree_[i];
        }
    }

    void set(std::size_t i, double value) {
        const double delta = value - values_[i];
        values_[i] = value;
        for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
    }

    double value(std::size_t i) const { return values_[i]; }
    std::size_t capacity() const { return values_.size(); }

    double total() const {
        double s = 0.0;
        for (std::size_t k = values_.size(); k > 0; k -= k & (~k + 1)) s += tree_[k];
        return s;
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`, clamped to
    /// the last index with a positive value at or below `limit`.
    std::size_t find(double target, std::size_t limit) const {
        std::size_t pos = 0;
        for (std::size_t step = top_bit_; step > 0; step /= 2) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        if (pos >= limit) pos = limit - 1;
        while (pos > 0 && values_[pos] <= 0.0) --pos;
        return pos;
    }

private:
    std::vector<double> values_;
    std::vector<double> tree_;
    std::size_t top_bit_ = 1;
};

}  // namespace coag2d
