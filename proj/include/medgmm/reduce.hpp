#pragma once

#include <Eigen/Dense>

namespace medgmm {

// Deterministic pairwise reduction over row indices. The reduction tree is a
// midpoint split that depends only on the range length, with sequential
// accumulation below a fixed block size. All empirical sums and means in the
// estimators go through this path so that results are reproducible regardless
// of how rows were produced, and so that block-duplicated data reduces to an
// exactly doubled sum.
template <typename Acc, typename AddRow>
Acc pairwise_sum(Eigen::Index lo, Eigen::Index hi, const Acc& zero, const AddRow& add_row) {
    constexpr Eigen::Index kBlock = 64;
    if (hi - lo <= kBlock) {
        Acc acc = zero;
        for (Eigen::Index i = lo; i < hi; ++i) add_row(i, acc);
        return acc;
    }
    const Eigen::Index mid = lo + (hi - lo) / 2;
    Acc acc = pairwise_sum(lo, mid, zero, add_row);
    acc += pairwise_sum(mid, hi, zero, add_row);
    return acc;
}

template <typename Acc, typename AddRow>
Acc pairwise_mean(Eigen::Index n, const Acc& zero, const AddRow& add_row) {
    Acc acc = pairwise_sum(Eigen::Index(0), n, zero, add_row);
    acc /= static_cast<double>(n);
    return acc;
}

}  // namespace medgmm
