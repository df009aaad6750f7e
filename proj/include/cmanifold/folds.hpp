#pragma once

#include <map>
#include <set>

#include "common.hpp"
#include "rng.hpp"

namespace cmanifold {

enum class Protocol { group_kfold, stratified_kfold, holdout };

inline std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::group_kfold: return "group_kfold";
        case Protocol::stratified_kfold: return "stratified_kfold";
        case Protocol::holdout: return "holdout";
    }
    return "?";
}

inline Protocol parse_protocol(const std::string& s) {
    for (auto p : {Protocol::group_kfold, Protocol::stratified_kfold, Protocol::holdout})
        if (protocol_name(p) == s) return p;
    throw ValidationError("unknown protocol: " + s);
}

inline const std::vector<std::uint64_t>& default_seeds() {
    static const std::vector<std::uint64_t> s{42, 123, 456};
    return s;
}

/// Test-fold index per record; -1 marks rows that are only ever trained on.
struct FoldPlan {
    Protocol protocol = Protocol::group_kfold;
    int n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;

    std::vector<std::size_t> test_indices(int f) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == f) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(int f) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != f) out.push_back(i);
        return out;
    }
};

/// Groups shuffled by seed, then largest-first into the currently smallest fold.
inline FoldPlan group_kfold(std::span<const std::int64_t> groups, int k = 5, std::uint64_t seed = 42) {
    require(k >= 2, "group_kfold: need at least 2 folds");
    std::map<std::int64_t, std::size_t> sizes;
    for (auto g : groups) sizes[g]++;
    if (sizes.size() < static_cast<std::size_t>(k))
        throw ValidationError(fmt::format("group_kfold: {} groups is fewer than {} folds", sizes.size(), k));
    std::vector<std::pair<std::int64_t, std::size_t>> order(sizes.begin(), sizes.end());
    auto rng = make_stream(seed, {stream::folds});
    seeded_shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
    std::map<std::int64_t, int> fold_of_group;
    for (const auto& [g, n] : order) {
        const auto f = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
        fold_of_group[g] = f;
        load[static_cast<std::size_t>(f)] += n;
    }
    FoldPlan p{Protocol::group_kfold, k, seed, {}};
    p.fold_of.reserve(groups.size());
    for (auto g : groups) p.fold_of.push_back(fold_of_group[g]);
    return p;
}

/// Each class shuffled by seed and dealt round-robin, so per-fold class counts differ by at most one.
inline FoldPlan stratified_kfold(std::span<const int> y, int k = 3, std::uint64_t seed = 42) {
    require(k >= 2, "stratified_kfold: need at least 2 folds");
    check_binary(y);
    require(y.size() >= static_cast<std::size_t>(k), fmt::format("stratified_kfold: {} rows is fewer than {} folds", y.size(), k));
    FoldPlan p{Protocol::stratified_kfold, k, seed, std::vector<int>(y.size(), 0)};
    auto rng = make_stream(seed, {stream::folds});
    std::size_t dealt = 0;
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        seeded_shuffle(idx.begin(), idx.end(), rng);
        for (auto i : idx) p.fold_of[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    }
    return p;
}

/// Stratified single split: fold 0 is the test share, everything else -1.
inline FoldPlan holdout(std::span<const int> y, double test_fraction = 0.2, std::uint64_t seed = 42) {
    require(test_fraction > 0 && test_fraction < 1, "holdout: fraction must lie in (0, 1)");
    check_binary(y);
    FoldPlan p{Protocol::holdout, 1, seed, std::vector<int>(y.size(), -1)};
    auto rng = make_stream(seed, {stream::folds});
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        seeded_shuffle(idx.begin(), idx.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
        for (std::size_t t = 0; t < n_test; ++t) p.fold_of[idx[t]] = 0;
    }
    return p;
}

inline FoldPlan make_folds(Protocol protocol, std::span<const std::int64_t> groups, std::span<const int> y,
                           std::uint64_t seed, int k = 0, double holdout_fraction = 0.2) {
    switch (protocol) {
        case Protocol::group_kfold: return group_kfold(groups, k > 0 ? k : 5, seed);
        case Protocol::stratified_kfold: return stratified_kfold(y, k > 0 ? k : 3, seed);
        case Protocol::holdout: return holdout(y, holdout_fraction, seed);
    }
    throw ValidationError("unknown protocol");
}

struct Leak {
    int fold = 0;
    std::int64_t group = 0;
};

/// Groups that appear in both the train and test side of some fold.
inline std::vector<Leak> group_leaks(const FoldPlan& plan, std::span<const std::int64_t> groups) {
    require(plan.fold_of.size() == groups.size(), "group_leaks: plan and groups differ in length");
    std::vector<Leak> out;
    for (int f = 0; f < plan.n_folds; ++f) {
        std::set<std::int64_t> tr, te;
        for (std::size_t i = 0; i < groups.size(); ++i) (plan.fold_of[i] == f ? te : tr).insert(groups[i]);
        for (auto g : te)
            if (tr.count(g)) out.push_back({f, g});
    }
    return out;
}

}  // namespace cmanifold
