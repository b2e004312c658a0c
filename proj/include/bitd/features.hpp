#pragma once

#include <vector>

namespace bitd {

enum class FeatureKind { one_hot, triangular_overlap };

/// Deterministic state -> feature encoding over the nonterminal state ids
/// 0..n_states-1. Triangular overlap interpolates each state between its two
/// surrounding anchors, so neighboring states share feature mass.
struct FeatureMap {
    FeatureKind kind = FeatureKind::one_hot;
    int n_states = 0;
    std::vector<int> anchors;  // triangular kind only; strictly increasing

    int dim() const;
    std::vector<double> encode(int state) const;

    static FeatureMap one_hot(int n_states);
    static FeatureMap triangular(int n_states, std::vector<int> anchors);
};

}  // namespace bitd
