#include "bitd/features.hpp"

#include <stdexcept>

namespace bitd {

int FeatureMap::dim() const {
    return kind == FeatureKind::one_hot ? n_states : static_cast<int>(anchors.size());
}

FeatureMap FeatureMap::one_hot(int n_states) {
    if (n_states <= 0) throw std::invalid_argument("FeatureMap: n_states must be positive");
    return FeatureMap{FeatureKind::one_hot, n_states, {}};
}

FeatureMap FeatureMap::triangular(int n_states, std::vector<int> anchors) {
    if (n_states <= 0) throw std::invalid_argument("FeatureMap: n_states must be positive");
    if (anchors.size() < 2) throw std::invalid_argument("FeatureMap: need at least 2 anchors");
    for (size_t i = 0; i < anchors.size(); ++i) {
        if (anchors[i] < 0 || anchors[i] >= n_states)
            throw std::invalid_argument("FeatureMap: anchor out of range");
        if (i > 0 && anchors[i] <= anchors[i - 1])
            throw std::invalid_argument("FeatureMap: anchors must be strictly increasing");
    }
    return FeatureMap{FeatureKind::triangular_overlap, n_states, std::move(anchors)};
}

std::vector<double> FeatureMap::encode(int state) const {
    if (state < 0 || state >= n_states) throw std::out_of_range("FeatureMap: state out of range");
    std::vector<double> x(dim(), 0.0);
    if (kind == FeatureKind::one_hot) {
        x[state] = 1.0;
        return x;
    }
    if (state <= anchors.front()) {
        x[0] = 1.0;
        return x;
    }
    if (state >= anchors.back()) {
        x[anchors.size() - 1] = 1.0;
        return x;
    }
    size_t j = 0;
    while (anchors[j + 1] < state) ++j;
    double gap = anchors[j + 1] - anchors[j];
    x[j] = (anchors[j + 1] - state) / gap;
    x[j + 1] = (state - anchors[j]) / gap;
    return x;
}

}  // namespace bitd
