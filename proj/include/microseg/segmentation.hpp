// The generated object: a symmetric categorical edge-state matrix over the
// trust-layer nodes. Edges are Selected or Unselected; a node belongs to the
// segmentation iff it has at least one Selected incident edge.
#pragma once

#include <cstdint>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/network.hpp"

namespace microseg {

enum class EdgeState : std::uint8_t { Unselected = 0, Selected = 1 };
constexpr int kEdgeCategories = 2;

class Segmentation {
public:
    Segmentation() = default;
    explicit Segmentation(int m) : m_(m), cat_(static_cast<std::size_t>(m) * m, 0) {
        require(m >= 1, "segmentation needs at least one node");
    }

    int m() const { return m_; }

    EdgeState at(int i, int j) const {
        return static_cast<EdgeState>(cat_[flat(i, j)]);
    }
    bool selected(int i, int j) const { return at(i, j) == EdgeState::Selected; }

    void set(int i, int j, EdgeState s) {
        require(i != j || s == EdgeState::Unselected, "diagonal must stay Unselected");
        cat_[flat(i, j)] = static_cast<std::uint8_t>(s);
        cat_[flat(j, i)] = static_cast<std::uint8_t>(s);
    }

    int selected_count() const {
        int c = 0;
        for (int i = 0; i < m_; ++i)
            for (int j = i + 1; j < m_; ++j)
                if (selected(i, j)) ++c;
        return c;
    }

    bool node_in(int i) const {
        for (int j = 0; j < m_; ++j)
            if (j != i && selected(i, j)) return true;
        return false;
    }

    bool empty() const { return selected_count() == 0; }

    bool operator==(const Segmentation& o) const { return m_ == o.m_ && cat_ == o.cat_; }
    bool operator!=(const Segmentation& o) const { return !(*this == o); }

private:
    std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * m_ + j; }

    int m_ = 0;
    std::vector<std::uint8_t> cat_;
};

// m*m mask of pairs eligible for selection: exactly the trust edges.
inline std::vector<std::uint8_t> candidate_mask(const TrustGraph& trust) {
    const int m = trust.node_count();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(m) * m, 0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (trust.has_edge(i, j)) mask[static_cast<std::size_t>(i) * m + j] = 1;
    return mask;
}

// Checks the Segmentation invariants against its trust graph.
inline bool segmentation_valid(const Segmentation& seg, const TrustGraph& trust) {
    if (seg.m() != trust.node_count()) return false;
    for (int i = 0; i < seg.m(); ++i) {
        if (seg.selected(i, i)) return false;
        for (int j = 0; j < seg.m(); ++j) {
            if (seg.at(i, j) != seg.at(j, i)) return false;
            if (seg.selected(i, j) && !trust.has_edge(i, j)) return false;
        }
    }
    return true;
}

} // namespace microseg
