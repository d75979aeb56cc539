#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

namespace attnmask {

/// s-t graph solved with the Boykov-Kolmogorov augmenting-path algorithm
/// (two search trees, path augmentation, orphan adoption). Terminal edges
/// are folded into a per-node residual: positive = source-connected,
/// negative = sink-connected.
class FlowGraph {
public:
    explicit FlowGraph(std::size_t nodes = 0, std::size_t edge_hint = 0);

    std::size_t add_nodes(std::size_t count);
    std::size_t node_count() const { return nodes_.size(); }

    /// Adds capacity source->node and node->sink. Both must be >= 0.
    void add_terminal_weights(std::size_t node, double source_cap, double sink_cap);
    /// Adds node_a->node_b with `cap` and node_b->node_a with `reverse_cap`.
    void add_edge(std::size_t a, std::size_t b, double cap, double reverse_cap);

    /// Runs to completion; repeated calls return the cached value.
    double max_flow();

    /// After max_flow(): true iff the node is reachable from the source in
    /// the residual graph. Nodes reachable from neither terminal go to the sink side.
    bool in_source_segment(std::size_t node) const;

private:
    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;

    struct Arc {
        int head;
        int next;
        int sister;
        double residual;
    };

    struct Node {
        int first = kNone;
        int parent = kNone;
        bool in_sink = false;
        bool active = false;
        double terminal_residual = 0.0;
        long timestamp = 0;
        int dist = 0;
    };

    void set_active(int node);
    int next_active();
    void augment(int middle_arc);
    void adopt_source_orphan(int node);
    void adopt_sink_orphan(int node);
    void process_orphans();

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<int> active_;
    std::deque<int> orphans_;
    double flow_ = 0.0;
    long time_ = 0;
    bool solved_ = false;
};

/// Pixel graph: one node per pixel, t-links per pixel, undirected n-links.
struct PixelGraph {
    struct NLink {
        std::uint32_t a;
        std::uint32_t b;
        double capacity;
    };

    std::size_t width = 0;
    std::size_t height = 0;
    /// Capacity source->pixel (paid when the pixel ends on the sink/background side).
    std::vector<double> source_caps;
    /// Capacity pixel->sink (paid when the pixel ends on the source/subject side).
    std::vector<double> sink_caps;
    std::vector<NLink> nlinks;
};

struct MaxFlowResult {
    double flow = 0.0;
    /// 1 = source (subject) side.
    std::vector<std::uint8_t> source_side;
};

MaxFlowResult max_flow(const PixelGraph& graph);

}  // namespace attnmask
