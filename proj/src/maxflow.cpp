#include "attnmask/maxflow.hpp"

#include "attnmask/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attnmask {

namespace {

constexpr int kInfiniteDist = std::numeric_limits<int>::max();

void check_capacity(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvariantError("flow capacities must be finite and >= 0");
}

}  // namespace

FlowGraph::FlowGraph(std::size_t nodes, std::size_t edge_hint) : nodes_(nodes) { arcs_.reserve(2 * edge_hint); }

std::size_t FlowGraph::add_nodes(std::size_t count) {
    const std::size_t first = nodes_.size();
    nodes_.resize(first + count);
    solved_ = false;
    return first;
}

void FlowGraph::add_terminal_weights(std::size_t node, double source_cap, double sink_cap) {
    check_capacity(source_cap);
    check_capacity(sink_cap);
    Node& n = nodes_.at(node);
    const double delta = n.terminal_residual;
    if (delta > 0.0)
        source_cap += delta;
    else
        sink_cap -= delta;
    flow_ += std::min(source_cap, sink_cap);
    n.terminal_residual = source_cap - sink_cap;
    solved_ = false;
}

void FlowGraph::add_edge(std::size_t a, std::size_t b, double cap, double reverse_cap) {
    check_capacity(cap);
    check_capacity(reverse_cap);
    if (a >= nodes_.size() || b >= nodes_.size()) throw ShapeError("flow edge endpoint out of range");
    if (a == b || (cap == 0.0 && reverse_cap == 0.0)) return;
    const int fwd = static_cast<int>(arcs_.size());
    const int rev = fwd + 1;
    arcs_.push_back(Arc{static_cast<int>(b), nodes_[a].first, rev, cap});
    arcs_.push_back(Arc{static_cast<int>(a), nodes_[b].first, fwd, reverse_cap});
    nodes_[a].first = fwd;
    nodes_[b].first = rev;
    solved_ = false;
}

void FlowGraph::set_active(int node) {
    Node& n = nodes_[node];
    if (!n.active) {
        n.active = true;
        active_.push_back(node);
    }
}

int FlowGraph::next_active() {
    while (!active_.empty()) {
        const int i = active_.front();
        active_.pop_front();
        nodes_[i].active = false;
        if (nodes_[i].parent != kNone) return i;
    }
    return kNone;
}

void FlowGraph::augment(int middle) {
    double bottleneck = arcs_[middle].residual;

    int i = arcs_[arcs_[middle].sister].head;
    for (int a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
        bottleneck = std::min(bottleneck, arcs_[arcs_[a].sister].residual);
        i = arcs_[a].head;
    }
    bottleneck = std::min(bottleneck, nodes_[i].terminal_residual);

    i = arcs_[middle].head;
    for (int a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
        bottleneck = std::min(bottleneck, arcs_[a].residual);
        i = arcs_[a].head;
    }
    bottleneck = std::min(bottleneck, -nodes_[i].terminal_residual);

    arcs_[arcs_[middle].sister].residual += bottleneck;
    arcs_[middle].residual -= bottleneck;

    auto orphan = [this](int node) {
        nodes_[node].parent = kOrphan;
        orphans_.push_front(node);
    };

    i = arcs_[arcs_[middle].sister].head;
    for (int a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
        arcs_[a].residual += bottleneck;
        arcs_[arcs_[a].sister].residual -= bottleneck;
        const int up = arcs_[a].head;
        if (arcs_[arcs_[a].sister].residual == 0.0) orphan(i);
        i = up;
    }
    nodes_[i].terminal_residual -= bottleneck;
    if (nodes_[i].terminal_residual == 0.0) orphan(i);

    i = arcs_[middle].head;
    for (int a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
        arcs_[arcs_[a].sister].residual += bottleneck;
        arcs_[a].residual -= bottleneck;
        const int up = arcs_[a].head;
        if (arcs_[a].residual == 0.0) orphan(i);
        i = up;
    }
    nodes_[i].terminal_residual += bottleneck;
    if (nodes_[i].terminal_residual == 0.0) orphan(i);

    flow_ += bottleneck;
}

void FlowGraph::adopt_source_orphan(int i) {
    int best = kNone;
    int best_dist = kInfiniteDist;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        if (arcs_[arcs_[a0].sister].residual == 0.0) continue;
        int j = arcs_[a0].head;
        if (nodes_[j].in_sink || nodes_[j].parent == kNone) continue;

        int d = 0;
        for (;;) {
            if (nodes_[j].timestamp == time_) {
                d += nodes_[j].dist;
                break;
            }
            const int a = nodes_[j].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[j].timestamp = time_;
                nodes_[j].dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfiniteDist;
                break;
            }
            j = arcs_[a].head;
        }
        if (d == kInfiniteDist) continue;
        if (d < best_dist) {
            best = a0;
            best_dist = d;
        }
        for (j = arcs_[a0].head; nodes_[j].timestamp != time_; j = arcs_[nodes_[j].parent].head) {
            nodes_[j].timestamp = time_;
            nodes_[j].dist = d--;
        }
    }

    nodes_[i].parent = best;
    if (best != kNone) {
        nodes_[i].timestamp = time_;
        nodes_[i].dist = best_dist + 1;
        return;
    }
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        const int j = arcs_[a0].head;
        const int a = nodes_[j].parent;
        if (nodes_[j].in_sink || a == kNone) continue;
        if (arcs_[arcs_[a0].sister].residual > 0.0) set_active(j);
        if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
            nodes_[j].parent = kOrphan;
            orphans_.push_back(j);
        }
    }
}

void FlowGraph::adopt_sink_orphan(int i) {
    int best = kNone;
    int best_dist = kInfiniteDist;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        if (arcs_[a0].residual == 0.0) continue;
        int j = arcs_[a0].head;
        if (!nodes_[j].in_sink || nodes_[j].parent == kNone) continue;

        int d = 0;
        for (;;) {
            if (nodes_[j].timestamp == time_) {
                d += nodes_[j].dist;
                break;
            }
            const int a = nodes_[j].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[j].timestamp = time_;
                nodes_[j].dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfiniteDist;
                break;
            }
            j = arcs_[a].head;
        }
        if (d == kInfiniteDist) continue;
        if (d < best_dist) {
            best = a0;
            best_dist = d;
        }
        for (j = arcs_[a0].head; nodes_[j].timestamp != time_; j = arcs_[nodes_[j].parent].head) {
            nodes_[j].timestamp = time_;
            nodes_[j].dist = d--;
        }
    }

    nodes_[i].parent = best;
    if (best != kNone) {
        nodes_[i].timestamp = time_;
        nodes_[i].dist = best_dist + 1;
        return;
    }
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
        const int j = arcs_[a0].head;
        const int a = nodes_[j].parent;
        if (!nodes_[j].in_sink || a == kNone) continue;
        if (arcs_[a0].residual > 0.0) set_active(j);
        if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
            nodes_[j].parent = kOrphan;
            orphans_.push_back(j);
        }
    }
}

void FlowGraph::process_orphans() {
    while (!orphans_.empty()) {
        const int i = orphans_.front();
        orphans_.pop_front();
        if (nodes_[i].in_sink)
            adopt_sink_orphan(i);
        else
            adopt_source_orphan(i);
    }
}

double FlowGraph::max_flow() {
    if (solved_) return flow_;

    active_.clear();
    orphans_.clear();
    time_ = 0;
    for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
        Node& n = nodes_[idx];
        n.active = false;
        n.timestamp = 0;
        if (n.terminal_residual > 0.0) {
            n.in_sink = false;
            n.parent = kTerminal;
            n.dist = 1;
            set_active(static_cast<int>(idx));
        } else if (n.terminal_residual < 0.0) {
            n.in_sink = true;
            n.parent = kTerminal;
            n.dist = 1;
            set_active(static_cast<int>(idx));
        } else {
            n.parent = kNone;
        }
    }

    int current = kNone;
    for (;;) {
        int i = current;
        if (i != kNone && nodes_[i].parent == kNone) i = kNone;
        if (i == kNone) {
            i = next_active();
            if (i == kNone) break;
        }

        int middle = kNone;
        Node& ni = nodes_[i];
        if (!ni.in_sink) {
            for (int a = ni.first; a != kNone; a = arcs_[a].next) {
                if (arcs_[a].residual == 0.0) continue;
                const int j = arcs_[a].head;
                Node& nj = nodes_[j];
                if (nj.parent == kNone) {
                    nj.in_sink = false;
                    nj.parent = arcs_[a].sister;
                    nj.timestamp = ni.timestamp;
                    nj.dist = ni.dist + 1;
                    set_active(j);
                } else if (nj.in_sink) {
                    middle = a;
                    break;
                } else if (nj.timestamp <= ni.timestamp && nj.dist > ni.dist) {
                    nj.parent = arcs_[a].sister;
                    nj.timestamp = ni.timestamp;
                    nj.dist = ni.dist + 1;
                }
            }
        } else {
            for (int a = ni.first; a != kNone; a = arcs_[a].next) {
                if (arcs_[arcs_[a].sister].residual == 0.0) continue;
                const int j = arcs_[a].head;
                Node& nj = nodes_[j];
                if (nj.parent == kNone) {
                    nj.in_sink = true;
                    nj.parent = arcs_[a].sister;
                    nj.timestamp = ni.timestamp;
                    nj.dist = ni.dist + 1;
                    set_active(j);
                } else if (!nj.in_sink) {
                    middle = arcs_[a].sister;
                    break;
                } else if (nj.timestamp <= ni.timestamp && nj.dist > ni.dist) {
                    nj.parent = arcs_[a].sister;
                    nj.timestamp = ni.timestamp;
                    nj.dist = ni.dist + 1;
                }
            }
        }

        ++time_;
        if (middle != kNone) {
            current = i;
            augment(middle);
            process_orphans();
        } else {
            current = kNone;
        }
    }
    solved_ = true;
    return flow_;
}

bool FlowGraph::in_source_segment(std::size_t node) const {
    const Node& n = nodes_.at(node);
    return n.parent != kNone && !n.in_sink;
}

MaxFlowResult max_flow(const PixelGraph& graph) {
    const std::size_t n = graph.width * graph.height;
    if (graph.source_caps.size() != n || graph.sink_caps.size() != n)
        throw ShapeError("pixel graph t-link arrays do not match its dimensions");
    FlowGraph g(n, graph.nlinks.size());
    for (std::size_t i = 0; i < n; ++i) g.add_terminal_weights(i, graph.source_caps[i], graph.sink_caps[i]);
    for (const auto& e : graph.nlinks) g.add_edge(e.a, e.b, e.capacity, e.capacity);

    MaxFlowResult r;
    r.flow = g.max_flow();
    r.source_side.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.source_side[i] = g.in_source_segment(i) ? 1 : 0;
    return r;
}

}  // namespace attnmask
