#include "attnmask/error.hpp"
#include "attnmask/maxflow.hpp"
#include "attnmask/random.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <limits>

using namespace attnmask;

namespace {

using oracle::SmallGraph;

double cut_value(const SmallGraph& g, const FlowGraph& f) {
    double c = 0;
    for (int i = 0; i < g.n; ++i) c += f.in_source_segment(i) ? g.snk[i] : g.src[i];
    for (const auto& e : g.edges) {
        const bool a = f.in_source_segment(e.a), b = f.in_source_segment(e.b);
        if (a && !b) c += e.cap;
        if (b && !a) c += e.rev;
    }
    return c;
}

SmallGraph random_graph(Rng& rng, int n) {
    SmallGraph g{n, std::vector<double>(n), std::vector<double>(n), {}};
    for (int i = 0; i < n; ++i) {
        g.src[i] = static_cast<double>(rng.below(4));
        g.snk[i] = static_cast<double>(rng.below(4));
    }
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rng.below(2)) g.edges.push_back({a, b, double(rng.below(4)), double(rng.below(4))});
    return g;
}

double solve(const SmallGraph& g, FlowGraph& f) {
    for (int i = 0; i < g.n; ++i) f.add_terminal_weights(i, g.src[i], g.snk[i]);
    for (const auto& e : g.edges) f.add_edge(e.a, e.b, e.cap, e.rev);
    return f.max_flow();
}

}  // namespace

TEST_CASE("single pixel bottleneck") {
    PixelGraph g{1, 1, {3.0}, {1.0}, {}};
    const auto r = max_flow(g);
    CHECK(r.flow == 1.0);
    CHECK(r.source_side == std::vector<std::uint8_t>{1});
}

TEST_CASE("zero capacities and empty graphs") {
    PixelGraph g{3, 2, std::vector<double>(6, 0.0), std::vector<double>(6, 0.0), {{0, 1, 0.0}, {1, 2, 0.0}}};
    const auto r = max_flow(g);
    CHECK(r.flow == 0.0);
    CHECK(r.source_side == std::vector<std::uint8_t>(6, 0));
    PixelGraph empty{0, 0, {}, {}, {}};
    CHECK(max_flow(empty).flow == 0.0);
}

TEST_CASE("max flow equals the brute-force min cut on every small graph") {
    // All graphs on 2 nodes with capacities in {0..3} are enumerated fully;
    // larger sizes via a dense random sample.
    int checked = 0;
    for (int s0 = 0; s0 < 4; ++s0)
        for (int t0 = 0; t0 < 4; ++t0)
            for (int s1 = 0; s1 < 4; ++s1)
                for (int t1 = 0; t1 < 4; ++t1)
                    for (int c = 0; c < 4; ++c)
                        for (int r = 0; r < 4; ++r) {
                            SmallGraph g{2, {double(s0), double(s1)}, {double(t0), double(t1)}, {{0, 1, double(c), double(r)}}};
                            FlowGraph f(2);
                            const double flow = solve(g, f);
                            REQUIRE(flow == oracle::min_cut(g));
                            REQUIRE(cut_value(g, f) == flow);
                            ++checked;
                        }
    Rng rng(17);
    for (int n = 1; n <= 6; ++n)
        for (int trial = 0; trial < 3000; ++trial) {
            const auto g = random_graph(rng, n);
            FlowGraph f(n);
            const double flow = solve(g, f);
            REQUIRE(flow == oracle::min_cut(g));
            REQUIRE(cut_value(g, f) == flow);
            ++checked;
        }
    CHECK(checked == 4096 + 18000);
}

TEST_CASE("max flow is deterministic") {
    Rng rng(3);
    const std::size_t w = 30, h = 20, n = w * h;
    PixelGraph g{w, h, std::vector<double>(n), std::vector<double>(n), {}};
    for (std::size_t i = 0; i < n; ++i) {
        g.source_caps[i] = rng.uniform(0, 5);
        g.sink_caps[i] = rng.uniform(0, 5);
    }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (x + 1 < w) g.nlinks.push_back({std::uint32_t(y * w + x), std::uint32_t(y * w + x + 1), rng.uniform(0, 3)});
            if (y + 1 < h) g.nlinks.push_back({std::uint32_t(y * w + x), std::uint32_t((y + 1) * w + x), rng.uniform(0, 3)});
        }
    const auto a = max_flow(g);
    const auto b = max_flow(g);
    CHECK(a.flow == b.flow);
    CHECK(a.source_side == b.source_side);
}

TEST_CASE("invalid capacities are rejected") {
    FlowGraph f(2);
    CHECK_THROWS_AS(f.add_terminal_weights(0, -1.0, 0.0), InvariantError);
    CHECK_THROWS_AS(f.add_edge(0, 1, std::numeric_limits<double>::infinity(), 0.0), InvariantError);
    CHECK_THROWS_AS(f.add_edge(0, 5, 1.0, 1.0), ShapeError);
    PixelGraph g{2, 1, {1.0}, {1.0, 1.0}, {}};
    CHECK_THROWS_AS(max_flow(g), ShapeError);
}
