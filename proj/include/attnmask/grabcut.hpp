#pragma once

#include "attnmask/gmm.hpp"
#include "attnmask/image.hpp"
#include "attnmask/maxflow.hpp"
#include "attnmask/trimap.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace attnmask {

struct GrabCutParams {
    std::size_t components = 5;
    double gamma = 50.0;
    std::size_t iterations = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SegmentationReport {
    double beta = 0.0;
    double hard_link_capacity = 0.0;
    std::size_t iterations_run = 0;
    bool converged = false;
    /// True when the trimap had no probable pixels and no cut was needed.
    bool trivial = false;
    /// energies[0] is the initial labelling under the initial models, then
    /// one entry per completed assign -> learn -> cut round.
    std::vector<double> energies;
    std::vector<double> flows;
    std::vector<std::size_t> changed_pixels;
};

/// 1 / (2 * mean ||c_i - c_j||^2) over 8-connected neighbour pairs; 0 for a flat image.
double compute_beta(const RgbImage& image);

/// gamma * exp(-beta * ||c_i - c_j||^2) / distance(i, j), each unordered
/// 8-neighbour pair listed once.
std::vector<PixelGraph::NLink> neighbour_links(const RgbImage& image, double gamma, double beta);

/// Hard-constraint capacity: 9 * gamma * (max neighbour count).
double hard_link_capacity(const RgbImage& image, double gamma);

/// t-links from the per-side data term (min over components of
/// -log pi_k - log N_k) shifted so the smaller side is 0; SureFg/SureBg
/// pixels get the hard capacity toward their terminal.
PixelGraph build_pixel_graph(const RgbImage& image, const Trimap& trimap, const GmmPair& gmms,
                             const std::vector<PixelGraph::NLink>& nlinks, double hard_capacity);

/// Data term (best component per side) plus smoothness over cut neighbour pairs.
double grabcut_energy(const RgbImage& image, const SubjectMask& mask, const GmmPair& gmms,
                      const std::vector<PixelGraph::NLink>& nlinks);

SubjectMask segment(const RgbImage& image, const Trimap& trimap, const GrabCutParams& params,
                    SegmentationReport* report = nullptr);

}  // namespace attnmask
