#pragma once

#include "attnmask/image.hpp"
#include "attnmask/trimap.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace attnmask {

using Color = Eigen::Vector3d;

/// Added to every estimated covariance: Sigma + kCovarianceFloor * I.
inline constexpr double kCovarianceFloor = 1e-5;

struct GaussianComponent {
    double weight = 0.0;
    Color mean = Color::Zero();
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();

    /// Cached from covariance by finalize().
    Eigen::Matrix3d inverse = Eigen::Matrix3d::Identity();
    double log_det = 0.0;

    void finalize();
    double log_density(const Color& x) const;
};

class Gmm {
public:
    Gmm() = default;
    explicit Gmm(std::vector<GaussianComponent> components);

    std::size_t size() const { return components_.size(); }
    bool empty() const { return components_.empty(); }
    const GaussianComponent& operator[](std::size_t k) const { return components_[k]; }
    const std::vector<GaussianComponent>& components() const { return components_; }

    /// -log(pi_k) - log N(x | mu_k, Sigma_k).
    double component_energy(std::size_t k, const Color& x) const;
    /// argmin_k component_energy, ties to the lowest k.
    std::size_t best_component(const Color& x) const;
    /// min_k component_energy.
    double data_energy(const Color& x) const;
    /// -log sum_k pi_k N_k(x).
    double mixture_energy(const Color& x) const;

    /// Weights sum to 1 within 1e-9; every covariance determinant >= floor^3.
    void validate() const;

private:
    std::vector<GaussianComponent> components_;
};

struct GmmPair {
    Gmm foreground;
    Gmm background;
};

Color pixel_color(const RgbImage& image, std::size_t index);

/// Moment estimates from per-sample labels in [0, components); empty
/// clusters are dropped and weights renormalized. Returns the model and,
/// through `remap`, old label -> new component index (or -1 if dropped).
Gmm estimate_gmm(std::span<const Color> samples, std::span<const int> labels, std::size_t components,
                 std::vector<int>* remap = nullptr);

/// Seeded k-means++ followed by Lloyd iterations and moment estimation.
Gmm fit_kmeans_gmm(std::span<const Color> samples, std::size_t components, std::uint64_t seed);

/// Candidate fg = SureFg/ProbFg, candidate bg = ProbBg/SureBg. Throws
/// DegenerateRegionError if either side has fewer than `components` pixels.
GmmPair init_gmms(const RgbImage& image, const Trimap& trimap, std::size_t components, std::uint64_t seed);

/// Per-pixel component index under `gmm` for pixels where region[i] != 0,
/// -1 elsewhere.
std::vector<int> assign_components(const RgbImage& image, std::span<const std::uint8_t> region, const Gmm& gmm);

/// Re-estimates both models from the current binary mask and per-pixel
/// component assignments (indices into the fg model for subject pixels, the
/// bg model otherwise). Throws DegenerateRegionError if a side is empty.
GmmPair learn_gmms(const RgbImage& image, const SubjectMask& mask, std::span<const int> assignments);

/// Sum over pixels of the hard-assignment data term for `mask` given models.
double data_term_energy(const RgbImage& image, const SubjectMask& mask, std::span<const int> assignments,
                        const GmmPair& gmms);

}  // namespace attnmask
