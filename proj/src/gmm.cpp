#include "attnmask/gmm.hpp"

#include "attnmask/error.hpp"
#include "attnmask/parallel.hpp"
#include "attnmask/random.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <numbers>

namespace attnmask {

namespace {

constexpr int kMaxLloydIterations = 20;
const double kLogTwoPi3 = 3.0 * std::log(2.0 * std::numbers::pi);

}  // namespace

void GaussianComponent::finalize() {
    const double det = covariance.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) throw InvariantError("GMM covariance is not positive definite");
    inverse = covariance.inverse();
    log_det = std::log(det);
}

double GaussianComponent::log_density(const Color& x) const {
    const Color d = x - mean;
    return -0.5 * (kLogTwoPi3 + log_det + d.dot(inverse * d));
}

Gmm::Gmm(std::vector<GaussianComponent> components) : components_(std::move(components)) {}

double Gmm::component_energy(std::size_t k, const Color& x) const {
    const auto& c = components_[k];
    return -std::log(c.weight) - c.log_density(x);
}

std::size_t Gmm::best_component(const Color& x) const {
    std::size_t best = 0;
    double best_e = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double e = component_energy(k, x);
        if (e < best_e) {
            best_e = e;
            best = k;
        }
    }
    return best;
}

double Gmm::data_energy(const Color& x) const { return component_energy(best_component(x), x); }

double Gmm::mixture_energy(const Color& x) const {
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        logs[k] = std::log(components_[k].weight) + components_[k].log_density(x);
        top = std::max(top, logs[k]);
    }
    double s = 0.0;
    for (double l : logs) s += std::exp(l - top);
    return -(top + std::log(s));
}

void Gmm::validate() const {
    if (components_.empty()) throw InvariantError("GMM has no components");
    double total = 0.0;
    const double floor_det = kCovarianceFloor * kCovarianceFloor * kCovarianceFloor;
    for (const auto& c : components_) {
        total += c.weight;
        if (!(c.weight > 0.0)) throw InvariantError("GMM component with non-positive weight");
        if (c.covariance.determinant() < floor_det * (1.0 - 1e-9))
            throw InvariantError("GMM covariance determinant below regularization floor");
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvariantError("GMM weights do not sum to 1");
}

Color pixel_color(const RgbImage& image, std::size_t index) {
    return Color(image.data[3 * index], image.data[3 * index + 1], image.data[3 * index + 2]);
}

Gmm estimate_gmm(std::span<const Color> samples, std::span<const int> labels, std::size_t components,
                 std::vector<int>* remap) {
    if (samples.size() != labels.size()) throw ShapeError("GMM samples and labels differ in length");
    std::vector<std::size_t> counts(components, 0);
    std::vector<Color> sums(components, Color::Zero());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int k = labels[i];
        if (k < 0) continue;
        if (static_cast<std::size_t>(k) >= components) throw ShapeError("GMM label out of range");
        ++counts[k];
        sums[k] += samples[i];
    }
    std::vector<Color> means(components);
    std::vector<Eigen::Matrix3d> scatter(components, Eigen::Matrix3d::Zero());
    for (std::size_t k = 0; k < components; ++k)
        if (counts[k]) means[k] = sums[k] / static_cast<double>(counts[k]);
    std::size_t total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int k = labels[i];
        if (k < 0) continue;
        const Color d = samples[i] - means[k];
        scatter[k] += d * d.transpose();
        ++total;
    }

    std::vector<GaussianComponent> out;
    if (remap) remap->assign(components, -1);
    for (std::size_t k = 0; k < components; ++k) {
        if (counts[k] == 0) continue;
        GaussianComponent c;
        c.weight = static_cast<double>(counts[k]) / static_cast<double>(total);
        c.mean = means[k];
        c.covariance = scatter[k] / static_cast<double>(counts[k]) + kCovarianceFloor * Eigen::Matrix3d::Identity();
        c.finalize();
        if (remap) (*remap)[k] = static_cast<int>(out.size());
        out.push_back(c);
    }
    return Gmm(std::move(out));
}

Gmm fit_kmeans_gmm(std::span<const Color> samples, std::size_t components, std::uint64_t seed) {
    if (components == 0) throw ConfigError("GMM needs at least one component");
    if (samples.size() < components)
        throw DegenerateRegionError("GMM fit needs at least " + std::to_string(components) + " samples, got " +
                                    std::to_string(samples.size()));
    Rng rng(seed);
    const std::size_t n = samples.size();

    // k-means++ seeding.
    std::vector<Color> centers;
    centers.push_back(samples[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (samples[i] - centers[0]).squaredNorm();
    while (centers.size() < components) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0)) break;  // every sample already coincides with a center
        const double r = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (acc > r) {
                pick = i;
                break;
            }
        }
        centers.push_back(samples[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (samples[i] - centers.back()).squaredNorm());
    }

    // Lloyd iterations.
    const std::size_t K = centers.size();
    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (samples[i] - centers[0]).squaredNorm();
            for (std::size_t k = 1; k < K; ++k) {
                const double d = (samples[i] - centers[k]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(k);
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Color> sums(K, Color::Zero());
        std::vector<std::size_t> counts(K, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[labels[i]] += samples[i];
            ++counts[labels[i]];
        }
        for (std::size_t k = 0; k < K; ++k)
            if (counts[k]) centers[k] = sums[k] / static_cast<double>(counts[k]);
    }
    return estimate_gmm(samples, labels, K);
}

GmmPair init_gmms(const RgbImage& image, const Trimap& trimap, std::size_t components, std::uint64_t seed) {
    if (image.width != trimap.width || image.height != trimap.height)
        throw ShapeError("image and trimap dimensions differ");
    std::vector<Color> fg, bg;
    for (std::size_t i = 0; i < trimap.pixels(); ++i) {
        const auto l = trimap.labels[i];
        (l == TrimapLabel::SureFg || l == TrimapLabel::ProbFg ? fg : bg).push_back(pixel_color(image, i));
    }
    if (fg.size() < components || bg.size() < components)
        throw DegenerateRegionError("trimap has " + std::to_string(fg.size()) + " candidate-fg and " +
                                    std::to_string(bg.size()) + " candidate-bg pixels; need " +
                                    std::to_string(components) + " of each");
    return GmmPair{fit_kmeans_gmm(fg, components, mix_seed(seed) ^ 0xF6ull),
                   fit_kmeans_gmm(bg, components, mix_seed(seed) ^ 0xB6ull)};
}

std::vector<int> assign_components(const RgbImage& image, std::span<const std::uint8_t> region, const Gmm& gmm) {
    if (region.size() != image.pixels()) throw ShapeError("assignment region does not match image");
    if (gmm.empty()) throw InvariantError("cannot assign against an empty GMM");
    std::vector<int> out(image.pixels(), -1);
    parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            if (region[i]) out[i] = static_cast<int>(gmm.best_component(pixel_color(image, i)));
    });
    return out;
}

GmmPair learn_gmms(const RgbImage& image, const SubjectMask& mask, std::span<const int> assignments) {
    if (mask.data.size() != image.pixels() || assignments.size() != image.pixels())
        throw ShapeError("learn_gmms inputs disagree in size");
    std::vector<Color> fg, bg;
    std::vector<int> fg_labels, bg_labels;
    int fg_k = 0, bg_k = 0;
    for (std::size_t i = 0; i < image.pixels(); ++i) {
        const int a = assignments[i];
        if (a < 0) throw InvariantError("pixel " + std::to_string(i) + " has no component assignment");
        if (mask.data[i]) {
            fg.push_back(pixel_color(image, i));
            fg_labels.push_back(a);
            fg_k = std::max(fg_k, a + 1);
        } else {
            bg.push_back(pixel_color(image, i));
            bg_labels.push_back(a);
            bg_k = std::max(bg_k, a + 1);
        }
    }
    if (fg.empty()) throw DegenerateRegionError("foreground region is empty");
    if (bg.empty()) throw DegenerateRegionError("background region is empty");
    return GmmPair{estimate_gmm(fg, fg_labels, static_cast<std::size_t>(fg_k)),
                   estimate_gmm(bg, bg_labels, static_cast<std::size_t>(bg_k))};
}

double data_term_energy(const RgbImage& image, const SubjectMask& mask, std::span<const int> assignments,
                        const GmmPair& gmms) {
    double total = 0.0;
    for (std::size_t i = 0; i < image.pixels(); ++i) {
        const Gmm& g = mask.data[i] ? gmms.foreground : gmms.background;
        total += g.component_energy(static_cast<std::size_t>(assignments[i]), pixel_color(image, i));
    }
    return total;
}

}  // namespace attnmask
