#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rlsft {

// First-order adaptive-moment optimizer with bias correction. Shared by the
// RL and SFT trainers (separate state instances).
struct AdamState {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<double> m, v;

    explicit AdamState(size_t n, double lr_ = 1e-2) : lr(lr_), m(n, 0.0), v(n, 0.0) {}

    // One minimization step along grad.
    void descend(std::vector<double>& params, const std::vector<double>& grad) {
        if (params.size() != m.size() || grad.size() != m.size())
            throw std::invalid_argument("AdamState: size mismatch");
        ++t;
        double c1 = 1.0 - std::pow(beta1, double(t));
        double c2 = 1.0 - std::pow(beta2, double(t));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }

    // One maximization step (gradient ascent).
    void ascend(std::vector<double>& params, const std::vector<double>& grad) {
        if (params.size() != m.size() || grad.size() != m.size())
            throw std::invalid_argument("AdamState: size mismatch");
        ++t;
        double c1 = 1.0 - std::pow(beta1, double(t));
        double c2 = 1.0 - std::pow(beta2, double(t));
        for (size_t i = 0; i < params.size(); ++i) {
            double g = -grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

}  // namespace rlsft
