#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "matcore.hpp"

namespace qmask {

struct PatternSearchOptions {
    double initial_step = 0.25;
    double decay = 0.5;
    double floor = 1e-4;
    std::size_t max_evals = 20000;
    // Poll along a freshly rotated orthonormal basis after every contraction
    // instead of the fixed coordinate axes. Helps on ridges of nonsmooth objectives.
    bool rotate_directions = false;
    std::uint64_t seed = 0;
};

struct PatternSearchResult {
    std::vector<double> x;
    double value = -std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    bool budget_exhausted = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

namespace detail {

inline std::vector<std::vector<double>> random_orthonormal_basis(std::size_t n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < n) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal(rng);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                double d = 0;
                for (std::size_t i = 0; i < n; ++i) d += b[i] * v[i];
                for (std::size_t i = 0; i < n; ++i) v[i] -= d * b[i];
            }
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis;
}

inline double safe_eval(const Objective& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Maximize f by a compass/pattern search with geometric step decay.
inline PatternSearchResult pattern_search(const Objective& f, std::vector<double> x0,
                                          const PatternSearchOptions& opt = {}) {
    PatternSearchResult res;
    res.x = std::move(x0);
    res.value = detail::safe_eval(f, res.x);
    res.evals = 1;
    const std::size_t n = res.x.size();
    if (n == 0) return res;

    Rng rng(opt.seed);
    std::vector<std::vector<double>> dirs;
    auto reset_dirs = [&] {
        if (opt.rotate_directions) {
            dirs = detail::random_orthonormal_basis(n, rng);
        } else {
            dirs.assign(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;
        }
    };
    reset_dirs();

    double step = opt.initial_step;
    std::vector<double> trial(n);
    while (step >= opt.floor) {
        bool improved = false;
        for (std::size_t d = 0; d < dirs.size() && !improved; ++d) {
            for (double sign : {1.0, -1.0}) {
                if (res.evals >= opt.max_evals) {
                    res.budget_exhausted = true;
                    return res;
                }
                for (std::size_t i = 0; i < n; ++i) trial[i] = res.x[i] + sign * step * dirs[d][i];
                const double v = detail::safe_eval(f, trial);
                ++res.evals;
                if (v > res.value) {
                    res.value = v;
                    res.x = trial;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            step *= opt.decay;
            if (opt.rotate_directions) reset_dirs();
        }
    }
    return res;
}

}  // namespace qmask
