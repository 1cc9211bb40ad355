#include <catch2/catch_amalgamated.hpp>

#include "qmask/checks.hpp"
#include "qmask/entropy.hpp"

using namespace qmask;
using Catch::Matchers::WithinAbs;

TEST_CASE("entropy of known spectra", "[entropy]") {
    const std::vector<double> flat4{0.25, 0.25, 0.25, 0.25};
    CHECK_THAT(entropy_of_spectrum(flat4), WithinAbs(2.0, 1e-15));
    const std::vector<double> pure{1.0, 0.0};
    CHECK(entropy_of_spectrum(pure) == 0.0);
    // Tiny negative round-off is clipped, not an error.
    const std::vector<double> noisy{1.0 + 1e-13, -1e-13};
    CHECK_THAT(entropy_of_spectrum(noisy), WithinAbs(0.0, 1e-12));
    const std::vector<double> bad{1.1, -0.1};
    CHECK_THROWS(entropy_of_spectrum(bad));
}

TEST_CASE("maximally entangled baselines", "[entropy]") {
    for (std::size_t d : {2u, 3u, 4u}) {
        const DensityOperator phi = maximally_entangled(d).density();
        const double ld = std::log2(static_cast<double>(d));
        CHECK_THAT(mutual_information(phi, {lbl::A}, {lbl::B}), WithinAbs(2 * ld, 1e-10));
        CHECK_THAT(coherent_information(phi, {lbl::A}, {lbl::B}), WithinAbs(ld, 1e-10));
        CHECK_THAT(conditional_entropy(phi, {lbl::A}, {lbl::B}), WithinAbs(-ld, 1e-10));
        CHECK_THAT(entropy(phi, {lbl::A, lbl::B}), WithinAbs(0.0, 1e-10));
    }
}

TEST_CASE("classical joint distribution matches Shannon quantities", "[entropy]") {
    // p(x, y) on 2x2, diagonal embedding.
    const std::vector<double> p{0.4, 0.1, 0.2, 0.3};
    const ComplexMatrix m = ComplexMatrix::diagonal(p);
    const DensityOperator rho(m, SubsystemShape({"X", "Y"}, {2, 2}));
    auto H = [](std::initializer_list<double> v) {
        double s = 0;
        for (double x : v)
            if (x > 0) s -= x * std::log2(x);
        return s;
    };
    const double hxy = H({0.4, 0.1, 0.2, 0.3}), hx = H({0.5, 0.5}), hy = H({0.6, 0.4});
    CHECK_THAT(entropy(rho, {"X", "Y"}), WithinAbs(hxy, 1e-12));
    CHECK_THAT(conditional_entropy(rho, {"X"}, {"Y"}), WithinAbs(hxy - hy, 1e-12));
    CHECK_THAT(mutual_information(rho, {"X"}, {"Y"}), WithinAbs(hx + hy - hxy, 1e-12));
}

TEST_CASE("conditional mutual information chain rule", "[entropy]") {
    Rng rng(21);
    const DensityOperator rho = random_density(SubsystemShape({"A", "B", "C"}, {2, 2, 2}), rng);
    const double lhs = mutual_information(rho, {"A"}, {"B", "C"});
    const double rhs = mutual_information(rho, {"A"}, {"C"}) + mutual_information(rho, {"A"}, {"B"}, {"C"});
    CHECK_THAT(lhs, WithinAbs(rhs, 1e-10));
}

TEST_CASE("strong subadditivity on random states", "[entropy][property]") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        Rng rng(mix_seed(99, s));
        const DensityOperator rho = random_density(SubsystemShape({"A", "B", "C"}, {2, 2, 2}), rng, 1 + s % 8);
        CHECK(mutual_information(rho, {"A"}, {"B"}, {"C"}) >= -1e-10);
        CHECK(mutual_information(rho, {"A"}, {"B"}) >= -1e-10);
    }
}

TEST_CASE("overlapping groups are rejected", "[entropy]") {
    const DensityOperator phi = maximally_entangled(2).density();
    CHECK_THROWS_AS(mutual_information(phi, {lbl::A}, {lbl::A}), LabelError);
    CHECK_THROWS_AS(entropy(phi, {"Z"}), LabelError);
}

TEST_CASE("binary entropy and star", "[entropy]") {
    CHECK(h2(0.0) == 0.0);
    CHECK(h2(1.0) == 0.0);
    CHECK_THAT(h2(0.5), WithinAbs(1.0, 1e-15));
    CHECK_THAT(h2(0.11), WithinAbs(h2(0.89), 1e-15));
    CHECK_THAT(star(0.1, 0.2), WithinAbs(0.9 * 0.2 + 0.1 * 0.8, 1e-15));
    CHECK_THAT(star(0.5, 0.3), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(h2(1.5), DomainError);
    CHECK_THROWS_AS(star(-0.1, 0.2), DomainError);
    const auto bs = binary_entropy_star(0.2, 0.1, 0.3);
    CHECK_THAT(bs.h2, WithinAbs(h2(0.2), 1e-15));
    CHECK_THAT(bs.star, WithinAbs(star(0.1, 0.3), 1e-15));
}

TEST_CASE("min-entropy saturation cases", "[entropy][min-entropy]") {
    const MinEntropyOptions opt{4, 1, 3000};
    for (std::size_t d : {2u, 3u}) {
        const double ld = std::log2(static_cast<double>(d));
        const DensityOperator phi = maximally_entangled(d).density();
        const auto r = min_entropy(phi, {lbl::B}, opt);
        CHECK_THAT(r.value, WithinAbs(-ld, 1e-9));
        const DensityOperator mixed = DensityOperator::maximally_mixed(SubsystemShape({lbl::A, lbl::B}, {d, 2}));
        const auto m = min_entropy(mixed, {lbl::B}, opt);
        CHECK_THAT(m.value, WithinAbs(ld, 1e-9));
        CHECK(m.label == "lower bound");
    }
}

TEST_CASE("min-entropy with a fixed sigma is a lower bound of the optimum", "[entropy][min-entropy]") {
    Rng rng(3);
    const DensityOperator rho = random_density(SubsystemShape({lbl::A, lbl::B}, {2, 2}), rng);
    const double fixed = min_entropy_fixed(rho, DensityOperator::maximally_mixed(SubsystemShape({lbl::B}, {2})));
    const auto opt = min_entropy(rho, {lbl::B}, {4, 2, 2000});
    CHECK(opt.value >= fixed - 1e-12);
    CHECK(opt.value <= conditional_entropy(rho, {lbl::A}, {lbl::B}) + 1e-9);
}

TEST_CASE("min-entropy can be negative for entangled states", "[entropy][min-entropy]") {
    // sqrt(0.9)|00> + sqrt(0.1)|11>: H_min(A|B) = -log2((sqrt(.9)+sqrt(.1))^2).
    const PureState psi({std::sqrt(0.9), 0, 0, std::sqrt(0.1)}, SubsystemShape({lbl::A, lbl::B}, {2, 2}));
    const double exact = -std::log2(std::pow(std::sqrt(0.9) + std::sqrt(0.1), 2));
    const auto r = min_entropy(psi.density(), {lbl::B}, {6, 4, 4000});
    CHECK(r.value < 0);
    CHECK(r.value <= exact + 1e-9);
    CHECK_THAT(r.value, WithinAbs(exact, 1e-6));
}

TEST_CASE("min-entropy bracket on random states", "[entropy][min-entropy][property]") {
    const auto s = min_entropy_bracket_trials(40, 17);
    INFO("worst excess " << s.worst);
    CHECK(s.pass);
}

TEST_CASE("Csiszar sum identity", "[entropy][property]") {
    const auto two = csiszar_trials(40, 8, 2);
    CHECK(two.worst <= 1e-9);
    const auto three = csiszar_trials(10, 8, 3);
    CHECK(three.worst <= 1e-9);
}

TEST_CASE("continuity bound holds on nearby states", "[entropy][property]") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(mix_seed(5, s));
        const SubsystemShape shape({"X", "Y"}, {2, 2});
        const DensityOperator rho = random_density(shape, rng);
        const DensityOperator other = random_density(shape, rng);
        const double t = 0.05;
        const DensityOperator sigma(rho.matrix() * cplx(1 - t) + other.matrix() * cplx(t), shape);
        const auto r = afw_bound(rho, sigma, {"X"}, {"Y"});
        CHECK(r.lhs <= r.rhs);
        CHECK(r.trace_distance <= 2 * t + 1e-12);
    }
}
