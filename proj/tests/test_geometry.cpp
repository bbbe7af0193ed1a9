#include "doctest.h"
#include "support.hpp"

#include "poisson_embed/errors.hpp"
#include "poisson_embed/geometry.hpp"

#include <Eigen/SVD>

using namespace poisson_embed;
using test_support::code_of;
using test_support::Uniform;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec vec3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// g = exp(2 phi) I with phi linear: Gamma^k_ab = d_ka dphi_b + d_kb dphi_a - d_ab dphi_k.
double conformal_gamma(const Vec& dphi, int k, int a, int b) {
    return (k == a ? dphi(b) : 0.0) + (k == b ? dphi(a) : 0.0) - (a == b ? dphi(k) : 0.0);
}

// Divergence form of Gamma_a differentiated by central differences of the
// metric values only.
Vec brute_force_contracted(const MetricField& g, const Vec& x, double step = 1e-4) {
    const int n = g.dim();
    auto density = [&](const Vec& y) {
        const Mat gy = g(y);
        return Mat(std::sqrt(gy.determinant()) * gy.inverse());
    };
    Vec div = Vec::Zero(n);
    for (int c = 0; c < n; ++c) {
        Vec xp = x, xm = x;
        xp(c) += step;
        xm(c) -= step;
        div += ((density(xp) - density(xm)) / (2.0 * step)).col(c);
    }
    const Mat gx = g(x);
    return -(gx * div) / std::sqrt(gx.determinant());
}

// Non-diagonal field with analytic value only.
MetricField wavy_metric() {
    return MetricField(2, [](const Vec& x) {
        Mat g(2, 2);
        g << 2.0 + std::sin(x(0)), 0.3 * std::cos(x(1) + x(0)), 0.3 * std::cos(x(1) + x(0)), 1.5 + x(1) * x(1);
        return g;
    });
}

Mat random_sym(Uniform& u, int n) {
    Mat a(n, n);
    for (int i = 0; i < n * n; ++i) a(i / n, i % n) = u(-1, 1);
    return 0.5 * (a + a.transpose());
}

} // namespace

TEST_CASE("euclidean metric has vanishing christoffel symbols") {
    for (int n : {2, 3}) {
        const MetricField g = MetricField::euclidean(n);
        const Vec x = Vec::Constant(n, 0.37);
        const ChristoffelData c = christoffel(g, x);
        for (const Mat& gk : c.gamma) CHECK(gk.cwiseAbs().maxCoeff() == 0.0);
        CHECK(c.contracted.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("christoffel of exp(2 x1) I matches the conformal formula") {
    const Vec a = vec2(1.0, 0.0);
    const MetricField g = MetricField::conformal_exp(a);
    const ChristoffelData origin = christoffel(g, vec2(0, 0));
    CHECK(origin.gamma[0](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(origin.gamma[0](1, 1) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(origin.gamma[1](0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(origin.gamma[1](1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(origin.gamma[0](0, 1)) < 1e-14);
    CHECK(std::abs(origin.gamma[1](0, 0)) < 1e-14);
    CHECK(std::abs(origin.gamma[1](1, 1)) < 1e-14);

    const Vec b = vec2(0.4, -0.7);
    const MetricField g2 = MetricField::conformal_exp(b);
    for (const Vec& x : {vec2(0.3, -0.2), vec2(-0.5, 0.8)}) {
        const ChristoffelData c = christoffel(g2, x);
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) CHECK(std::abs(c.gamma[k](i, j) - conformal_gamma(b, k, i, j)) < 1e-13);
    }
}

TEST_CASE("christoffel symbols are symmetric in the lower indices") {
    const MetricField g = wavy_metric();
    Uniform u(11);
    for (int t = 0; t < 20; ++t) {
        const ChristoffelData c = christoffel(g, vec2(u(-1, 1), u(-1, 1)));
        for (const Mat& gk : c.gamma) CHECK((gk - gk.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("analytic and finite-difference derivatives agree") {
    const MetricField analytic = MetricField::conformal_exp(vec2(0.8, -0.3));
    const MetricField sampled(2, [&](const Vec& x) { return analytic(x); });
    CHECK(analytic.provenance() == Provenance::Analytic);
    CHECK(sampled.provenance() == Provenance::FiniteDifference);
    const double hg = MetricField::kDefaultStep;
    Uniform u(5);
    for (int t = 0; t < 20; ++t) {
        const Vec x = vec2(u(-1, 1), u(-1, 1));
        const auto d1 = analytic.derivative(x), d2 = analytic.fd_derivative(x);
        // |g|_C3 <= 8 exp(2 |a| |x|) on the unit box
        const double bound = 10.0 * hg * hg * 8.0 * std::exp(2.0 * 1.2);
        for (int c = 0; c < 2; ++c) CHECK((d1[c] - d2[c]).cwiseAbs().maxCoeff() < bound);
        const ChristoffelData ca = christoffel(analytic, x), cs = christoffel(sampled, x);
        for (int k = 0; k < 2; ++k) CHECK((ca.gamma[k] - cs.gamma[k]).cwiseAbs().maxCoeff() < 10.0 * hg * hg);
    }
}

TEST_CASE("contracted christoffel agrees with the divergence form") {
    const MetricField g = wavy_metric();
    for (const Vec& x : {vec2(0.1, 0.2), vec2(-0.4, 0.6)}) {
        const Vec lib = contracted_christoffel(g, x);
        const Vec oracle = brute_force_contracted(g, x);
        CHECK((lib - oracle).cwiseAbs().maxCoeff() < 1e-7);
        CHECK((christoffel(g, x).contracted - lib).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("conformal scaling of contracted christoffel") {
    ScalarField one{[](const Vec&) { return 1.0; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
    CHECK(contracted_christoffel_scaling_check(wavy_metric(), one, vec2(0.2, 0.1)) == 0.0);

    ScalarField lam2{[](const Vec& x) { return 2.0 + std::sin(x(0)) * x(1); },
                     [](const Vec& x) { return vec2(std::cos(x(0)) * x(1), std::sin(x(0))); }};
    CHECK(contracted_christoffel_scaling_check(wavy_metric(), lam2, vec2(0.3, -0.4)) <= 1e-8);

    // n = 3, g = I, lambda = exp(x1): Gamma_a(lambda I) = -(n/2 - 1) d_a log lambda.
    ScalarField lam3{[](const Vec& x) { return std::exp(x(0)); },
                     [](const Vec& x) { return vec3(std::exp(x(0)), 0, 0); }};
    const MetricField scaled = MetricField::scaled(MetricField::euclidean(3), lam3);
    const Vec gam = contracted_christoffel(scaled, vec3(0, 0, 0));
    CHECK(gam(0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(gam(1)) < 1e-14);
    CHECK(std::abs(gam(2)) < 1e-14);
    CHECK((gam - brute_force_contracted(scaled, vec3(0, 0, 0))).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(contracted_christoffel_scaling_check(MetricField::euclidean(3), lam3, vec3(0.1, 0.2, 0.3)) <= 1e-8);

    ScalarField bad{[](const Vec&) { return -1.0; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
    CHECK(code_of([&] { contracted_christoffel_scaling_check(MetricField::euclidean(2), bad, vec2(0, 0)); }) ==
          ErrorCode::NonPositiveConformalFactor);
}

TEST_CASE("check_spd rejects indefinite and asymmetric metrics") {
    Mat bad(2, 2);
    bad << 1, 0, 0, -1;
    CHECK(code_of([&] { MetricField::constant(bad).check_spd(vec2(0, 0)); }) == ErrorCode::NonSpdMetric);
    Mat asym(2, 2);
    asym << 1, 0.5, 0, 1;
    CHECK(code_of([&] { MetricField::constant(asym).check_spd(vec2(0, 0)); }) == ErrorCode::NonSpdMetric);
    CHECK(code_of([&] { christoffel(MetricField::constant(bad), vec2(0, 0)); }) == ErrorCode::NonSpdMetric);
    CHECK_NOTHROW(MetricField::euclidean(3).check_spd(vec3(1, 2, 3), 0.5));
}

TEST_CASE("SymSpace vectorization is an isometry") {
    Uniform u(3);
    for (int n : {2, 3}) {
        const SymSpace space(n);
        CHECK(space.dim() == n * (n + 1) / 2);
        for (int t = 0; t < 10; ++t) {
            const Mat a = random_sym(u, n), b = random_sym(u, n);
            CHECK(std::abs(space.vectorize(a).dot(space.vectorize(b)) - SymSpace::inner(a, b)) < 1e-14);
            CHECK((space.unvectorize(space.vectorize(a)) - a).cwiseAbs().maxCoeff() < 1e-15);
        }
        const auto basis = space.orthonormal_basis();
        REQUIRE(static_cast<int>(basis.size()) == space.dim());
        for (std::size_t i = 0; i < basis.size(); ++i) {
            CHECK((space.unvectorize(space.vectorize(basis[i])) - basis[i]).cwiseAbs().maxCoeff() == 0.0);
            for (std::size_t j = 0; j < basis.size(); ++j) {
                CHECK(std::abs(SymSpace::inner(basis[i], basis[j]) - (i == j ? 1.0 : 0.0)) < 1e-15);
            }
        }
    }
}

TEST_CASE("hodge star of symmetric matrices") {
    const SymSpace s2(2);
    const double r = 1.0 / std::sqrt(2.0);
    {
        Mat a(2, 2), b(2, 2);
        a << 2, 0, 0, -2;
        b << 0, 1, 1, 0;
        const std::vector<Mat> in{a, b};
        const Mat h = hodge_star_sym(s2, in);
        CHECK((h - r * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    }
    {
        Mat a(2, 2), b(2, 2), off(2, 2);
        a << 1, 0, 0, 0;
        b << 0, 0, 0, 1;
        off << 0, 1, 1, 0;
        const std::vector<Mat> in{a, b};
        CHECK((hodge_star_sym(s2, in) - r * off).cwiseAbs().maxCoeff() < 1e-14);
    }

    // Random inputs: compare with the SVD nullspace and check orthogonality.
    Uniform u(17);
    for (int n : {2, 3}) {
        const SymSpace space(n);
        for (int t = 0; t < 10; ++t) {
            std::vector<Mat> in;
            Mat stacked(space.dim() - 1, space.dim());
            for (int i = 0; i < space.dim() - 1; ++i) {
                in.push_back(random_sym(u, n));
                stacked.row(i) = space.vectorize(in.back()).transpose();
            }
            const Mat h = hodge_star_sym(space, in);
            CHECK(std::abs(h.norm() - 1.0) < 1e-12);
            for (const Mat& m : in) CHECK(std::abs(SymSpace::inner(h, m)) < 1e-10);
            Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeFullV);
            const Mat null = space.unvectorize(svd.matrixV().col(space.dim() - 1));
            CHECK(std::min((h - null).norm(), (h + null).norm()) < 1e-10);
            CHECK(h.trace() >= 0.0);
        }
    }

    // Trace-free inputs in three dimensions span the complement of I.
    const SymSpace s3(3);
    std::vector<Mat> tf;
    for (int i = 0; i < 5; ++i) {
        Mat m = random_sym(u, 3);
        m -= (m.trace() / 3.0) * Mat::Identity(3, 3);
        tf.push_back(m);
    }
    CHECK((hodge_star_sym(s3, tf) - Mat::Identity(3, 3) / std::sqrt(3.0)).cwiseAbs().maxCoeff() < 1e-10);

    Mat a(2, 2);
    a << 1, 0, 0, 0;
    const std::vector<Mat> dependent{a, 2.0 * a};
    CHECK(code_of([&] { hodge_star_sym(s2, dependent); }) == ErrorCode::DependentInputs);
    const std::vector<Mat> too_few{a};
    CHECK(code_of([&] { hodge_star_sym(s2, too_few); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("canonical sign picks nonnegative trace, then the first nonzero entry") {
    const SymSpace s2(2);
    Mat off(2, 2);
    off << 0, -1, -1, 0;
    CHECK(canonical_sign(s2, off)(0, 1) > 0.0);
    CHECK(canonical_sign(s2, -Mat::Identity(2, 2)).trace() > 0.0);
}

TEST_CASE("pullback metric") {
    const MetricField g = wavy_metric();
    const Vec x = vec2(0.2, -0.3);
    CHECK((pullback_metric(g, Diffeo::identity(2))(x) - g(x)).cwiseAbs().maxCoeff() == 0.0);

    Mat a(2, 2);
    a << 2, 1, -0.5, 1.5;
    const MetricField lin = pullback_metric(MetricField::euclidean(2), Diffeo::linear(a));
    for (const Vec& y : {vec2(0, 0), vec2(0.7, -0.1)}) {
        CHECK((lin(y) - a.transpose() * a).cwiseAbs().maxCoeff() < 1e-15);
    }

    const MetricField radial = pullback_metric(MetricField::euclidean(2), Diffeo::radial_disk(0.2));
    Uniform u(23);
    for (int t = 0; t < 50; ++t) {
        const double rr = std::sqrt(u(0, 1)), th = u(0, 2 * test_support::kPi);
        const Vec y = vec2(rr * std::cos(th), rr * std::sin(th));
        CHECK_NOTHROW(radial.check_spd(y));
        CHECK(radial(y).determinant() > 0.0);
    }
    // On r = 1 the map fixes points, so the tangential component is 1. The
    // radial component is (1 + 0.2 (1 - 2r))^2 = 0.64 there.
    for (double th : {0.0, 0.9, 2.5, 4.0}) {
        const Vec y = vec2(std::cos(th), std::sin(th));
        const Vec t = vec2(-std::sin(th), std::cos(th));
        const Mat gy = radial(y);
        CHECK(std::abs(t.dot(gy * t) - 1.0) < 1e-14);
        CHECK(std::abs(y.dot(gy * y) - 0.64) < 1e-14);
        CHECK(std::abs(t.dot(gy * y)) < 1e-14);
    }

    Mat sing(2, 2);
    sing << 1, 2, 2, 4;
    CHECK(code_of([&] { pullback_metric(g, Diffeo::linear(sing))(x); }) == ErrorCode::SingularJacobian);
}

TEST_CASE("pullback is functorial") {
    const MetricField g = wavy_metric();
    const Diffeo phi = Diffeo::radial_disk(0.3);
    Mat a(2, 2);
    a << 0.9, 0.2, -0.1, 1.1;
    const Diffeo psi = Diffeo::linear(a);
    const MetricField left = pullback_metric(g, compose(phi, psi));
    const MetricField right = pullback_metric(pullback_metric(g, phi), psi);
    Uniform u(29);
    for (int t = 0; t < 20; ++t) {
        const Vec x = vec2(u(-0.5, 0.5), u(-0.5, 0.5));
        CHECK((left(x) - right(x)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("radial disk map and its inverse") {
    const Diffeo phi = Diffeo::radial_disk(0.3), inv = Diffeo::radial_disk_inverse(0.3);
    Uniform u(31);
    for (int t = 0; t < 20; ++t) {
        const Vec x = vec2(u(-0.7, 0.7), u(-0.7, 0.7));
        CHECK((inv(phi(x)) - x).norm() < 1e-12);
        CHECK((phi.jacobian(x) * inv.jacobian(phi(x)) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    }
    const Diffeo fd = Diffeo::from_map(phi.map, 2);
    const Vec x = vec2(0.3, 0.4);
    CHECK((fd.jacobian(x) - phi.jacobian(x)).cwiseAbs().maxCoeff() < 1e-8);
}
