#pragma once

#include "poisson_embed/chart.hpp"
#include "poisson_embed/grid.hpp"
#include "poisson_embed/runge.hpp"

#include <array>
#include <optional>
#include <string>

namespace poisson_embed {

using Connection = std::array<Eigen::Matrix2d, 2>;

// Q(u) = A^{ab}(x, u, du) (d_ab u - Gamma^k_ab d_k u) + B(x, u, du) in two
// dimensions, with Gamma the Christoffel symbols of a background metric
// (flat when no metric is set).
class QuasilinearOperator {
public:
    using CoeffA = std::function<Eigen::Matrix2d(const Point2&, double, const Eigen::Vector2d&)>;
    using CoeffB = std::function<double(const Point2&, double, const Eigen::Vector2d&)>;
    using PartialA = std::function<Eigen::Matrix2d(const Point2&, double, const Eigen::Vector2d&, int)>;
    using PartialB = std::function<double(const Point2&, double, const Eigen::Vector2d&, int)>;

    QuasilinearOperator(std::string name, CoeffA a, CoeffB b, std::optional<MetricField> metric = std::nullopt);

    const std::string& name() const { return name_; }
    const std::optional<MetricField>& metric() const { return metric_; }

    Eigen::Matrix2d a(const Point2& x, double c, const Eigen::Vector2d& s) const { return a_(x, c, s); }
    double b(const Point2& x, double c, const Eigen::Vector2d& s) const { return b_(x, c, s); }
    Connection connection(const Point2& x) const;

    // Partial derivatives in slot 0 = u, 1 = sigma_1, 2 = sigma_2. Analytic
    // when supplied, central differences of the closures otherwise.
    Eigen::Matrix2d a_partial(const Point2& x, double c, const Eigen::Vector2d& s, int slot) const;
    double b_partial(const Point2& x, double c, const Eigen::Vector2d& s, int slot) const;
    void set_partials(PartialA da, PartialB db);
    bool has_analytic_partials() const { return static_cast<bool>(da_) && static_cast<bool>(db_); }

    // Smallest eigenvalue of A over grid nodes and sampled (c, sigma) with
    // |c| + |sigma| <= radius; also checks B(x, 0, 0) = 0. Throws
    // InvalidArgument when either fails.
    double check_ellipticity(const Grid& grid, double radius, double floor) const;

private:
    std::string name_;
    CoeffA a_;
    CoeffB b_;
    PartialA da_;
    PartialB db_;
    std::optional<MetricField> metric_;
};

// Named operators: laplace, cubic (Lap u + u^3), quadratic (Lap u + u^2),
// sine (Lap u + sin u), gradient ((1 + |du|^2) Lap u), aniso (x-dependent
// anisotropic A with B = u^3).
QuasilinearOperator make_operator(const std::string& name);

// Christoffel symbols of the operator's metric at every grid node.
std::vector<Connection> grid_connection(const QuasilinearOperator& op, const Grid& grid);

// Q(u) at an interior node with central differences.
double eval_Q(const QuasilinearOperator& op, const Grid& grid, const Vec& u, int node);
// Q(u) at every interior node, interior-indexed.
Vec eval_Q(const QuasilinearOperator& op, const Grid& grid, const Vec& u);

// Derivative of the interior residual with respect to the interior values.
SpMat newton_jacobian(const QuasilinearOperator& op, const Grid& grid, const Vec& u,
                      const std::vector<Connection>& gamma);

struct NewtonSettings {
    double tol_rel = 1e-11;
    int max_iterations = 30;
    // Rejects sources with |f|_inf above this when positive.
    double amplitude_cap = 0.0;
    bool check_uniqueness = false;
};

struct NewtonResult {
    Vec u;
    int iterations = 0;
    std::vector<double> residuals;
    // log(r_k+1 / r_k) / log(r_k / r_k-1) over the last three residuals.
    double observed_order = 0.0;
    // |u - u'|_inf for a second solve from a perturbed start.
    double uniqueness_gap = 0.0;
};

// Solves Q(u) = f with zero boundary values; f is a full nodal vector.
NewtonResult newton_solve(const QuasilinearOperator& op, const Grid& grid, const Vec& f, const Vec& u0 = Vec(),
                          const NewtonSettings& settings = {});

// A(x,0,0):(D^2 - Gamma D) + dB/du(x,0,0) + dB/dsigma(x,0,0) . D on interior unknowns.
SpMat linearize(const QuasilinearOperator& op, const Grid& grid);

// Quintic bump: 1 on [0, r], 0 beyond 2r, C^2.
double cutoff(double dist, double r);

// Smooth window-supported source: amplitude * cutoff(|x - center|, r).
Vec bump_source(const Grid& grid, const Point2& center, double r, double amplitude);

struct LinearizationRow {
    double t = 0.0;
    double error = 0.0;
    double ratio = 0.0;
};

// e(t) = |(S(tf) - S(0)) / t - S^L f|_inf over the grid window.
std::vector<LinearizationRow> linearization_convergence_test(const QuasilinearOperator& op, const Grid& grid,
                                                             const Vec& f, const std::vector<double>& t_list,
                                                             const NewtonSettings& settings = {});

// Same operator written with the connection of new_metric and
// B~ = B + A^{ab} (Gamma~ - Gamma)^k_ab sigma_k.
QuasilinearOperator gauge_transform(const QuasilinearOperator& op, const MetricField& new_metric);

// Operator in coordinates x' with x = phi(x'): A' = Dphi^{-1} A Dphi^{-T},
// B'(x', c, s') = B(phi x', c, Dphi^{-T} s'), metric phi^* g.
QuasilinearOperator pullback_operator(const QuasilinearOperator& op, const Diffeo& phi);

// Map of the unit square that is the identity on window and on the square's
// boundary: x + amplitude * s(x) (2, 1) with s = 64 x(1-x) y(1-y) (dx^3 + dy^3),
// dx, dy the distances from x to the window strip in each axis.
Diffeo window_fixing_shear(const Box& window, double amplitude);

// Evaluation of Q on a trial field at an interior node.
using QBlackbox = std::function<double(const Vec& v, int node)>;
QBlackbox blackbox(const QuasilinearOperator& op, const Grid& grid);

struct ProbeResult {
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    double b_inv = 0.0;
    double affinity_residual = 0.0;
};

// Recovers A(y, c, sigma) and B(y, c, sigma) - A^{ab} Gamma^k_ab sigma_k from
// Q applied to chi (c + sigma.(x-y) + 1/2 H (x-y).(x-y)) with Hessian probes
// H in {0} and delta times an orthonormal basis of Sym(2). chi is cutoff()
// with r = 4h and must stay inside the grid window.
ProbeResult probe_coefficients(const QBlackbox& q, const Grid& grid, int y, double c, const Eigen::Vector2d& sigma,
                               double delta_probe);

// Largest source amplitude in [lo, hi] (bisection in log scale) for which
// Newton from zero converges within 10 iterations on both +-amplitude * shape.
double measure_amplitude_cap(const QuasilinearOperator& op, const Grid& grid, const Vec& shape, double lo = 1e-3,
                             double hi = 1e4, int steps = 24);

struct SolutionChart {
    LocalChart chart;
    std::vector<int> window;
    Vec source1, source2;
    bool within_tolerance = false;
};

// Chart from two interior-source solutions of L with du1(x0) = e1,
// du2(x0) = e2. Window nodes closer than the patch radius + h to x0 are
// dropped first.
SolutionChart solution_coordinates(const GridLinearSolver& op, const std::vector<int>& window, int x0);

} // namespace poisson_embed
