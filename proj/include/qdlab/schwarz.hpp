#pragma once

#include <functional>

#include "qdlab/balayage.hpp"

namespace qdlab {

// Moment fields of the potential: rho = |y|^2/2 - y . grad u - (n-2) u, the
// rotation components omega_ij = y_i du/dx_j - y_j du/dx_i, xi = grad rho,
// and the assembled map sigma = (omega_1n, ..., omega_(n-1)n, rho), all
// measured from a shifted origin y = x - shift on the hyperplane.
struct SchwarzState {
    PotentialSolution sol;
    Vec shift = Vec::Zero();
    ScalarField rho;
    VectorField omega;      // packed pairs: n=2 {01}; n=3 {01, 02, 12}
    VectorField xi;
    VectorField sigma;
    VectorField jac_sigma;  // row-major n x n entries of the sigma Jacobian
    Mask interior;          // >= 2 cells inside the upper region
};

int omega_pair_count(int dim);
int omega_pair_index(int dim, int i, int j);  // requires i < j

SchwarzState build_schwarz_state(const PotentialSolution& sol,
                                 const Vec& origin_shift = Vec::Zero());

struct FieldStats {
    double max = 0;
    double mean = 0;
    std::int64_t nodes = 0;
};

struct CrOptions {
    int clearance = 2;
    // Radius around density-support edges and point masses excluded from the
    // "clean" statistics; derivative truncation blows up at those corners.
    double edge_exclusion = 0.5;
};

struct CrResidual {
    FieldStats components_all, components_clean;  // grad rho vs omega divergence
    FieldStats lap_rho_all, lap_rho_clean;
    FieldStats lap_omega_all, lap_omega_clean;
    FieldStats div_sigma_clean;
    FieldStats algebraic_clean;   // omega_kj vs (y_j omega_kn - y_k omega_jn)/y_n
    FieldStats div_omega_clean;   // n=3 only
    FieldStats curl_match_clean;  // n=3 only: |xi - curl of the omega vector|
    FieldStats omega_radial;      // n=3 only: radial component of the omega vector
    FieldStats omega_phi_density; // n=3 only: azimuthal omega near the plane vs r f / 2
    double h = 0;
};

CrResidual cr_residual(const SchwarzState& st, const CrOptions& opt = {});

// Interior mask with balls of the given radius removed around density-support
// edges and point masses.
Mask interior_clean_mask(const SchwarzState& st, double edge_exclusion = 0.5);

struct TangencyReport {
    double max_normal_frac = 0;    // |xi . n| / |xi| over boundary samples
    double max_projection_err = 0; // |xi - tangential projection of y| / scale
    int samples = 0;
};

TangencyReport boundary_tangency_check(const SchwarzState& st, const DomainGraph& graph);

// min and max of |y| over the extracted boundary graph.
std::pair<double, double> boundary_radius_range(const SchwarzState& st,
                                                const DomainGraph& graph);

struct GammaOptions {
    double rmin_cells = 5;
    double ladder = 1.05;
    int starts = 32;
    double trace_tol = 0;     // 0: auto, scaled with h
    double cluster_cells = 3;
};

// Locus where the gradient is radial: the tangential gradient on the sphere
// of radius r about the shifted origin vanishes.
struct GammaTrace {
    std::vector<Vec> points;
    std::vector<double> radii;
    std::vector<double> residuals;  // |tangential gradient| at accepted points
    bool branched = false;
    bool degenerate_radial = false;
    bool empty = false;
    std::string reason;
    double certificate = 0;  // when empty: definite sign margin of the rotation field
    Vec start_direction = Vec::Zero();
    double start_alignment = 0;  // cosine against the axis direction from xi
    Vec endpoint = Vec::Zero();
    bool reached_boundary = false;
    double max_tangent_angle = 0;  // n=2: polyline direction against interpolated xi
};

GammaTrace trace_gamma(const SchwarzState& st, const DomainGraph& graph,
                       const GammaOptions& opt = {});

struct HessianReport {
    double tr_max_err = 0;  // interior |tr H - 1|
    std::vector<double> offsets;       // inward distances from the boundary
    std::vector<double> proj_err;      // max |H - n n^T| entry at each offset
    std::vector<double> hn_err;        // max |H n - n| at each offset
    std::vector<double> hx_err;        // max |H y - (y - xi)| at each offset
    double slope = 0;                  // fitted log-log decay rate of proj_err
    double interior_identity_err = 0;  // |H y + (n-1) grad u + xi - y| interior
};

HessianReport hessian_checks(const SchwarzState& st, const DomainGraph& graph);

// Integrals of the potential Hessian over the upper domain, entry by entry;
// columns are integrated with a boundary-aware rule so the free-boundary kink
// never enters a stencil.
Eigen::MatrixXd hessian_integrals(const PotentialSolution& sol, const DomainGraph& graph);

struct TubeMass {
    double volume = 0;
    double half_mass = 0;
    double defect = 0;  // relative, against half_mass
};

// Mass of the tube of gradient streamlines over a base region against half
// the measure it carries.  An empty predicate means the whole base domain.
TubeMass tube_mass_check(const PotentialSolution& sol, const DomainGraph& graph,
                         const std::function<bool(const Eigen::VectorXd&)>& base_region = {});

}  // namespace qdlab
