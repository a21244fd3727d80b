#pragma once

#include "qdlab/fd_ops.hpp"
#include "qdlab/measure.hpp"

namespace qdlab {

struct SolverConfig {
    double relax = 1.8;      // projected SOR factor in (0, 2)
    double tol = 1e-9;       // complementarity residual target
    long max_sweeps = 600000;
    int margin_cells = 2;    // clearance demanded between the domain and box faces
    int max_grow = 5;        // automatic box enlargements before giving up
    double grow_fraction = 0.25;
    int check_every = 16;    // sweeps between residual evaluations
    bool verbose = false;
};

// Smallest superharmonic majorant data: u >= 0 with L_h u <= 1 - mu_h and
// u * (1 - mu_h - L_h u) = 0 at every node; the grown domain is {u > 0}.
struct PotentialSolution {
    Grid grid;
    ScalarField u;
    MeasureSpec measure;
    ScalarField rhs;        // 1 - deposited measure density
    double eps_height = 0;  // height threshold separating noise from interior
    double tol = 0;
    double final_residual = 0;
    long sweeps = 0;
    int grows = 0;
    bool converged = false;
    Mask omega_mask;        // {u > eps_height} plus deposited support nodes
};

PotentialSolution solve_partial_balayage(const MeasureSpec& mu, const Grid& initial,
                                         const SolverConfig& cfg = {});

// Right-hand side 1 - mu_h: layer densities divided by the vertical spacing,
// point masses by the cell volume at their nearest node.
ScalarField deposit_measure(const MeasureSpec& mu, const Grid& grid);

// Free-boundary graph over the base hyperplane: Omega = {|x_n| < g(x')}.
struct DomainGraph {
    Grid base;
    ScalarField g;          // extracted height, 0 outside D
    Mask in_d;              // D = {u(x', 0) > eps_height}
    ScalarField f;          // density recovered from the one-sided slope at 0+
    VectorField dg;         // central-difference table of g
    TensorField d2g;        // central-difference table of g
    bool connected = false;
    double eps_height = 0;
    long monotonicity_flags = 0;  // columns where u failed to decay monotonically
};

DomainGraph extract_domain(const PotentialSolution& sol);

// Restriction to {x_n > b} rewritten as a solution over the plane {x_n = b}:
// returns the slice density and the reflected potential.  b = 0 returns the
// inputs unchanged; b must sit on a node layer.
struct Localized {
    MeasureSpec measure;
    PotentialSolution sol;
};
Localized localize(const PotentialSolution& sol, double b);

struct ResidualReport {
    double interior_max = 0;     // max |L_h u - 1| on the interior mask
    double interior_mean = 0;
    double boundary_u_max = 0;   // u sampled on the extracted graph
    double boundary_grad_max = 0;
    double volume = 0;           // measure-theoretic |Omega|
    double mass_defect = 0;      // |volume - total mass| / total mass
    std::int64_t interior_nodes = 0;
};

ResidualReport residual_report(const PotentialSolution& sol, const DomainGraph& graph);

// Nodes of the open upper region with the given cell clearance from the free
// boundary and from the base hyperplane.
Mask interior_mask(const PotentialSolution& sol, int clearance = 2);

// Volume of the upper half domain; column sums of the graph height plus
// square-root tails where the free boundary meets the hyperplane.
double domain_volume_upper(const PotentialSolution& sol, const DomainGraph& graph);

// Deterministic discrete complementarity residual min(u, rhs - L_h u), max
// over non-face nodes.
double complementarity_residual(const PotentialSolution& sol);

}  // namespace qdlab
