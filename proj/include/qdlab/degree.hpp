#pragma once

#include <complex>

#include "qdlab/schwarz.hpp"

namespace qdlab {

// Closed oriented model of the upper-domain boundary with the sigma map
// sampled at every vertex.  In 2D the vertices form one closed polyline in
// listed order (plane part left to right, then the graph arc back); in 3D the
// triangle list glues a graph sheet and a plane sheet over the same base
// triangulation, so the surface closes exactly along the rim.
struct BoundaryMesh {
    int dim = 2;
    std::vector<Vec> verts;
    std::vector<Eigen::VectorXd> sigma;
    std::vector<std::array<int, 3>> tris;  // 3D only, outward oriented
    double mismatch = 0;  // closed-form sigma against interior field samples
};

BoundaryMesh build_boundary_mesh(const SchwarzState& st, const DomainGraph& graph,
                                 int refine = 1);

// Total argument variation of (path - y) over the closed polyline, divided by
// 2 pi.  Throws when y touches the path or an edge turns by nearly pi.
int winding_number_2d(const std::vector<Eigen::Vector2d>& path, const Eigen::Vector2d& y);

struct SolidAngleDegree {
    int degree = 0;
    double residual = 0;  // distance of the raw sum to the nearest integer
};

// Degree of the vertex map at y: signed solid angles of the image triangles
// summed over the mesh and divided by 4 pi.
SolidAngleDegree kronecker_degree_3d(const BoundaryMesh& mesh, const Eigen::VectorXd& y);

struct PreimageResult {
    int degree = 0;
    int roots = 0;
    bool conclusive = true;
    std::string note;
    std::vector<Vec> root_points;
    Eigen::VectorXd target;    // equals y unless a singular root forced a nudge
    double min_gap = 0;        // closest any Newton path came to the target
};

// Newton multi-start preimage count of sigma(x) = y with Jacobian signatures.
PreimageResult preimage_degree(const SchwarzState& st, const Eigen::VectorXd& y);

struct DegreeResult {
    std::vector<double> t_samples;
    std::vector<int> boundary_degrees;
    std::vector<int> preimage_degrees;
    std::vector<double> residuals;    // boundary-method rounding residuals
    std::vector<bool> conclusive;     // preimage method conclusive per target
    bool agree = true;
    double t_lo = 0, t_hi = 0;        // open admissible interval before shrink
    double mesh_mismatch = 0;
    double min_density = 0;           // smallest extracted density over the base core
};

// Degree of sigma at axis targets (0,...,0,t) by both methods.  Default
// samples: five equispaced points of the admissible interval shrunk 5% at
// each end.
DegreeResult degree_scan(const SchwarzState& st, const DomainGraph& graph,
                         const std::vector<double>& t_samples = {});

struct SchwarzFunctionChecks {
    ScalarField s_re, s_im;  // S = conj(w) - 4 du/dz in the shifted coordinate
    double boundary_err = 0;   // |S - conj(w)| near the free boundary
    // Relative gap between -Im S extrapolated to the plane and f.  The headline
    // figure skips columns near density-support edges, where the field only
    // reaches its trace like the square root of the height; _all keeps them.
    double density_err = 0;
    double density_err_all = 0;
    double sigma_err = 0;      // |w S / 2 - (rho + i omega)| on the interior mask
    double cr_err = 0;         // discrete Cauchy-Riemann residual of S
};

SchwarzFunctionChecks schwarz_function_2d(const SchwarzState& st, const DomainGraph& graph);

struct NearestPointReport {
    double r0 = 0;
    int clusters = 0;
    Eigen::Vector2d nearest = Eigen::Vector2d::Zero();
    bool unique = false;
    bool degenerate = false;     // the near-minimal set spans a wide arc
    bool matches_gamma = false;
    double gamma_gap = 0;
};

NearestPointReport nearest_point_check_2d(const SchwarzState& st, const DomainGraph& graph,
                                          const GammaTrace* gamma = nullptr);

}  // namespace qdlab
