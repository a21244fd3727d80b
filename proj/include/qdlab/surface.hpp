#pragma once

#include <memory>
#include <vector>

#include "qdlab/balayage.hpp"

namespace qdlab {

using VecXd = Eigen::VectorXd;
using MatXd = Eigen::MatrixXd;

// Height model of the upper free boundary over base coordinates.  Margins are
// in base length units; queries must stay inside the domain by the margin.
class SurfaceModel {
  public:
    virtual ~SurfaceModel() = default;
    virtual int base_dim() const = 0;
    virtual bool in_domain(const VecXd& s, double margin = 0.0) const = 0;
    virtual double height(const VecXd& s) const = 0;
    virtual VecXd height_grad(const VecXd& s) const = 0;
    virtual MatXd height_hess(const VecXd& s) const = 0;
    virtual void domain_box(VecXd& lo, VecXd& hi) const = 0;
    virtual double max_height() const = 0;
    // Suggested sampling clearance from the rim (0 for analytic shapes).
    virtual double rim_clearance() const { return 0.0; }
};

// Graph of g = sqrt(R^2 - |s|^2) over |s| < R.
class HemisphereShape : public SurfaceModel {
  public:
    HemisphereShape(double R, int base_dim);
    int base_dim() const override { return dim_; }
    bool in_domain(const VecXd& s, double margin) const override;
    double height(const VecXd& s) const override;
    VecXd height_grad(const VecXd& s) const override;
    MatXd height_hess(const VecXd& s) const override;
    void domain_box(VecXd& lo, VecXd& hi) const override;
    double max_height() const override { return R_; }

  private:
    double R_;
    int dim_;
};

// Graph of g = b sqrt(1 - |s|^2/a^2) over |s| < a.
class EllipseArchShape : public SurfaceModel {
  public:
    EllipseArchShape(double a, double b, int base_dim);
    int base_dim() const override { return dim_; }
    bool in_domain(const VecXd& s, double margin) const override;
    double height(const VecXd& s) const override;
    VecXd height_grad(const VecXd& s) const override;
    MatXd height_hess(const VecXd& s) const override;
    void domain_box(VecXd& lo, VecXd& hi) const override;
    double max_height() const override { return b_; }

  private:
    double a_, b_;
    int dim_;
};

// Graph of g = 1 - |s|^2 over |s| < 1: taller than wide, so the inner-ball
// geometry fails and every equivalent criterion must fail with it.
class TallCapShape : public SurfaceModel {
  public:
    explicit TallCapShape(int base_dim) : dim_(base_dim) {}
    int base_dim() const override { return dim_; }
    bool in_domain(const VecXd& s, double margin) const override;
    double height(const VecXd& s) const override;
    VecXd height_grad(const VecXd& s) const override;
    MatXd height_hess(const VecXd& s) const override;
    void domain_box(VecXd& lo, VecXd& hi) const override;
    double max_height() const override { return 1.0; }

  private:
    int dim_;
};

// Extracted solver graph with moving-least-squares quadratic derivatives.
class GraphSurface : public SurfaceModel {
  public:
    explicit GraphSurface(const DomainGraph& graph, int fit_halfwidth = 3);
    int base_dim() const override { return graph_.base.dim(); }
    bool in_domain(const VecXd& s, double margin) const override;
    double height(const VecXd& s) const override;
    VecXd height_grad(const VecXd& s) const override;
    MatXd height_hess(const VecXd& s) const override;
    void domain_box(VecXd& lo, VecXd& hi) const override;
    double max_height() const override { return max_g_; }
    double rim_clearance() const override;
    const DomainGraph& graph() const { return graph_; }

  private:
    void fit(const VecXd& s, double* g, VecXd* dg, MatXd* d2g) const;
    DomainGraph graph_;
    int hw_;
    double max_g_ = 0;
};

// Pointwise second-order data of the boundary graph at a base point.
struct SurfaceJet {
    VecXd s;
    double g = 0;
    VecXd dg;
    MatXd d2g;
    double speed = 0;       // sqrt(1 + |dg|^2)
    double normal_len = 0;  // g * speed
    VecXd foot;             // s + g * dg
    double phi = 0;         // (|s|^2 + g^2) / 2
    MatXd metric;           // I + dg dg^T
    MatXd second;           // d2g / speed
    MatXd phi_hess;         // metric + normal_len * second
    VecXd normal;           // (dg, -1) / speed, dimension base_dim + 1
};

SurfaceJet surface_jet(const SurfaceModel& m, const VecXd& s);

// Gradient and Hessian of the half squared distance to the center (a, b).
struct ShiftedJet {
    VecXd center_a;
    double center_b = 0;
    VecXd grad;
    MatXd hess;  // phi_hess - b * d2g
};

ShiftedJet shifted_jet(const SurfaceJet& jet, const VecXd& a, double b);

// Eigenvalues of B v = kappa A v, ascending.
VecXd principal_curvatures(const SurfaceJet& jet);

// Half-space transform (u, v) -> (u, (|u|^2 + v^2)/2) and its inverse.
VecXd poincare_forward(const VecXd& uv);
VecXd poincare_inverse(const VecXd& st);

// Halton low-discrepancy sequence value (index >= 0, prime base).
double halton(long index, int base);

// Deterministic interior sample points: lattice plus Halton fill, all at
// least `margin` inside the domain.
std::vector<VecXd> sample_domain(const SurfaceModel& m, int count, double margin);

}  // namespace qdlab
