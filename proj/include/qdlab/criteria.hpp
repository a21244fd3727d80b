#pragma once

#include <array>
#include <string>

#include "qdlab/surface.hpp"

namespace qdlab {

// Verdict for one of the ten equivalent inner-ball statements.  Margins are
// signed and dimensionless (lengths divided by the shape scale, energies by
// its square); margin >= -tol passes except where noted:
//   vi    passes iff no sampled normal-segment pair comes closer than the
//         crossing threshold at an interior-interior approach; the margin is
//         the smallest such interior approach distance over the scale.
//   viii  passes iff the sub-level set of the boundary-distance function is a
//         single cluster for every probe; on failure the margin is -(extra
//         clusters) for the worst probe.
struct CriterionVerdict {
    std::string id;
    bool pass = false;
    double margin = 0;
    VecXd witness;
    std::string note;
};

struct CriteriaOptions {
    int samples = 160;       // interior base samples
    int pair_samples = 320;  // sampled pairs for iii / vi / x
    int probes = 24;         // interior ambient probes for v / viii
    double tol = 0;          // 0: auto (1e-8 analytic, 5 h for graphs)
    double margin = 0;       // 0: auto sampling clearance from the rim
    long seed = 1;
};

struct CriteriaReport {
    std::vector<CriterionVerdict> verdicts;
    bool equivalent = false;
    bool all_pass = false;
    bool margin_signs_consistent = false;  // criterion i vs vii at shared samples
    double tol = 0;
    double sample_margin = 0;
    int samples_used = 0;
    const CriterionVerdict& by_id(const std::string& id) const;
};

double default_tolerance(const SurfaceModel& m);

std::array<CriterionVerdict, 2> check_convexity(const SurfaceModel& m,
                                                const CriteriaOptions& opt = {});
CriterionVerdict check_footpoint_monotone(const SurfaceModel& m,
                                          const CriteriaOptions& opt = {});
std::array<CriterionVerdict, 3> check_ball_union(const SurfaceModel& m,
                                                 const CriteriaOptions& opt = {});
std::array<CriterionVerdict, 2> check_normals(const SurfaceModel& m,
                                              const CriteriaOptions& opt = {});
CriterionVerdict check_curvature_bound(const SurfaceModel& m,
                                       const CriteriaOptions& opt = {});
CriterionVerdict check_poincare_convex(const SurfaceModel& m,
                                       const CriteriaOptions& opt = {});

CriteriaReport equivalence_report(const SurfaceModel& m, const CriteriaOptions& opt = {});

// Minimal distance between two closed segments, with the parameters of the
// closest approach.
double segment_distance(const VecXd& p0, const VecXd& p1, const VecXd& q0,
                        const VecXd& q1, double* t_out = nullptr, double* s_out = nullptr);

}  // namespace qdlab
