#pragma once

#include "crstokes/analysis.hpp"
#include "crstokes/mms.hpp"

namespace crstokes {

struct VerifyOptions {
  int levels = 3;
  int mode = 0;
  double amplitude = 1.0;
  double A = 1.0;
  double M = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  SolverControls controls;
  int n_random = 20;
  int translate_resolution = 256;
  /// Dense checks (inf-sup, inverse sign) are skipped above this many cells.
  int dense_cell_limit = 2000;
  int log_mean_samples = 1000000;
  int max_threads = 1;
};

/// Every audit on base, refine(base), ...: mesh quality, divergence
/// preservation, interpolation orders, the jump / trace / Poincare / pairing
/// bounds, translates, inf-sup, and on the manufactured solves positivity,
/// mass, mean pressure, M-matrix structure, entropy terms and weak residuals.
AuditReport run_verification(const Mesh& base, const VerifyOptions& opt);

}  // namespace crstokes
