#pragma once

#include <vector>

#include "forge/body_model.hpp"
#include "forge/raster.hpp"

namespace forge::kernels {

// Data-parallel inner loops. Each kernel exists twice: a straightforward
// serial reference and an OpenMP version. Both produce bit-identical output;
// the tests hold them to that.

namespace serial {

/// out += sum_k coeffs[k] * basis[k]
void accumulate_basis(Points& out, const std::vector<Points>& basis, const Eigen::VectorXd& coeffs);

/// out = in + sum_j W[v][j] * ((R_j - I) in + t_j)
void skin(const Eigen::MatrixXd& weights, const SkinningTransforms& transforms, const Points& in, Points& out);

/// Triangle-major scan with per-pixel depth test.
void rasterize(const std::vector<ScreenTriangle>& triangles, FragmentBuffer& frags);

}  // namespace serial

namespace omp {

void accumulate_basis(Points& out, const std::vector<Points>& basis, const Eigen::VectorXd& coeffs);
void skin(const Eigen::MatrixXd& weights, const SkinningTransforms& transforms, const Points& in, Points& out);

/// Triangles are binned into horizontal bands; bands are scanned in parallel,
/// pixel-major within a band.
void rasterize(const std::vector<ScreenTriangle>& triangles, FragmentBuffer& frags);

}  // namespace omp

}  // namespace forge::kernels
