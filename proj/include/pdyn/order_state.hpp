#pragma once

#include "pdyn/spectrum.hpp"

#include <Eigen/Core>

#include <vector>

namespace pdyn {

// Macroscopic state of student-teacher learning. For a spectrum with d
// distinct eigenvalues the state stores the overlap matrices of orders
// e = 0..d-1 only; order d is always reachable through the polynomial
// reduction (lift_order), which is what closes the ODE system.
//
//   Q^(e) = J Sigma^e J^T   (K x K, symmetric)   student first layer
//   R^(e) = J Sigma^e B^T   (K x M)              student-teacher overlap
//   T^(e) = B Sigma^e B^T   (M x M, symmetric)   teacher first layer, constant
//   D = w w^T, E = w v^T, F = v v^T              second layers; F constant
struct OrderParameterState {
  EigenSpectrum spectrum;
  int K = 0;
  int M = 0;
  std::vector<Eigen::MatrixXd> Q;
  std::vector<Eigen::MatrixXd> R;
  std::vector<Eigen::MatrixXd> T;
  Eigen::MatrixXd D, E, F;

  int d() const { return spectrum.distinct_count(); }
  bool all_finite() const;
};

// Checks shapes, symmetry of Q/T/D/F within 1e-10, and positive
// semidefiniteness of the order-1 stacked Gram block [[Q1, R1], [R1^T, T1]]
// (clipping tolerance 1e-10). Throws NonFinite / NonPSD / IndexOutOfRange.
void validate_state(const OrderParameterState& state);

}  // namespace pdyn
