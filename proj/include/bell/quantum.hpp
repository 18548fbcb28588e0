#pragma once

#include <Eigen/Dense>
#include <functional>

namespace bell::quantum {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using Eigen::MatrixXcd;
using Eigen::Vector2cd;
using Eigen::Vector4cd;

// Spin measurement along the unit vector (sin t, 0, cos t) in the x-z plane.
struct SpinObservable {
  double angle = 0.0;
  Matrix2cd matrix;
};
SpinObservable spin_observable(double theta);

// Closed-form eigenvector of spin_observable(theta) for outcome +1 or -1.
Vector2cd spin_eigenvector(double theta, int outcome);

// Density matrix wrapper; rejects anything that is not Hermitian (1e-12),
// unit trace (1e-12), and positive semidefinite (eigenvalues >= -1e-10).
class QuantumState {
 public:
  explicit QuantumState(MatrixXcd rho);
  const MatrixXcd& rho() const { return rho_; }
  Eigen::Index dim() const { return rho_.rows(); }

 private:
  MatrixXcd rho_;
};

QuantumState singlet_state();

// Outcome probabilities for a joint spin measurement at angles
// (theta_x, theta_y); index 0 holds outcome +1, index 1 holds outcome -1.
struct JointProbabilities {
  double p[2][2] = {{0, 0}, {0, 0}};
  double operator()(int alpha, int beta) const {
    return p[alpha > 0 ? 0 : 1][beta > 0 ? 0 : 1];
  }
};
JointProbabilities joint_probabilities(const QuantumState& state,
                                       double theta_x, double theta_y);

// E(theta_x, theta_y) as a trace against the tensor-product observable.
double correlation(const QuantumState& state, double theta_x, double theta_y);

// S = E(a,b) - E(a,b') + E(a',b) + E(a',b'). Shared sign placement for the
// whole library; the minus sits on the (a,b') term.
double chsh(const QuantumState& state, double a, double a_prime, double b,
            double b_prime);
double chsh_singlet(double a, double a_prime, double b, double b_prime);

// Normalized angle density on [center - half_width, center + half_width].
// half_width == 0 is a point mass at the center.
class AngleSmearing {
 public:
  static AngleSmearing point(double center);
  static AngleSmearing uniform(double center, double half_width);
  static AngleSmearing custom(double center, double half_width,
                              std::function<double(double)> density);

  double center() const { return center_; }
  double half_width() const { return half_width_; }
  bool is_point() const { return half_width_ == 0.0; }
  double density(double theta) const;

 private:
  AngleSmearing(double center, double half_width,
                std::function<double(double)> density);
  double center_ = 0.0;
  double half_width_ = 0.0;
  std::function<double(double)> density_;
};

struct Smeared {
  double value = 0.0;
  double error_bound = 0.0;
};

// Correlation when each analyzer angle is drawn from its own smearing
// density: the double integral of -cos(t1 - t2) against both densities,
// evaluated by adaptive Simpson quadrature to 1e-9 absolute error.
Smeared smeared_correlation(const AngleSmearing& sx, const AngleSmearing& sy);

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b);
Vector4cd kron2(const Vector2cd& a, const Vector2cd& b);

// Adaptive Simpson integration with an absolute-error target; the returned
// error is a conservative bound accumulated from the refinement estimates.
struct Quadrature {
  double value = 0.0;
  double error_bound = 0.0;
};
Quadrature integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double tol);

}  // namespace bell::quantum
