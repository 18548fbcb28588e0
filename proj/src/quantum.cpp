#include "bell/quantum.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include "bell/errors.hpp"

namespace bell::quantum {

namespace {
using std::complex;
constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kEigenvalueFloor = -1e-10;
constexpr double kProbabilityFloor = -1e-12;
constexpr double kQuadratureTol = 1e-9;
}  // namespace

SpinObservable spin_observable(double theta) {
  SpinObservable obs;
  obs.angle = theta;
  const double c = std::cos(theta), s = std::sin(theta);
  obs.matrix << complex<double>(c, 0), complex<double>(s, 0),
      complex<double>(s, 0), complex<double>(-c, 0);
  return obs;
}

Vector2cd spin_eigenvector(double theta, int outcome) {
  const double h = 0.5 * theta;
  Vector2cd v;
  if (outcome > 0)
    v << complex<double>(std::cos(h), 0), complex<double>(std::sin(h), 0);
  else
    v << complex<double>(-std::sin(h), 0), complex<double>(std::cos(h), 0);
  return v;
}

QuantumState::QuantumState(MatrixXcd rho) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols()) throw input_error("state matrix not square");
  if (rho_.rows() < 2 || rho_.rows() > 8)
    throw input_error("state dimension outside 2..8");
  const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) throw input_error("state matrix not Hermitian");
  const double tr_err = std::abs(rho_.trace() - complex<double>(1.0, 0.0));
  if (tr_err > kTraceTol) throw input_error("state trace differs from 1");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigenvalueFloor)
    throw input_error("state matrix has a negative eigenvalue");
}

QuantumState singlet_state() {
  // (|+-> - |-+>)/sqrt(2) in the theta = 0 eigenbasis of both spins.
  Vector4cd psi;
  const double r = 1.0 / std::sqrt(2.0);
  psi << complex<double>(0, 0), complex<double>(r, 0), complex<double>(-r, 0),
      complex<double>(0, 0);
  MatrixXcd rho = psi * psi.adjoint();
  return QuantumState(std::move(rho));
}

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b) {
  Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Vector4cd kron2(const Vector2cd& a, const Vector2cd& b) {
  Vector4cd out;
  out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return out;
}

JointProbabilities joint_probabilities(const QuantumState& state,
                                       double theta_x, double theta_y) {
  if (state.dim() != 4)
    throw input_error("joint probabilities need a two-spin state");
  JointProbabilities jp;
  double sum = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Vector2cd vx = spin_eigenvector(theta_x, i == 0 ? 1 : -1);
    for (int j = 0; j < 2; ++j) {
      const Vector2cd wy = spin_eigenvector(theta_y, j == 0 ? 1 : -1);
      const Vector4cd basis = kron2(vx, wy);
      const complex<double> val = basis.adjoint() * state.rho() * basis;
      double p = val.real();
      if (p < kProbabilityFloor)
        throw internal_error("joint probability below zero");
      if (p < 0.0) p = 0.0;
      jp.p[i][j] = p;
      sum += p;
    }
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw internal_error("joint probabilities do not sum to 1");
  return jp;
}

double correlation(const QuantumState& state, double theta_x, double theta_y) {
  if (state.dim() != 4) throw input_error("correlation needs a two-spin state");
  const Matrix4cd joint =
      kron2(spin_observable(theta_x).matrix, spin_observable(theta_y).matrix);
  return (state.rho() * joint).trace().real();
}

double chsh(const QuantumState& state, double a, double a_prime, double b,
            double b_prime) {
  return correlation(state, a, b) - correlation(state, a, b_prime) +
         correlation(state, a_prime, b) + correlation(state, a_prime, b_prime);
}

double chsh_singlet(double a, double a_prime, double b, double b_prime) {
  static const QuantumState singlet = singlet_state();
  return chsh(singlet, a, a_prime, b, b_prime);
}

AngleSmearing::AngleSmearing(double center, double half_width,
                             std::function<double(double)> density)
    : center_(center), half_width_(half_width), density_(std::move(density)) {}

AngleSmearing AngleSmearing::point(double center) {
  return AngleSmearing(center, 0.0, nullptr);
}

AngleSmearing AngleSmearing::uniform(double center, double half_width) {
  if (half_width < 0.0) throw input_error("negative smearing half width");
  if (half_width == 0.0) return point(center);
  const double w = 1.0 / (2.0 * half_width);
  return AngleSmearing(center, half_width, [w](double) { return w; });
}

AngleSmearing AngleSmearing::custom(double center, double half_width,
                                    std::function<double(double)> density) {
  if (half_width <= 0.0) throw input_error("custom smearing needs width > 0");
  if (!density) throw input_error("custom smearing needs a density");
  AngleSmearing s(center, half_width, std::move(density));
  const Quadrature norm = integrate_adaptive(
      [&s](double t) { return s.density_(t); }, center - half_width,
      center + half_width, kQuadratureTol);
  if (std::fabs(norm.value - 1.0) > 1e-6)
    throw input_error("smearing density is not normalized");
  return s;
}

double AngleSmearing::density(double theta) const {
  if (is_point()) throw internal_error("point smearing has no density");
  if (theta < center_ - half_width_ || theta > center_ + half_width_)
    return 0.0;
  return density_(theta);
}

namespace {

struct SimpsonState {
  const std::function<double(double)>* f;
  double value = 0.0;
  double error_bound = 0.0;
};

double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

void simpson_recurse(SimpsonState& st, double a, double b, double fa,
                     double fm, double fb, double whole, double tol,
                     int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = (*st.f)(lm), frm = (*st.f)(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (depth >= 48 || std::fabs(delta) <= 15.0 * tol) {
    st.value += left + right + delta / 15.0;
    st.error_bound += std::fabs(delta) / 15.0 + 1e-300;
    return;
  }
  simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1);
  simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

Quadrature integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double tol) {
  Quadrature q;
  if (a == b) return q;
  SimpsonState st;
  st.f = &f;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  simpson_recurse(st, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0);
  q.value = st.value;
  q.error_bound = st.error_bound;
  return q;
}

Smeared smeared_correlation(const AngleSmearing& sx, const AngleSmearing& sy) {
  Smeared out;
  if (sx.is_point() && sy.is_point()) {
    out.value = -std::cos(sx.center() - sy.center());
    out.error_bound = 0.0;
    return out;
  }
  if (sx.is_point() || sy.is_point()) {
    const double fixed = sx.is_point() ? sx.center() : sy.center();
    const AngleSmearing& sm = sx.is_point() ? sy : sx;
    const Quadrature q = integrate_adaptive(
        [&](double t) { return sm.density(t) * -std::cos(fixed - t); },
        sm.center() - sm.half_width(), sm.center() + sm.half_width(),
        kQuadratureTol);
    out.value = q.value;
    out.error_bound = q.error_bound;
    return out;
  }
  const double inner_tol = 0.25 * kQuadratureTol;
  double worst_inner = 0.0;
  const auto outer_fn = [&](double t1) {
    const Quadrature inner = integrate_adaptive(
        [&](double t2) { return sy.density(t2) * -std::cos(t1 - t2); },
        sy.center() - sy.half_width(), sy.center() + sy.half_width(),
        inner_tol);
    worst_inner = std::max(worst_inner, inner.error_bound);
    return sx.density(t1) * inner.value;
  };
  const Quadrature outer = integrate_adaptive(
      outer_fn, sx.center() - sx.half_width(), sx.center() + sx.half_width(),
      0.5 * kQuadratureTol);
  out.value = outer.value;
  // Inner error propagates through the outer unit-mass density.
  out.error_bound = outer.error_bound + worst_inner;
  return out;
}

}  // namespace bell::quantum
