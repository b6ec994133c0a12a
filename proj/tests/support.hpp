#pragma once

// Independent reference implementations shared by the unit tests. Nothing here
// calls into the library's assembly or element code.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "toporisk/mesh_fea.hpp"

namespace oracle {

/// Plane-stress elasticity matrix.
inline Eigen::Matrix3d plane_stress(double E, double nu) {
  Eigen::Matrix3d d;
  d << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  return d * (E / (1 - nu * nu));
}

inline Eigen::Matrix<double, 6, 6> isotropic_3d(double E, double nu) {
  const double lam = E * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = E / (2 * (1 + nu));
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d(i, j) = lam;
    d(i, i) = lam + 2 * mu;
    d(i + 3, i + 3) = mu;
  }
  return d;
}

inline std::vector<std::pair<double, double>> gauss(int points) {
  if (points == 2) return {{-1 / std::sqrt(3.0), 1.0}, {1 / std::sqrt(3.0), 1.0}};
  return {{-std::sqrt(0.6), 5.0 / 9}, {0.0, 8.0 / 9}, {std::sqrt(0.6), 5.0 / 9}};
}

/// Q4 element by numerical quadrature; nodes counterclockwise from the lower left.
inline Eigen::MatrixXd q4_quadrature(double E, double nu, double h, double t, int points = 2) {
  const double xi_n[4] = {-1, 1, 1, -1}, eta_n[4] = {-1, -1, 1, 1};
  const Eigen::Matrix3d D = plane_stress(E, nu);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(8, 8);
  for (auto [xi, wx] : gauss(points))
    for (auto [eta, wy] : gauss(points)) {
      Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double dx = 0.25 * xi_n[a] * (1 + eta * eta_n[a]) * 2 / h;
        const double dy = 0.25 * eta_n[a] * (1 + xi * xi_n[a]) * 2 / h;
        B(0, 2 * a) = dx;
        B(1, 2 * a + 1) = dy;
        B(2, 2 * a) = dy;
        B(2, 2 * a + 1) = dx;
      }
      k += t * wx * wy * (h * h / 4) * B.transpose() * D * B;
    }
  return k;
}

/// Hex8 element by numerical quadrature; bottom face counterclockwise, then top.
inline Eigen::MatrixXd hex8_quadrature(double E, double nu, double h, int points = 3) {
  const double xn[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
  const double yn[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
  const double zn[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
  const auto D = isotropic_3d(E, nu);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(24, 24);
  for (auto [xi, wx] : gauss(points))
    for (auto [eta, wy] : gauss(points))
      for (auto [zeta, wz] : gauss(points)) {
        Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
        for (int a = 0; a < 8; ++a) {
          const double s = 2 / h / 8;
          const double dx = s * xn[a] * (1 + eta * yn[a]) * (1 + zeta * zn[a]);
          const double dy = s * yn[a] * (1 + xi * xn[a]) * (1 + zeta * zn[a]);
          const double dz = s * zn[a] * (1 + xi * xn[a]) * (1 + eta * yn[a]);
          B(0, 3 * a) = dx;
          B(1, 3 * a + 1) = dy;
          B(2, 3 * a + 2) = dz;
          B(3, 3 * a) = dy;
          B(3, 3 * a + 1) = dx;
          B(4, 3 * a + 1) = dz;
          B(4, 3 * a + 2) = dy;
          B(5, 3 * a) = dz;
          B(5, 3 * a + 2) = dx;
        }
        k += wx * wy * wz * std::pow(h / 2, 3) * B.transpose() * D * B;
      }
  return k;
}

/// Element DOFs from cell geometry alone.
inline std::vector<int> cell_dofs(const toporisk::GroundMesh& m, int e) {
  const int nx = m.cells(0), ny = m.cells(1);
  std::vector<int> dofs;
  if (m.dim() == 2) {
    const int i = e % nx, j = e / nx;
    const int nodes[4] = {j * (nx + 1) + i, j * (nx + 1) + i + 1, (j + 1) * (nx + 1) + i + 1, (j + 1) * (nx + 1) + i};
    for (int n : nodes) dofs.insert(dofs.end(), {2 * n, 2 * n + 1});
  } else {
    const int i = e % nx, j = (e / nx) % ny, k = e / (nx * ny);
    auto node = [&](int a, int b, int c) { return (c * (ny + 1) + b) * (nx + 1) + a; };
    const int nodes[8] = {node(i, j, k),         node(i + 1, j, k),     node(i + 1, j + 1, k),
                          node(i, j + 1, k),     node(i, j, k + 1),     node(i + 1, j, k + 1),
                          node(i + 1, j + 1, k + 1), node(i, j + 1, k + 1)};
    for (int n : nodes) dofs.insert(dofs.end(), {3 * n, 3 * n + 1, 3 * n + 2});
  }
  return dofs;
}

/// Dense K = sum rho_e P_e^T Ke P_e with the fixed rows/columns replaced by identity.
inline Eigen::MatrixXd dense_stiffness(const toporisk::GroundMesh& m, const Eigen::MatrixXd& ke,
                                       const Eigen::VectorXd& rho) {
  const int n = m.n_dofs();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < m.n_elements(); ++e) {
    const auto d = cell_dofs(m, e);
    for (std::size_t a = 0; a < d.size(); ++a)
      for (std::size_t b = 0; b < d.size(); ++b) k(d[a], d[b]) += rho[e] * ke(a, b);
  }
  for (int dof : m.fixed_dofs()) {
    k.row(dof).setZero();
    k.col(dof).setZero();
    k(dof, dof) = 1.0;
  }
  return k;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& g, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(g);
  return v;
}

/// Zero the entries on fixed DOFs so the vector is a valid load.
inline Eigen::VectorXd free_only(const toporisk::GroundMesh& m, Eigen::VectorXd v) {
  for (int d : m.fixed_dofs()) v[d] = 0.0;
  return v;
}

inline double rel_inf(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& v) {
  return (ref - v).lpNorm<Eigen::Infinity>() / std::max(ref.lpNorm<Eigen::Infinity>(), 1e-300);
}

}  // namespace oracle
