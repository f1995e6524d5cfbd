#pragma once

// Switched linear dynamical system model: region decomposition, per-region
// dynamics, linear feedback, closed loop and the square-root quadratic reward.
// Everything here is templated on the scalar type; the rest of the library
// uses the double aliases at the bottom of the file.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "slds/errors.hpp"

namespace slds {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// {x : L x <= C}, componentwise.
template <typename Scalar>
struct Polyhedron {
  MatrixX<Scalar> L;
  VectorX<Scalar> C;
};

/// {x : r_lo < |x| <= r_hi}; a shell with r_lo == 0 also contains the origin.
template <typename Scalar>
struct RadialShell {
  Scalar r_lo = 0;
  Scalar r_hi = std::numeric_limits<Scalar>::infinity();
};

template <typename Scalar>
class Region {
 public:
  using Shape = std::variant<Polyhedron<Scalar>, RadialShell<Scalar>>;

  static Region polyhedral(MatrixX<Scalar> L, VectorX<Scalar> C, bool declared_unbounded) {
    if (L.rows() != C.size()) {
      throw DimensionMismatch("polyhedral region: L has " + std::to_string(L.rows()) +
                              " rows but C has " + std::to_string(C.size()) + " entries");
    }
    return Region(Polyhedron<Scalar>{std::move(L), std::move(C)}, declared_unbounded);
  }

  static Region radial_shell(Scalar r_lo, Scalar r_hi) {
    if (!(r_lo >= 0) || !(r_lo < r_hi)) {
      throw InvalidArgument("radial shell requires 0 <= r_lo < r_hi");
    }
    // A shell reaching infinity is unbounded by construction.
    return Region(RadialShell<Scalar>{r_lo, r_hi}, std::isinf(static_cast<double>(r_hi)));
  }

  const Shape& shape() const { return shape_; }
  bool declared_unbounded() const { return declared_unbounded_; }
  bool is_polyhedral() const { return std::holds_alternative<Polyhedron<Scalar>>(shape_); }
  const Polyhedron<Scalar>* polyhedron() const { return std::get_if<Polyhedron<Scalar>>(&shape_); }
  const RadialShell<Scalar>* shell() const { return std::get_if<RadialShell<Scalar>>(&shape_); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    if (const auto* p = polyhedron()) {
      return ((p->L * x).array() <= p->C.array()).all();
    }
    const auto& s = std::get<RadialShell<Scalar>>(shape_);
    const Scalar r = x.norm();
    if (r > s.r_hi) return false;
    return r > s.r_lo || (s.r_lo == Scalar(0) && r == Scalar(0));
  }

  /// Column count the region expects, or nullopt for radial shells.
  std::optional<Eigen::Index> dimension() const {
    if (const auto* p = polyhedron()) return p->L.cols();
    return std::nullopt;
  }

 private:
  Region(Shape shape, bool declared_unbounded)
      : shape_(std::move(shape)), declared_unbounded_(declared_unbounded) {}

  Shape shape_;
  bool declared_unbounded_;
};

template <typename Scalar>
struct Dynamics {
  MatrixX<Scalar> A;  // n x n
  MatrixX<Scalar> B;  // n x p
};

/// x_{t+1} = A_j x_t + B_j u_t + w_t for x_t in region j, w_t ~ N(0, I_n).
template <typename Scalar>
class SldsModel {
 public:
  SldsModel(Eigen::Index n, Eigen::Index p, std::vector<Region<Scalar>> regions,
            std::vector<Dynamics<Scalar>> dynamics)
      : n_(n), p_(p), regions_(std::move(regions)), dynamics_(std::move(dynamics)) {
    if (n_ < 1 || p_ < 1) throw InvalidArgument("state and input dimensions must be positive");
    if (regions_.empty()) throw InvalidArgument("model needs at least one region");
    if (regions_.size() != dynamics_.size()) {
      throw DimensionMismatch("model has " + std::to_string(regions_.size()) + " regions but " +
                              std::to_string(dynamics_.size()) + " dynamics pairs");
    }
    for (std::size_t j = 0; j < regions_.size(); ++j) {
      const auto& d = dynamics_[j];
      if (d.A.rows() != n_ || d.A.cols() != n_ || d.B.rows() != n_ || d.B.cols() != p_) {
        throw DimensionMismatch("dynamics of region " + std::to_string(j) +
                                " do not match (n, p) = (" + std::to_string(n_) + ", " +
                                std::to_string(p_) + ")");
      }
      if (auto dim = regions_[j].dimension(); dim && *dim != n_) {
        throw DimensionMismatch("polyhedron of region " + std::to_string(j) + " has " +
                                std::to_string(*dim) + " columns, expected " + std::to_string(n_));
      }
    }
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index p() const { return p_; }
  std::size_t num_regions() const { return regions_.size(); }
  const std::vector<Region<Scalar>>& regions() const { return regions_; }
  const std::vector<Dynamics<Scalar>>& dynamics() const { return dynamics_; }

 private:
  Eigen::Index n_;
  Eigen::Index p_;
  std::vector<Region<Scalar>> regions_;
  std::vector<Dynamics<Scalar>> dynamics_;
};

/// Index of the first declared region containing x.
template <typename Scalar, typename Derived>
std::size_t region_of(const SldsModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.n()) {
    throw DimensionMismatch("state has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(model.n()));
  }
  const auto& regions = model.regions();
  for (std::size_t j = 0; j < regions.size(); ++j) {
    if (regions[j].contains(x)) return j;
  }
  std::ostringstream os;
  os << "no region contains x = [" << x.transpose() << "]";
  throw NoRegion(os.str());
}

/// Largest singular value.
template <typename Derived>
typename Derived::RealScalar spectral_norm(const Eigen::MatrixBase<Derived>& A) {
  if (!A.allFinite()) throw InvalidArgument("spectral_norm: matrix has non-finite entries");
  if (A.size() == 0) return 0;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(A);
  return svd.singularValues()(0);
}

/// Linear feedback u = pi x.
template <typename Scalar>
struct Policy {
  MatrixX<Scalar> pi;  // p x n
};

template <typename Scalar>
class ClosedLoop {
 public:
  const std::vector<MatrixX<Scalar>>& ahat() const { return ahat_; }
  const std::vector<Scalar>& ahat_norms() const { return norms_; }
  const MatrixX<Scalar>& ahat(std::size_t j) const { return ahat_[j]; }
  Scalar max_norm() const {
    Scalar m = 0;
    for (Scalar v : norms_) m = std::max(m, v);
    return m;
  }
  Eigen::Index n() const { return ahat_.front().rows(); }
  std::size_t size() const { return ahat_.size(); }

  /// Closed loop given directly by its per-region matrices.
  static ClosedLoop from_matrices(std::vector<MatrixX<Scalar>> ahat) {
    if (ahat.empty()) throw InvalidArgument("closed loop needs at least one region");
    ClosedLoop cl;
    for (auto& a : ahat) {
      if (a.rows() != a.cols() || a.rows() != ahat.front().rows()) {
        throw DimensionMismatch("closed-loop matrices must be square and equally sized");
      }
      cl.norms_.push_back(spectral_norm(a));
    }
    cl.ahat_ = std::move(ahat);
    return cl;
  }

 private:
  std::vector<MatrixX<Scalar>> ahat_;
  std::vector<Scalar> norms_;
};

/// A_j + B_j pi for every region.
template <typename Scalar>
ClosedLoop<Scalar> closed_loop(const SldsModel<Scalar>& model, const Policy<Scalar>& policy) {
  if (policy.pi.rows() != model.p() || policy.pi.cols() != model.n()) {
    throw DimensionMismatch("policy is " + std::to_string(policy.pi.rows()) + "x" +
                            std::to_string(policy.pi.cols()) + ", expected " +
                            std::to_string(model.p()) + "x" + std::to_string(model.n()));
  }
  std::vector<MatrixX<Scalar>> ahat;
  ahat.reserve(model.num_regions());
  for (const auto& d : model.dynamics()) ahat.push_back(d.A + d.B * policy.pi);
  return ClosedLoop<Scalar>::from_matrices(std::move(ahat));
}

/// r(x) = sqrt(x' (Q + pi' R pi) x).
template <typename Scalar>
class RewardSpec {
 public:
  RewardSpec(MatrixX<Scalar> Q, MatrixX<Scalar> R, const Policy<Scalar>& policy,
             bool normalize = false, Scalar tol = Scalar(1e-10))
      : Q_(std::move(Q)), R_(std::move(R)) {
    const auto n = policy.pi.cols();
    const auto p = policy.pi.rows();
    if (Q_.rows() != n || Q_.cols() != n) throw DimensionMismatch("Q must be n x n");
    if (R_.rows() != p || R_.cols() != p) throw DimensionMismatch("R must be p x p");
    if (!is_symmetric(Q_, tol) || !is_symmetric(R_, tol)) {
      throw InvalidArgument("Q and R must be symmetric");
    }
    if (min_eigenvalue(Q_) < -tol) throw InvalidArgument("Q must be positive semidefinite");
    if (min_eigenvalue(R_) <= tol) throw InvalidArgument("R must be positive definite");
    P_ = Q_ + policy.pi.transpose() * R_ * policy.pi;
    P_ = Scalar(0.5) * (P_ + P_.transpose()).eval();
    if (normalize) {
      const Scalar s = spectral_norm(P_);
      if (s > Scalar(1)) P_ /= s;
      normalized_ = true;
    }
    identity_ = P_.isIdentity(Scalar(0));
  }

  /// Reward with the effective matrix supplied directly (must be PSD).
  static RewardSpec from_effective(MatrixX<Scalar> P, Scalar tol = Scalar(1e-10)) {
    if (P.rows() != P.cols()) throw DimensionMismatch("effective reward matrix must be square");
    if (!is_symmetric(P, tol) || min_eigenvalue(P) < -tol) {
      throw InvalidArgument("effective reward matrix must be symmetric positive semidefinite");
    }
    RewardSpec r;
    r.P_ = std::move(P);
    r.identity_ = r.P_.isIdentity(Scalar(0));
    return r;
  }

  const MatrixX<Scalar>& effective() const { return P_; }
  /// Empty when built from_effective.
  const MatrixX<Scalar>& Q() const { return Q_; }
  const MatrixX<Scalar>& R() const { return R_; }
  bool normalized() const { return normalized_; }
  Eigen::Index n() const { return P_.rows(); }
  bool is_identity() const { return identity_; }

 private:
  RewardSpec() = default;

  static bool is_symmetric(const MatrixX<Scalar>& M, Scalar tol) {
    return ((M - M.transpose()).cwiseAbs().array() <= tol * (Scalar(1) + M.cwiseAbs().maxCoeff()))
        .all();
  }
  static Scalar min_eigenvalue(const MatrixX<Scalar>& M) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  MatrixX<Scalar> Q_;
  MatrixX<Scalar> R_;
  MatrixX<Scalar> P_;
  bool identity_ = false;
  bool normalized_ = false;
};

template <typename Scalar, typename Derived>
Scalar reward(const Eigen::MatrixBase<Derived>& x, const RewardSpec<Scalar>& spec) {
  if (x.size() != spec.n()) throw DimensionMismatch("reward: state dimension mismatch");
  const Scalar q = spec.is_identity() ? x.squaredNorm() : x.dot(spec.effective() * x);
  return q > Scalar(0) ? std::sqrt(q) : Scalar(0);
}

using Regiond = Region<double>;
using SldsModeld = SldsModel<double>;
using Policyd = Policy<double>;
using ClosedLoopd = ClosedLoop<double>;
using RewardSpecd = RewardSpec<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

}  // namespace slds
