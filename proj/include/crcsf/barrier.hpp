#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "crcsf/dynamics.hpp"

namespace crcsf {

struct BarrierSpec {
  double safety_radius = 1.0;        // R, meters
  double kappa = 1.0;                // linear class-K gain on h
  double hocbf_gain = 1.0;           // linear class-K gain on psi1
  double neighborhood_radius = 3.0;  // R_N >= R
};

/// Constants feeding the discretization robustness margin eta. L_f and L_x
/// bound the pair-system dynamics (Jacobian norm and trajectory speed); L_h
/// bounds the gradient of the cascaded barrier psi1; the products L_h*L_f and
/// L_h*L_g dominate the Lipschitz constants of the Lie derivatives of psi1;
/// L_kh bounds the class-K term; B_u bounds the joint control norm.
struct LipschitzBundle {
  double L_x = 0.0;
  double L_f = 0.0;
  double L_g = 0.0;
  double L_h = 0.0;
  double L_kh = 0.0;
  double B_u = 1.0;
};

struct CertificatePair {
  double b_true = 0.0;
  double b_pred = 0.0;
  int k = 0;
};

/// h(x_R, x_H) = ||p_R - p_H||^2 - R^2.
double h_value(const RobotState& robot, const HumanState& human, const BarrierSpec& spec);

/// psi1 = dh/dt + kappa * h for the robot/human pair, with the human's planar
/// velocity taken from u_human (single integrator) or the encoded state
/// (unicycle).
double psi1(const JointState& x, int human_index, const Control& u_human,
            const BarrierSpec& spec, HumanModel model);

struct ConstraintCoeffs {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0.0;
};

/// Coefficients of the affine safe-control condition a.dot(u_R) + b >= 0 for
/// one human, i.e. d(psi1)/dt + hocbf_gain * psi1 - margin >= 0 expanded in
/// the robot control. The human's contribution and the margin fold into b.
ConstraintCoeffs constraint_coefficients(const JointState& x, int human_index,
                                         const Control& u_human, const BarrierSpec& spec,
                                         HumanModel model, double margin);

/// Barrier certificate: the constraint left-hand side minus eta(bundle, dt).
double certificate(const JointState& x, const Control& u_robot, const Control& u_human,
                   int human_index, const BarrierSpec& spec, HumanModel model,
                   const LipschitzBundle& bundle, double dt);

/// Same with an explicit margin instead of eta.
double certificate_with_margin(const JointState& x, const Control& u_robot,
                               const Control& u_human, int human_index,
                               const BarrierSpec& spec, HumanModel model, double margin);

/// eta = dt * L_x * (L_h*L_g*B_u + L_h*L_f + L_kh).
double eta(const LipschitzBundle& bundle, double dt);

/// Humans within neighborhood_radius (closed ball), ascending distance,
/// ties broken by index.
std::vector<int> neighborhood(const JointState& x, const BarrierSpec& spec);

/// State region sampled when estimating Lipschitz constants. Distances are
/// robot-to-human; the robot heading, human heading and approach angle are
/// sampled uniformly. The default region is the near-boundary shell: the
/// inter-sample guarantee only has content where h can reach zero within one
/// hold interval, and certificate gradients (hence eta) grow with distance.
struct LipschitzSampleBox {
  double dist_min = 0.4;
  double dist_max = 2.6;
  double robot_v_min = -0.8;
  double robot_v_max = 2.3;
  double human_speed_max = 1.8;
};

/// Max finite-difference slope of f over the box, inflated by 1.2.
/// Deterministic given the seed. Throws on a degenerate box or n_samples < 2.
double estimate_max_slope(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n_samples,
                          std::uint64_t seed);

/// Estimates the full bundle for the robot/human pair system over the box by
/// finite-difference slope sampling, inflated by 1.2. L_f is additionally
/// raised when the measured Lipschitz constant of the Lie derivative
/// L_f psi1 exceeds L_h * L_f; same for L_g, so eta built from the bundle
/// dominates the certificate drift rate over the box.
LipschitzBundle estimate_lipschitz(const LipschitzSampleBox& box, const DynamicsConfig& cfg,
                                   const BarrierSpec& spec, int n_samples, std::uint64_t seed);

}  // namespace crcsf
