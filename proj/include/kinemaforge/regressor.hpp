#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kinemaforge/geometry.hpp"

namespace kf {

enum class RotationRepr { Quaternion, Rot6D };

struct RegressorConfig {
  int hidden_width = 256;
  int encoder_layers = 3;
  int head_width = 128;
  int pe_bands = 6;
  RotationRepr rotation_repr = RotationRepr::Quaternion;
  double lr_step = 1e-4;
  double lr_anchor = 5e-5;
  int max_iters = 1000;
  int patience = 50;
  double divergence_factor = 10.0;
  bool use_anchor = true;
  bool direct = false;  // optimize raw pose parameters, bypassing the network
};

// Rotation matrix from a possibly non-unit quaternion: R(q) = M(q) / |q|^2.
// Scale-invariant, so optimizing raw quaternion coefficients needs no
// explicit normalization constraint, and the derivative below accounts for
// the normalization automatically.
Eigen::Matrix3d rot_hom_matrix(const Quat& q);
// d(loss)/dq given d(loss)/dR, both for the homogeneous formula above.
// Returns (dw, dx, dy, dz).
Eigen::Vector4d rot_hom_backward(const Quat& q, const Eigen::Matrix3d& dL_dR);

// Gradient of the Gram-Schmidt 6D decoding: given d(loss)/dR returns
// d(loss)/d[a1; a2].
Eigen::Matrix<double, 6, 1> rot6d_backward(const Rot6D& r,
                                           const Eigen::Matrix3d& dL_dR);

// Maps raw positions into the roughly [-0.5, 0.5] cube the positional
// encoding expects; built once from the first frame's bounding box.
struct PoseNormalizer {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d normalize(const Eigen::Vector3d& p) const {
    return (p - center) / scale;
  }
  Eigen::Vector3d denormalize(const Eigen::Vector3d& p) const {
    return p * scale + center;
  }
};

// Residual pose regressor shared across clusters: input is a normalized pose
// (position + rotation representation), positionally encoded, run through a
// tanh MLP with two linear heads whose final layers start at zero so the
// network is the identity residual at initialization.
class PoseRegressor {
 public:
  PoseRegressor(const RegressorConfig& cfg, std::uint64_t seed);

  int pose_dim() const { return 3 + rot_dim_; }
  int rot_dim() const { return rot_dim_; }
  int input_dim() const { return in_dim_; }
  std::size_t param_count() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  void zero_grads();

  // Raw (un-encoded) input vector for a pose: [normalized position; rotation
  // representation coefficients].
  Eigen::VectorXd input_repr(const Pose& pose, const PoseNormalizer& norm) const;
  // Positional encoding: [v; sin(2^b v); cos(2^b v)] for b = 0..bands-1.
  Eigen::VectorXd encode(const Eigen::VectorXd& v) const;

  struct Cache {
    Eigen::VectorXd input;                 // encoded input
    std::vector<Eigen::VectorXd> hidden;   // encoder activations
    Eigen::VectorXd pos_hidden, rot_hidden;
  };

  // Residual outputs for one encoded input.
  void forward(const Eigen::VectorXd& encoded, Cache& cache,
               Eigen::Vector3d& res_pos, Eigen::VectorXd& res_rot) const;
  // Accumulates parameter gradients for one cluster's upstream gradients.
  void backward(const Cache& cache, const Eigen::Vector3d& d_res_pos,
                const Eigen::VectorXd& d_res_rot);

 private:
  struct Layer {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;
  };

  Eigen::Map<const Eigen::MatrixXd> weight(const Layer& l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Layer& l) const;
  Eigen::Map<Eigen::MatrixXd> weight_grad(const Layer& l);
  Eigen::Map<Eigen::VectorXd> bias_grad(const Layer& l);

  RegressorConfig cfg_;
  int rot_dim_ = 4;
  int in_dim_ = 0;
  std::vector<Layer> encoder_;
  Layer pos_hidden_, pos_out_, rot_hidden_, rot_out_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

// Adam with bias correction; lr supplied per step so the same state can be
// reused while a schedule (or caller) varies the rate.
struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void step(std::vector<double>& params, const std::vector<double>& grads,
            double lr);
};

}  // namespace kf
