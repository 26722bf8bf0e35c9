#include "kinemaforge/regressor.hpp"

#include <cmath>

#include "kinemaforge/error.hpp"
#include "kinemaforge/rng.hpp"

namespace kf {

Eigen::Matrix3d rot_hom_matrix(const Quat& q) {
  double n = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  if (n < 1e-300) return Eigen::Matrix3d::Identity();
  Eigen::Matrix3d M;
  M << q.w * q.w + q.x * q.x - q.y * q.y - q.z * q.z,
      2.0 * (q.x * q.y - q.w * q.z), 2.0 * (q.x * q.z + q.w * q.y),
      2.0 * (q.x * q.y + q.w * q.z),
      q.w * q.w - q.x * q.x + q.y * q.y - q.z * q.z,
      2.0 * (q.y * q.z - q.w * q.x), 2.0 * (q.x * q.z - q.w * q.y),
      2.0 * (q.y * q.z + q.w * q.x),
      q.w * q.w - q.x * q.x - q.y * q.y + q.z * q.z;
  return M / n;
}

Eigen::Vector4d rot_hom_backward(const Quat& q, const Eigen::Matrix3d& dL_dR) {
  double n = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  Eigen::Matrix3d R = rot_hom_matrix(q);

  // dM/dq for the unnormalized matrix M = n * R.
  Eigen::Matrix3d dMw, dMx, dMy, dMz;
  dMw << q.w, -q.z, q.y, q.z, q.w, -q.x, -q.y, q.x, q.w;
  dMx << q.x, q.y, q.z, q.y, -q.x, -q.w, q.z, q.w, -q.x;
  dMy << -q.y, q.x, q.w, q.x, q.y, q.z, -q.w, q.z, -q.y;
  dMz << -q.z, -q.w, q.x, q.w, -q.z, q.y, q.x, q.y, q.z;
  dMw *= 2.0;
  dMx *= 2.0;
  dMy *= 2.0;
  dMz *= 2.0;

  // R = M / n  =>  dR/dqk = (dM/dqk - (dn/dqk) R) / n with dn/dqk = 2 qk.
  auto contract = [&](const Eigen::Matrix3d& dM, double qk) {
    return ((dM - 2.0 * qk * R).cwiseProduct(dL_dR)).sum() / n;
  };
  return {contract(dMw, q.w), contract(dMx, q.x), contract(dMy, q.y),
          contract(dMz, q.z)};
}

Eigen::Matrix<double, 6, 1> rot6d_backward(const Rot6D& r,
                                           const Eigen::Matrix3d& dL_dR) {
  double n1 = r.a1.norm();
  Eigen::Vector3d b1 = r.a1 / n1;
  Eigen::Vector3d u2 = r.a2 - b1.dot(r.a2) * b1;
  double n2 = u2.norm();
  Eigen::Vector3d b2 = u2 / n2;

  Eigen::Vector3d g1 = dL_dR.col(0);
  Eigen::Vector3d g2 = dL_dR.col(1);
  Eigen::Vector3d g3 = dL_dR.col(2);

  // b3 = b1 x b2 feeds back into both columns.
  Eigen::Vector3d gb1 = g1 + b2.cross(g3);
  Eigen::Vector3d gb2 = g2 + g3.cross(b1);

  // b2 = u2 / |u2|.
  Eigen::Vector3d gu2 = (gb2 - b2.dot(gb2) * b2) / n2;

  // u2 = a2 - (b1 . a2) b1.
  double s = b1.dot(r.a2);
  Eigen::Vector3d ga2 = gu2 - gu2.dot(b1) * b1;
  gb1 += -gu2.dot(b1) * r.a2 - s * gu2;

  // b1 = a1 / |a1|.
  Eigen::Vector3d ga1 = (gb1 - b1.dot(gb1) * b1) / n1;

  Eigen::Matrix<double, 6, 1> out;
  out << ga1, ga2;
  return out;
}

// PoseRegressor -------------------------------------------------------------

PoseRegressor::PoseRegressor(const RegressorConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  if (cfg.hidden_width < 1 || cfg.encoder_layers < 1 || cfg.head_width < 1 ||
      cfg.pe_bands < 0) {
    throw Error(ErrorCode::InvalidConfig, "regressor: bad architecture sizes");
  }
  rot_dim_ = cfg.rotation_repr == RotationRepr::Quaternion ? 4 : 6;
  int d = pose_dim();
  in_dim_ = d + 2 * cfg.pe_bands * d;

  std::size_t off = 0;
  auto make_layer = [&](int in, int out) {
    Layer l;
    l.in = in;
    l.out = out;
    l.w_off = off;
    off += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    l.b_off = off;
    off += static_cast<std::size_t>(out);
    return l;
  };

  int prev = in_dim_;
  for (int i = 0; i < cfg.encoder_layers; ++i) {
    encoder_.push_back(make_layer(prev, cfg.hidden_width));
    prev = cfg.hidden_width;
  }
  pos_hidden_ = make_layer(prev, cfg.head_width);
  pos_out_ = make_layer(cfg.head_width, 3);
  rot_hidden_ = make_layer(prev, cfg.head_width);
  rot_out_ = make_layer(cfg.head_width, rot_dim_);

  params_.assign(off, 0.0);
  grads_.assign(off, 0.0);

  // Uniform(-1/sqrt(fan_in)) weights, zero biases; the two output layers stay
  // at zero so the residual starts as the identity map.
  Rng rng(seed);
  auto init_layer = [&](const Layer& l, bool zero) {
    if (zero) return;
    double s = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::size_t count = static_cast<std::size_t>(l.in) * l.out;
    for (std::size_t i = 0; i < count; ++i) {
      params_[l.w_off + i] = rng.uniform(-s, s);
    }
  };
  for (const auto& l : encoder_) init_layer(l, false);
  init_layer(pos_hidden_, false);
  init_layer(pos_out_, true);
  init_layer(rot_hidden_, false);
  init_layer(rot_out_, true);
}

void PoseRegressor::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

Eigen::Map<const Eigen::MatrixXd> PoseRegressor::weight(const Layer& l) const {
  return {params_.data() + l.w_off, l.out, l.in};
}
Eigen::Map<const Eigen::VectorXd> PoseRegressor::bias(const Layer& l) const {
  return {params_.data() + l.b_off, l.out};
}
Eigen::Map<Eigen::MatrixXd> PoseRegressor::weight_grad(const Layer& l) {
  return {grads_.data() + l.w_off, l.out, l.in};
}
Eigen::Map<Eigen::VectorXd> PoseRegressor::bias_grad(const Layer& l) {
  return {grads_.data() + l.b_off, l.out};
}

Eigen::VectorXd PoseRegressor::input_repr(const Pose& pose,
                                          const PoseNormalizer& norm) const {
  Eigen::VectorXd v(pose_dim());
  v.head<3>() = norm.normalize(pose.position);
  if (cfg_.rotation_repr == RotationRepr::Quaternion) {
    v[3] = pose.orientation.w;
    v[4] = pose.orientation.x;
    v[5] = pose.orientation.y;
    v[6] = pose.orientation.z;
  } else {
    Rot6D r = rot6d_from_matrix(pose.orientation.to_matrix());
    v.segment<3>(3) = r.a1;
    v.segment<3>(6) = r.a2;
  }
  return v;
}

Eigen::VectorXd PoseRegressor::encode(const Eigen::VectorXd& v) const {
  int d = static_cast<int>(v.size());
  Eigen::VectorXd e(d * (1 + 2 * cfg_.pe_bands));
  e.head(d) = v;
  int off = d;
  double f = 1.0;
  for (int b = 0; b < cfg_.pe_bands; ++b) {
    for (int i = 0; i < d; ++i) e[off + i] = std::sin(f * v[i]);
    off += d;
    for (int i = 0; i < d; ++i) e[off + i] = std::cos(f * v[i]);
    off += d;
    f *= 2.0;
  }
  return e;
}

void PoseRegressor::forward(const Eigen::VectorXd& encoded, Cache& cache,
                            Eigen::Vector3d& res_pos,
                            Eigen::VectorXd& res_rot) const {
  cache.input = encoded;
  cache.hidden.resize(encoder_.size());
  const Eigen::VectorXd* x = &cache.input;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    cache.hidden[i] = (weight(encoder_[i]) * (*x) + bias(encoder_[i]))
                          .array()
                          .tanh();
    x = &cache.hidden[i];
  }
  cache.pos_hidden = (weight(pos_hidden_) * (*x) + bias(pos_hidden_)).array().tanh();
  res_pos = weight(pos_out_) * cache.pos_hidden + bias(pos_out_);
  cache.rot_hidden = (weight(rot_hidden_) * (*x) + bias(rot_hidden_)).array().tanh();
  res_rot = weight(rot_out_) * cache.rot_hidden + bias(rot_out_);
}

void PoseRegressor::backward(const Cache& cache, const Eigen::Vector3d& d_res_pos,
                             const Eigen::VectorXd& d_res_rot) {
  const Eigen::VectorXd& trunk =
      encoder_.empty() ? cache.input : cache.hidden.back();

  // Heads.  d(tanh)/dx = 1 - y^2 with y the cached activation.
  weight_grad(pos_out_).noalias() += d_res_pos * cache.pos_hidden.transpose();
  bias_grad(pos_out_) += d_res_pos;
  Eigen::VectorXd d_pos_h =
      (weight(pos_out_).transpose() * d_res_pos).cwiseProduct(
          (1.0 - cache.pos_hidden.array().square()).matrix());
  weight_grad(pos_hidden_).noalias() += d_pos_h * trunk.transpose();
  bias_grad(pos_hidden_) += d_pos_h;

  weight_grad(rot_out_).noalias() += d_res_rot * cache.rot_hidden.transpose();
  bias_grad(rot_out_) += d_res_rot;
  Eigen::VectorXd d_rot_h =
      (weight(rot_out_).transpose() * d_res_rot).cwiseProduct(
          (1.0 - cache.rot_hidden.array().square()).matrix());
  weight_grad(rot_hidden_).noalias() += d_rot_h * trunk.transpose();
  bias_grad(rot_hidden_) += d_rot_h;

  Eigen::VectorXd d_trunk = weight(pos_hidden_).transpose() * d_pos_h +
                            weight(rot_hidden_).transpose() * d_rot_h;

  for (std::size_t i = encoder_.size(); i-- > 0;) {
    Eigen::VectorXd d_pre = d_trunk.cwiseProduct(
        (1.0 - cache.hidden[i].array().square()).matrix());
    const Eigen::VectorXd& below = i == 0 ? cache.input : cache.hidden[i - 1];
    weight_grad(encoder_[i]).noalias() += d_pre * below.transpose();
    bias_grad(encoder_[i]) += d_pre;
    if (i > 0) d_trunk = weight(encoder_[i]).transpose() * d_pre;
  }
}

void AdamState::step(std::vector<double>& params,
                     const std::vector<double>& grads, double lr) {
  ++t;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
    double mh = m[i] / c1;
    double vh = v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

}  // namespace kf
