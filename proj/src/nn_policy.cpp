#include "pdectrl/nn_policy.hpp"

#include <cmath>
#include <stdexcept>

namespace pdectrl::nn {

namespace {

// First row index of each activation block inside the stacked nu vector.
std::vector<int> block_offsets(const std::vector<int>& layers) {
  std::vector<int> off(layers.size() + 1, 0);
  for (size_t i = 0; i < layers.size(); ++i) off[i + 1] = off[i] + layers[i];
  return off;
}

}  // namespace

Policy make_policy(int n0, const std::vector<int>& hidden, double fill) {
  if (n0 < 1 || hidden.empty()) throw std::invalid_argument("bad architecture");
  Policy p;
  int prev = n0;
  for (int width : hidden) {
    if (width < 1) throw std::invalid_argument("bad layer width");
    p.W.push_back(Eigen::MatrixXd::Constant(width, prev, fill));
    p.b.push_back(Eigen::VectorXd::Zero(width));
    prev = width;
  }
  p.W_out = Eigen::RowVectorXd::Constant(prev, fill);
  p.b_out = 0.0;
  return p;
}

double forward(const Policy& policy, const Eigen::VectorXd& Z) {
  if (Z.size() != policy.input_dim())
    throw std::invalid_argument("state dimension does not match policy input");
  Eigen::VectorXd omega = Z;
  for (size_t i = 0; i < policy.W.size(); ++i)
    omega = (policy.W[i] * omega + policy.b[i]).array().tanh().matrix();
  return policy.W_out.dot(omega) + policy.b_out;
}

IsolatedPolicy isolate(const Policy& policy) {
  const int n0 = policy.input_dim();
  const int n_phi = policy.n_phi();
  const auto layers = policy.layer_sizes();
  const auto off = block_offsets(layers);

  IsolatedPolicy iso;
  iso.n0 = n0;
  iso.layers = layers;
  iso.N_uz = Eigen::RowVectorXd::Zero(n0);
  iso.N_uw = Eigen::RowVectorXd::Zero(n_phi);
  iso.N_vz = Eigen::MatrixXd::Zero(n_phi, n0);
  iso.N_vw = Eigen::MatrixXd::Zero(n_phi, n_phi);
  iso.N_vb = Eigen::VectorXd::Zero(n_phi);

  iso.N_vz.topRows(layers[0]) = policy.W[0];
  iso.N_vb.head(layers[0]) = policy.b[0];
  for (size_t i = 1; i < policy.W.size(); ++i) {
    iso.N_vw.block(off[i], off[i - 1], layers[i], layers[i - 1]) = policy.W[i];
    iso.N_vb.segment(off[i], layers[i]) = policy.b[i];
  }
  iso.N_uw.tail(layers.back()) = policy.W_out;
  iso.N_ub = policy.b_out;
  return iso;
}

double isolated_forward(const IsolatedPolicy& iso, const Eigen::VectorXd& Z) {
  const auto off = block_offsets(iso.layers);
  Eigen::VectorXd omega = Eigen::VectorXd::Zero(iso.n_phi());
  for (size_t i = 0; i < iso.layers.size(); ++i) {
    const Eigen::VectorXd nu = iso.N_vz.middleRows(off[i], iso.layers[i]) * Z +
                               iso.N_vw.middleRows(off[i], iso.layers[i]) * omega +
                               iso.N_vb.segment(off[i], iso.layers[i]);
    omega.segment(off[i], iso.layers[i]) = nu.array().tanh();
  }
  return iso.N_uz.dot(Z) + iso.N_uw.dot(omega) + iso.N_ub;
}

Interval propagate_bounds(const IsolatedPolicy& iso, const Box& box) {
  const auto off = block_offsets(iso.layers);
  Interval out;
  out.lo = Eigen::VectorXd::Zero(iso.n_phi());
  out.hi = Eigen::VectorXd::Zero(iso.n_phi());

  Eigen::VectorXd lo = box.lo, hi = box.hi;  // current layer input interval
  for (size_t i = 0; i < iso.layers.size(); ++i) {
    const Eigen::MatrixXd W = i == 0
        ? Eigen::MatrixXd(iso.N_vz.topRows(iso.layers[0]))
        : Eigen::MatrixXd(iso.N_vw.block(off[i], off[i - 1], iso.layers[i], iso.layers[i - 1]));
    const Eigen::VectorXd bias = iso.N_vb.segment(off[i], iso.layers[i]);
    Eigen::VectorXd nlo(iso.layers[i]), nhi(iso.layers[i]);
    for (int rrow = 0; rrow < W.rows(); ++rrow) {
      double acc_lo = bias(rrow), acc_hi = bias(rrow);
      for (int c = 0; c < W.cols(); ++c) {
        const double w = W(rrow, c);
        if (w >= 0.0) {
          acc_lo += w * lo(c);
          acc_hi += w * hi(c);
        } else {
          acc_lo += w * hi(c);
          acc_hi += w * lo(c);
        }
      }
      nlo(rrow) = acc_lo;
      nhi(rrow) = acc_hi;
    }
    out.lo.segment(off[i], iso.layers[i]) = nlo;
    out.hi.segment(off[i], iso.layers[i]) = nhi;
    lo = nlo.array().tanh();  // tanh is monotone
    hi = nhi.array().tanh();
  }
  return out;
}

SectorBounds sector_bounds(const Eigen::VectorXd& nu_lo, const Eigen::VectorXd& nu_hi) {
  if (nu_lo.size() != nu_hi.size()) throw std::invalid_argument("interval size mismatch");
  const auto slope = [](double v) { return v == 0.0 ? 1.0 : std::tanh(v) / v; };
  SectorBounds sb;
  sb.nu_lo = nu_lo;
  sb.nu_hi = nu_hi;
  sb.m = Eigen::VectorXd::Zero(nu_lo.size());
  sb.r = Eigen::VectorXd::Zero(nu_lo.size());
  for (int i = 0; i < nu_lo.size(); ++i) {
    const double l = nu_lo(i), h = nu_hi(i);
    if (l > h) throw std::invalid_argument("invalid-interval: nu_lo > nu_hi");
    const double gl = slope(l), gh = slope(h);
    if (l == 0.0 && h == 0.0) {
      sb.m(i) = 1.0;
      sb.r(i) = 1.0;
    } else if (l <= 0.0 && h >= 0.0) {
      sb.m(i) = std::min(gl, gh);
      sb.r(i) = 1.0;
    } else {
      sb.m(i) = std::min(gl, gh);
      sb.r(i) = std::max(gl, gh);
    }
  }
  return sb;
}

Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& C4, const std::vector<int>& layers) {
  const int n = static_cast<int>(C4.rows());
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = C4;
  for (size_t k = 1; k < layers.size(); ++k) {
    inv += power;
    if (k + 1 < layers.size()) power = power * C4;
  }
  return inv;
}

TransformedPolicy loop_transform(const IsolatedPolicy& iso, const SectorBounds& sector) {
  const int n_phi = iso.n_phi();
  if (sector.m.size() != n_phi) throw std::invalid_argument("sector size mismatch");

  TransformedPolicy tp;
  tp.layers = iso.layers;
  tp.n0 = iso.n0;
  tp.sector = sector;
  tp.alpha = 0.5 * (sector.m + sector.r);
  tp.beta = 0.5 * (sector.r - sector.m);
  // Degenerate neurons (collapsed interval, m = r) act linearly; their
  // normalized output is pinned to zero so beta = 0 never divides.
  for (int i = 0; i < n_phi; ++i)
    if (tp.beta(i) < 1e-300) tp.beta(i) = 0.0;

  const Eigen::MatrixXd C1 = iso.N_uw * tp.beta.asDiagonal();
  const Eigen::MatrixXd C2 = iso.N_uw * tp.alpha.asDiagonal();
  const Eigen::MatrixXd C3 = iso.N_vw * tp.beta.asDiagonal();
  const Eigen::MatrixXd C4 = iso.N_vw * tp.alpha.asDiagonal();
  const Eigen::MatrixXd E = neumann_inverse(C4, iso.layers);

  tp.Nt_vz = E * iso.N_vz;
  tp.Nt_vx = E * C3;
  tp.Nt_uz = iso.N_uz + C2 * tp.Nt_vz;
  tp.Nt_ux = C1 + C2 * tp.Nt_vx;
  return tp;
}

Eigen::MatrixXd TransformedPolicy::stacked() const {
  const int n_phi_ = n_phi();
  Eigen::MatrixXd N(1 + n_phi_, n0 + n_phi_);
  N.block(0, 0, 1, n0) = Nt_uz;
  N.block(0, n0, 1, n_phi_) = Nt_ux;
  N.block(1, 0, n_phi_, n0) = Nt_vz;
  N.block(1, n0, n_phi_, n_phi_) = Nt_vx;
  return N;
}

double normalized_activation(double nu, double alpha, double beta) {
  if (beta == 0.0) return 0.0;
  return (std::tanh(nu) - alpha * nu) / beta;
}

double transformed_forward(const TransformedPolicy& tp, const Eigen::VectorXd& Z,
                           bool* outside_box) {
  if (Z.size() != tp.n0) throw std::invalid_argument("state dimension mismatch");

  const auto off = block_offsets(tp.layers);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(tp.n_phi());
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(tp.n_phi());
  for (size_t i = 0; i < tp.layers.size(); ++i) {
    const Eigen::VectorXd nu_i = tp.Nt_vz.middleRows(off[i], tp.layers[i]) * Z +
                                 tp.Nt_vx.middleRows(off[i], tp.layers[i]) * x;
    nu.segment(off[i], tp.layers[i]) = nu_i;
    for (int j = 0; j < tp.layers[i]; ++j) {
      const int k = off[i] + j;
      x(k) = normalized_activation(nu_i(j), tp.alpha(k), tp.beta(k));
    }
  }
  if (outside_box != nullptr) {
    // Outside the certified box the map is still defined; flag when any
    // pre-activation escapes its propagated interval.
    *outside_box = false;
    for (int i = 0; i < tp.n_phi(); ++i) {
      if (nu(i) < tp.sector.nu_lo(i) - 1e-9 || nu(i) > tp.sector.nu_hi(i) + 1e-9) {
        *outside_box = true;
        break;
      }
    }
  }
  return tp.Nt_uz.dot(Z) + tp.Nt_ux.dot(x);
}

}  // namespace pdectrl::nn
