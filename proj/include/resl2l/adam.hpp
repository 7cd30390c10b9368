#pragma once

// Adam with bias correction, optional AMSGrad, and decoupled weight decay.
// One optimizer instance covers the three meta-trained tensors.

#include <istream>
#include <ostream>

#include "resl2l/autodiff.hpp"
#include "resl2l/io.hpp"
#include "resl2l/lif.hpp"

namespace resl2l {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool amsgrad = false;
};

struct AdamSlot {
  Mat m, v, vhat;

  void init(const Mat& like) {
    m = Mat::Zero(like.rows(), like.cols());
    v = m;
    vhat = m;
  }
  void update(Mat& w, const Mat& grad, const AdamConfig& c, double bc1, double bc2) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    if (c.amsgrad) vhat = vhat.cwiseMax(v);
    const Mat& veff = c.amsgrad ? vhat : v;
    if (c.weight_decay != 0.0) w -= c.lr * c.weight_decay * w;
    w.array() -=
        c.lr * (m.array() / bc1) / ((veff.array() / bc2).sqrt() + c.eps);
  }
  void save(std::ostream& os) const {
    io::write_matrix(os, m);
    io::write_matrix(os, v);
    io::write_matrix(os, vhat);
  }
  void load(std::istream& is) {
    m = io::read_matrix<Mat>(is);
    v = io::read_matrix<Mat>(is);
    vhat = io::read_matrix<Mat>(is);
  }
  bool operator==(const AdamSlot& o) const {
    const auto same = [](const Mat& a, const Mat& b) {
      return a.rows() == b.rows() && a.cols() == b.cols() &&
             (a.array() == b.array()).all();
    };
    return same(m, o.m) && same(v, o.v) && same(vhat, o.vhat);
  }
};

struct AdamState {
  std::int64_t step = 0;
  AdamSlot w_in, w_rec, w_out;

  explicit AdamState(const ReservoirParams& p) {
    w_in.init(p.w_in);
    w_rec.init(p.w_rec);
    w_out.init(p.w_out);
  }
  AdamState() = default;

  void apply(ReservoirParams& p, const Gradients& g, const AdamConfig& c) {
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    w_in.update(p.w_in, g.d_w_in, c, bc1, bc2);
    w_rec.update(p.w_rec, g.d_w_rec, c, bc1, bc2);
    w_out.update(p.w_out, g.d_w_out, c, bc1, bc2);
    p.w_rec.diagonal().setZero();
  }

  void save(std::ostream& os) const {
    io::write_pod<std::int64_t>(os, step);
    w_in.save(os);
    w_rec.save(os);
    w_out.save(os);
  }
  void load(std::istream& is) {
    step = io::read_pod<std::int64_t>(is);
    w_in.load(is);
    w_rec.load(is);
    w_out.load(is);
  }
  bool operator==(const AdamState& o) const {
    return step == o.step && w_in == o.w_in && w_rec == o.w_rec && w_out == o.w_out;
  }
};

}  // namespace resl2l
