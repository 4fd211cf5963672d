#include "relocc/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace relocc {

Param* ParamStore::add(const std::string& name, Mat init) {
  if (find(name)) throw std::invalid_argument("duplicate param name: " + name);
  params_.push_back(std::make_unique<Param>(name, std::move(init)));
  return params_.back().get();
}

Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

size_t ParamStore::count() const {
  size_t n = 0;
  for (const auto& p : params_) n += size_t(p->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (const auto& p : params_) p->grad.setZero();
}

Var Tape::leaf(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), false, nullptr});
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::param(Param& p) {
  Var v = leaf(p.value);
  param_leaves_.emplace_back(v.id, &p);
  return v;
}

Var Tape::make(Mat v, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(v), Mat(), false, std::move(backward)});
  return Var{this, int(nodes_.size()) - 1};
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.touched) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.touched = true;
  }
  return n.grad;
}

void Tape::accum(int id, const Mat& g) { grad(id) += g; }

void Tape::backward(Var root, double seed) {
  if (root.tape != this) throw std::invalid_argument("backward: foreign var");
  const Mat& rv = value(root.id);
  if (rv.rows() != 1 || rv.cols() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  grad(root.id)(0, 0) += seed;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.touched && n.backward) n.backward();
  }
  for (auto& [id, p] : param_leaves_) {
    if (nodes_[id].touched) p->grad += nodes_[id].grad;
  }
}

void Tape::reset() {
  nodes_.clear();
  param_leaves_.clear();
}

namespace ops {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("vars from different tapes");
  return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.val() + b.val(), [&t, a, b, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(a.id, g);
    t.accum(b.id, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.val() - b.val(), [&t, a, b, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(a.id, g);
    t.accum(b.id, -g);
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.make(a.val() * s, [&t, a, s, id = int(t.size())]() {
    t.accum(a.id, t.grad(id) * s);
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.val() * b.val(), [&t, a, b, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(a.id, g * b.val().transpose());
    t.accum(b.id, a.val().transpose() * g);
  });
}

Var transpose(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().transpose(), [&t, x, id = int(t.size())]() {
    t.accum(x.id, t.grad(id).transpose());
  });
}

Var relu(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().cwiseMax(0.0), [&t, x, id = int(t.size())]() {
    Mat mask = (x.val().array() > 0.0).cast<double>();
    t.accum(x.id, t.grad(id).cwiseProduct(mask));
  });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape;
  Mat s = (1.0 / (1.0 + (-x.val().array()).exp())).matrix();
  return t.make(s, [&t, x, s, id = int(t.size())]() {
    Mat ds = s.array() * (1.0 - s.array());
    t.accum(x.id, t.grad(id).cwiseProduct(ds));
  });
}

Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  Mat v = x.val();
  for (int r = 0; r < v.rows(); ++r) {
    Eigen::ArrayXd row = v.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    v.row(r) = (row / row.sum()).matrix();
  }
  return t.make(v, [&t, x, s = v, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    Eigen::VectorXd rowsum = g.cwiseProduct(s).rowwise().sum();
    Mat dx = s.cwiseProduct(g - rowsum * Eigen::RowVectorXd::Ones(s.cols()));
    t.accum(x.id, dx);
  });
}

Var gather_rows(Var x, const std::vector<int>& rows) {
  Tape& t = *x.tape;
  Mat v(rows.size(), x.val().cols());
  for (size_t i = 0; i < rows.size(); ++i) v.row(int(i)) = x.val().row(rows[i]);
  return t.make(v, [&t, x, rows, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    Mat dx = Mat::Zero(x.val().rows(), x.val().cols());
    for (size_t i = 0; i < rows.size(); ++i) dx.row(rows[i]) += g.row(int(i));
    t.accum(x.id, dx);
  });
}

Var linear(Var x, Var w, Var b) {
  Tape& t = same_tape(x, w);
  Mat y = x.val() * w.val();
  if (b.tape) y.rowwise() += b.val().row(0);
  return t.make(y, [&t, x, w, b, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(x.id, g * w.val().transpose());
    t.accum(w.id, x.val().transpose() * g);
    if (b.tape) t.accum(b.id, g.colwise().sum());
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(x, gamma);
  const Mat& v = x.val();
  const int n = int(v.cols());
  Eigen::VectorXd mu = v.rowwise().mean();
  Mat centered = v.array().colwise() - mu.array();
  Eigen::VectorXd var = centered.array().square().rowwise().mean();
  Eigen::VectorXd inv_sigma = (var.array() + eps).rsqrt();
  Mat xhat = (centered.array().colwise() * inv_sigma.array()).matrix();
  Mat y = ((xhat.array().rowwise() * gamma.val().row(0).array()).rowwise() +
           beta.val().row(0).array())
              .matrix();
  (void)n;
  return t.make(y, [&t, x, gamma, xhat, inv_sigma, beta, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(beta.id, g.colwise().sum());
    t.accum(gamma.id, g.cwiseProduct(xhat).colwise().sum());
    Mat dxhat = (g.array().rowwise() * gamma.val().row(0).array()).matrix();
    Eigen::VectorXd m1 = dxhat.rowwise().mean();
    Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
    Mat dx = (dxhat.array().colwise() - m1.array()).matrix();
    dx.array() -= xhat.array().colwise() * m2.array();
    dx.array().colwise() *= inv_sigma.array();
    t.accum(x.id, dx);
  });
}

Var dropout(Var x, double rate, std::mt19937_64& rng, bool training) {
  Tape& t = *x.tape;
  if (!training || rate <= 0.0) {
    return t.make(x.val(), [&t, x, id = int(t.size())]() {
      t.accum(x.id, t.grad(id));
    });
  }
  std::bernoulli_distribution keep(1.0 - rate);
  Mat mask(x.val().rows(), x.val().cols());
  const double inv = 1.0 / (1.0 - rate);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) mask(r, c) = keep(rng) ? inv : 0.0;
  return t.make(x.val().cwiseProduct(mask), [&t, x, mask, id = int(t.size())]() {
    t.accum(x.id, t.grad(id).cwiseProduct(mask));
  });
}

Var mha_concat(Var q, Var k, Var v, Var wq, Var wk, Var wv, int n_heads,
               std::vector<Mat>* capture) {
  Tape& t = same_tape(q, k);
  const int d = int(q.val().cols());
  if (d % n_heads != 0) throw std::invalid_argument("d not divisible by heads");
  const int dh = d / n_heads;
  const double inv_scale = 1.0 / std::sqrt(double(d));

  Mat qp = q.val() * wq.val();
  Mat kp = k.val() * wk.val();
  Mat vp = v.val() * wv.val();
  const int n = int(qp.rows()), m = int(kp.rows());

  auto softmaxed = std::make_shared<std::vector<Mat>>();
  softmaxed->reserve(n_heads);
  Mat out(n, d);
  for (int h = 0; h < n_heads; ++h) {
    Mat z = qp.middleCols(h * dh, dh) * kp.middleCols(h * dh, dh).transpose() *
            inv_scale;
    for (int r = 0; r < n; ++r) {
      Eigen::ArrayXd row = z.row(r).array();
      row -= row.maxCoeff();
      row = row.exp();
      z.row(r) = (row / row.sum()).matrix();
    }
    softmaxed->push_back(z);
    out.middleCols(h * dh, dh) = z * vp.middleCols(h * dh, dh);
  }
  if (capture) *capture = *softmaxed;

  return t.make(out, [&t, q, k, v, wq, wk, wv, qp = std::move(qp), kp = std::move(kp),
                      vp = std::move(vp), softmaxed, n_heads, dh, inv_scale, n, m,
                      id = int(t.size())]() {
    const Mat& g = t.grad(id);
    Mat dqp = Mat::Zero(n, n_heads * dh);
    Mat dkp = Mat::Zero(m, n_heads * dh);
    Mat dvp = Mat::Zero(m, n_heads * dh);
    for (int h = 0; h < n_heads; ++h) {
      const Mat& s = (*softmaxed)[h];
      Mat gh = g.middleCols(h * dh, dh);
      dvp.middleCols(h * dh, dh) = s.transpose() * gh;
      Mat ds = gh * vp.middleCols(h * dh, dh).transpose();
      Eigen::VectorXd rowsum = ds.cwiseProduct(s).rowwise().sum();
      Mat dz = s.cwiseProduct(ds - rowsum * Eigen::RowVectorXd::Ones(m));
      dz *= inv_scale;
      dqp.middleCols(h * dh, dh) = dz * kp.middleCols(h * dh, dh);
      dkp.middleCols(h * dh, dh) = dz.transpose() * qp.middleCols(h * dh, dh);
    }
    t.accum(q.id, dqp * wq.val().transpose());
    t.accum(wq.id, q.val().transpose() * dqp);
    t.accum(k.id, dkp * wk.val().transpose());
    t.accum(wk.id, k.val().transpose() * dkp);
    t.accum(v.id, dvp * wv.val().transpose());
    t.accum(wv.id, v.val().transpose() * dvp);
  });
}

namespace {

struct Im2ColPlan {
  int h_out, w_out, patch;
  // For each output column and patch row: source column in x, or -1 (pad).
  std::vector<int> src;
};

Im2ColPlan plan_im2col(int c_in, int h, int w, int kh, int kw, int stride, int pad) {
  Im2ColPlan p;
  p.h_out = (h + 2 * pad - kh) / stride + 1;
  p.w_out = (w + 2 * pad - kw) / stride + 1;
  p.patch = c_in * kh * kw;
  p.src.assign(size_t(p.patch) * p.h_out * p.w_out, -1);
  for (int oy = 0; oy < p.h_out; ++oy) {
    for (int ox = 0; ox < p.w_out; ++ox) {
      const int col = oy * p.w_out + ox;
      for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            const int prow = (c * kh + ky) * kw + kx;
            p.src[size_t(col) * p.patch + prow] = c * (h * w) + iy * w + ix;
          }
        }
      }
    }
  }
  return p;
}

}  // namespace

Var conv2d(Var x, Var weight, Var bias, int c_in, int h, int w, int kh, int kw,
           int stride, int pad) {
  Tape& t = same_tape(x, weight);
  if (x.val().rows() != c_in || x.val().cols() != h * w)
    throw std::invalid_argument("conv2d: bad input shape");
  Im2ColPlan plan = plan_im2col(c_in, h, w, kh, kw, stride, pad);
  const int cols = plan.h_out * plan.w_out;
  Mat patches = Mat::Zero(plan.patch, cols);
  const Mat& xv = x.val();
  for (int col = 0; col < cols; ++col)
    for (int prow = 0; prow < plan.patch; ++prow) {
      const int s = plan.src[size_t(col) * plan.patch + prow];
      if (s >= 0) patches(prow, col) = xv(s / (h * w), s % (h * w));
    }
  Mat y = weight.val() * patches;
  y.colwise() += bias.val().col(0);
  return t.make(y, [&t, x, weight, bias, patches = std::move(patches), plan, c_in, h,
                    w, cols, id = int(t.size())]() {
    const Mat& g = t.grad(id);
    t.accum(weight.id, g * patches.transpose());
    t.accum(bias.id, g.rowwise().sum());
    Mat dpatches = weight.val().transpose() * g;
    Mat dx = Mat::Zero(c_in, h * w);
    for (int col = 0; col < cols; ++col)
      for (int prow = 0; prow < plan.patch; ++prow) {
        const int s = plan.src[size_t(col) * plan.patch + prow];
        if (s >= 0) dx(s / (h * w), s % (h * w)) += dpatches(prow, col);
      }
    t.accum(x.id, dx);
  });
}

Var sum_all(Var x) {
  Tape& t = *x.tape;
  Mat y(1, 1);
  y(0, 0) = x.val().sum();
  return t.make(y, [&t, x, id = int(t.size())]() {
    const double g = t.grad(id)(0, 0);
    t.accum(x.id, Mat::Constant(x.val().rows(), x.val().cols(), g));
  });
}

Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& coef) {
  if (xs.empty() || xs.size() != coef.size())
    throw std::invalid_argument("weighted_sum: bad arity");
  Tape& t = *xs[0].tape;
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) acc += coef[i] * xs[i].val()(0, 0);
  Mat y(1, 1);
  y(0, 0) = acc;
  return t.make(y, [&t, xs, coef, id = int(t.size())]() {
    const double g = t.grad(id)(0, 0);
    Mat one(1, 1);
    for (size_t i = 0; i < xs.size(); ++i) {
      one(0, 0) = g * coef[i];
      t.accum(xs[i].id, one);
    }
  });
}

Var neg_log_picked(Var probs, std::vector<PickedEntry> picks, double floor) {
  Tape& t = *probs.tape;
  double acc = 0.0;
  for (const auto& pk : picks)
    acc += pk.weight * -std::log(std::max(probs.val()(pk.row, pk.col), floor));
  Mat y(1, 1);
  y(0, 0) = acc;
  return t.make(y, [&t, probs, picks = std::move(picks), floor, id = int(t.size())]() {
    const double g = t.grad(id)(0, 0);
    Mat dx = Mat::Zero(probs.val().rows(), probs.val().cols());
    for (const auto& pk : picks) {
      const double p = probs.val()(pk.row, pk.col);
      if (p > floor) dx(pk.row, pk.col) += g * pk.weight * (-1.0 / p);
    }
    t.accum(probs.id, dx);
  });
}

Var l1_rows(Var pred, Mat target, std::vector<double> row_weights) {
  Tape& t = *pred.tape;
  double acc = 0.0;
  for (size_t r = 0; r < row_weights.size(); ++r)
    acc += row_weights[r] *
           (pred.val().row(int(r)) - target.row(int(r))).cwiseAbs().sum();
  Mat y(1, 1);
  y(0, 0) = acc;
  return t.make(y, [&t, pred, target = std::move(target),
                    row_weights = std::move(row_weights), id = int(t.size())]() {
    const double g = t.grad(id)(0, 0);
    Mat dx = Mat::Zero(pred.val().rows(), pred.val().cols());
    for (size_t r = 0; r < row_weights.size(); ++r)
      for (int c = 0; c < dx.cols(); ++c) {
        const double diff = pred.val()(int(r), c) - target(int(r), c);
        dx(int(r), c) = g * row_weights[r] * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0));
      }
    t.accum(pred.id, dx);
  });
}

namespace {

// d(1-GIoU)/d(pred corners); corners ordered x0,y0,x1,y1. Returns loss term.
double giou_corner_grad(const double p[4], const double q[4], double dcorner[4]) {
  const double px0 = p[0], py0 = p[1], px1 = p[2], py1 = p[3];
  const double qx0 = q[0], qy0 = q[1], qx1 = q[2], qy1 = q[3];
  const double pw = px1 - px0, ph = py1 - py0;
  const double area_p = pw * ph;
  const double area_q = (qx1 - qx0) * (qy1 - qy0);
  const double ix0 = std::max(px0, qx0), iy0 = std::max(py0, qy0);
  const double ix1 = std::min(px1, qx1), iy1 = std::min(py1, qy1);
  const double iw = std::max(0.0, ix1 - ix0), ih = std::max(0.0, iy1 - iy0);
  const double inter = iw * ih;
  const double uni = area_p + area_q - inter;
  const double hx0 = std::min(px0, qx0), hy0 = std::min(py0, qy0);
  const double hx1 = std::max(px1, qx1), hy1 = std::max(py1, qy1);
  const double hw = hx1 - hx0, hh = hy1 - hy0;
  const double hull = hw * hh;
  for (int i = 0; i < 4; ++i) dcorner[i] = 0.0;
  if (uni <= 0.0 || hull <= 0.0) return 1.0;  // degenerate convention: giou = 0

  const double giou = inter / uni - (hull - uni) / hull;

  // dI/dcorner (zero when there is no overlap on that axis)
  double dI[4] = {0, 0, 0, 0};
  if (iw > 0.0 && ih > 0.0) {
    if (px0 > qx0) dI[0] = -ih;
    if (py0 > qy0) dI[1] = -iw;
    if (px1 < qx1) dI[2] = ih;
    if (py1 < qy1) dI[3] = iw;
  }
  // d(area_p)/dcorner
  const double dA[4] = {-ph, -pw, ph, pw};
  // dHull/dcorner
  double dH[4] = {0, 0, 0, 0};
  if (px0 < qx0) dH[0] = -hh;
  if (py0 < qy0) dH[1] = -hw;
  if (px1 > qx1) dH[2] = hh;
  if (py1 > qy1) dH[3] = hw;

  // giou = I/U - 1 + U/Hull, with dU = dA - dI
  for (int i = 0; i < 4; ++i) {
    const double dU = dA[i] - dI[i];
    const double dgiou =
        (dI[i] * uni - inter * dU) / (uni * uni) + (dU * hull - uni * dH[i]) / (hull * hull);
    dcorner[i] = -dgiou;  // loss = 1 - giou
  }
  return 1.0 - giou;
}

}  // namespace

Var giou_loss_rows(Var pred, Mat target, std::vector<double> row_weights) {
  Tape& t = *pred.tape;
  const int n = int(row_weights.size());
  auto to_corners = [](const Eigen::RowVectorXd& c, double out[4]) {
    out[0] = c(0) - c(2) / 2.0;
    out[1] = c(1) - c(3) / 2.0;
    out[2] = c(0) + c(2) / 2.0;
    out[3] = c(1) + c(3) / 2.0;
  };
  double acc = 0.0;
  Mat dx = Mat::Zero(pred.val().rows(), pred.val().cols());
  for (int r = 0; r < n; ++r) {
    double p[4], q[4], dc[4];
    to_corners(pred.val().row(r), p);
    to_corners(target.row(r), q);
    acc += row_weights[r] * giou_corner_grad(p, q, dc);
    // chain corners -> (cx, cy, w, h)
    dx(r, 0) += row_weights[r] * (dc[0] + dc[2]);
    dx(r, 1) += row_weights[r] * (dc[1] + dc[3]);
    dx(r, 2) += row_weights[r] * (dc[2] - dc[0]) / 2.0;
    dx(r, 3) += row_weights[r] * (dc[3] - dc[1]) / 2.0;
  }
  Mat y(1, 1);
  y(0, 0) = acc;
  return t.make(y, [&t, pred, dx = std::move(dx), id = int(t.size())]() {
    t.accum(pred.id, t.grad(id)(0, 0) * dx);
  });
}

}  // namespace ops

double adam_step(ParamStore& params, const AdamConfig& cfg, int64_t t) {
  double sq = 0.0;
  for (const auto& p : params.all()) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  double scale = 1.0;
  if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (const auto& p : params.all()) {
    Mat g = p->grad * scale;
    p->adam_m = cfg.beta1 * p->adam_m + (1.0 - cfg.beta1) * g;
    p->adam_v = cfg.beta2 * p->adam_v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    Mat mhat = p->adam_m / bc1;
    Mat vhat = p->adam_v / bc2;
    p->value.array() -= cfg.lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
  }
  return norm;
}

}  // namespace relocc
