#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace relocc {

using Mat = Eigen::MatrixXd;

// Trainable tensor with optimizer state. Stable address once created.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Param(std::string n, Mat v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())),
        adam_m(Mat::Zero(value.rows(), value.cols())),
        adam_v(Mat::Zero(value.rows(), value.cols())) {}
};

class ParamStore {
 public:
  Param* add(const std::string& name, Mat init);
  Param* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  size_t count() const;  // total scalar parameters
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Reverse-mode tape over Eigen matrices. Nodes are appended in evaluation
// order, which is already topological; backward is a reverse sweep.
class Tape {
 public:
  struct Var {
    Tape* tape = nullptr;
    int id = -1;
    const Mat& val() const { return tape->value(id); }
  };

  Var leaf(Mat v);
  Var param(Param& p);
  Var make(Mat v, std::function<void()> backward);

  Mat& value(int id) { return nodes_[id].value; }
  Mat& grad(int id);
  bool touched(int id) const { return nodes_[id].touched; }
  void accum(int id, const Mat& g);

  // Seeds d(root)/d(root) = seed (root must be 1x1), sweeps the tape in
  // reverse, then adds leaf gradients onto their Params.
  void backward(Var root, double seed = 1.0);

  void reset();
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool touched = false;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param*>> param_leaves_;
};

using Var = Tape::Var;

namespace ops {

// Elementwise / structural.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var transpose(Var x);
Var softmax_rows(Var x);
Var gather_rows(Var x, const std::vector<int>& rows);

// y = x*W + b with W (in,out), b (1,out) broadcast over rows. b may be null.
Var linear(Var x, Var w, Var b);

// Per-row layer normalization with affine (1,d) gamma/beta.
Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);

// Inverted dropout; identity when !training.
Var dropout(Var x, double rate, std::mt19937_64& rng, bool training);

// Multi-head attention up to head concatenation (output projection is a
// separate linear, matching the residual-inside-linear composition).
// q,k,v: (n,d)/(m,d)/(m,d); wq,wk,wv: (d,d) fused per-head column blocks.
// Scores scaled by 1/sqrt(d_model). capture, if non-null, receives the
// per-head row-stochastic attention matrices (n,m).
Var mha_concat(Var q, Var k, Var v, Var wq, Var wk, Var wv, int n_heads,
               std::vector<Mat>* capture = nullptr);

// Convolution over a (C_in, H*W) feature map via im2col.
// weight (C_out, C_in*kh*kw), bias (C_out, 1). Returns (C_out, H_out*W_out).
Var conv2d(Var x, Var weight, Var bias, int c_in, int h, int w, int kh, int kw,
           int stride, int pad);

// Scalar reductions (all return 1x1).
Var sum_all(Var x);
Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& coef);

// sum_i w_i * -log(max(probs(r_i, c_i), floor))
struct PickedEntry {
  int row;
  int col;
  double weight;
};
Var neg_log_picked(Var probs, std::vector<PickedEntry> picks, double floor = 1e-8);

// sum_r w_r * |pred_r - target_r|_1
Var l1_rows(Var pred, Mat target, std::vector<double> row_weights);

// sum_r w_r * (1 - GIoU(pred_r, target_r)); rows are (cx, cy, w, h).
Var giou_loss_rows(Var pred, Mat target, std::vector<double> row_weights);

}  // namespace ops

// Output sizes of the strided convs used by the backbone: ceil(n/stride)
// given kernel 2*stride-1 and pad stride-1.
inline int conv_out(int n, int stride) { return (n - 1) / stride + 1; }

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.1;  // global-norm gradient clip; <=0 disables
};

// One update over every param in the store; t is the 1-based step index.
// Returns the pre-clip global gradient norm.
double adam_step(ParamStore& params, const AdamConfig& cfg, int64_t t);

}  // namespace relocc
