#include "headline_forge/recurrent.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace hf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap view(const Tensor& t) { return ConstMatrixMap(t.data(), t.dim(0), t.dim(1)); }
MatrixMap view(Tensor& t) { return MatrixMap(t.data(), t.dim(0), t.dim(1)); }

// a = x W + h U + b, all [batch, blocks*hidden]
Tensor affine(const Tensor& x, const Tensor& h, const Param& W, const Param& U, const Param& b) {
  const std::size_t batch = x.dim(0), width = W.value.dim(1);
  Tensor a({batch, width});
  auto am = view(a);
  am.noalias() = view(x) * view(W.value);
  am.noalias() += view(h) * view(U.value);
  am.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value.data(), width);
  return a;
}

void check_step_shapes(const Tensor& x, const Tensor& state, std::size_t in, std::size_t width,
                       const std::string& name) {
  if (x.rank() != 2 || x.dim(1) != in || state.rank() != 2 || state.dim(1) != width ||
      x.dim(0) != state.dim(0)) {
    fail(ErrorCode::shape, name + ": step input " + shape_string(x.shape()) + " / state " +
                               shape_string(state.shape()) + " mismatch");
  }
}

// Accumulate parameter gradients from the packed pre-activation gradient and
// return {dx, dh_prev}.
std::pair<Tensor, Tensor> affine_backward(const Tensor& x, const Tensor& h, const Tensor& da_x,
                                          const Tensor& da_h, Param& W, Param& U, Param& b) {
  view(W.grad).noalias() += view(x).transpose() * view(da_x);
  view(U.grad).noalias() += view(h).transpose() * view(da_h);
  Eigen::Map<Eigen::RowVectorXd>(b.grad.data(), b.grad.size()) += view(da_x).colwise().sum();
  Tensor dx({x.dim(0), x.dim(1)}), dh({h.dim(0), h.dim(1)});
  view(dx).noalias() = view(da_x) * view(W.value).transpose();
  view(dh).noalias() = view(da_h) * view(U.value).transpose();
  return {std::move(dx), std::move(dh)};
}

}  // namespace

GruCell::GruCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : W(name + ".W", uniform_tensor({in, 3 * hidden}, std::sqrt(6.0 / double(in + hidden)), rng)),
      U(name + ".U", uniform_tensor({hidden, 3 * hidden}, std::sqrt(3.0 / double(hidden)), rng)),
      b(name + ".b", Tensor({3 * hidden})) {}

Tensor GruCell::step(const Tensor& x, const Tensor& state, Cache* cache) const {
  const std::size_t hid = hidden_size();
  check_step_shapes(x, state, input_size(), hid, W.name);
  const std::size_t batch = x.dim(0);
  Tensor ax({batch, 3 * hid});
  view(ax).noalias() = view(x) * view(W.value);
  view(ax).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value.data(), 3 * hid);
  Tensor ah({batch, 3 * hid});
  view(ah).noalias() = view(state) * view(U.value);

  Tensor r({batch, hid}), z({batch, hid}), n({batch, hid}), uh_n({batch, hid}), out({batch, hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      const double rv = sigmoid_scalar(ax.at(i, k) + ah.at(i, k));
      const double zv = sigmoid_scalar(ax.at(i, hid + k) + ah.at(i, hid + k));
      const double uhn = ah.at(i, 2 * hid + k);
      const double nv = std::tanh(ax.at(i, 2 * hid + k) + rv * uhn);
      r.at(i, k) = rv;
      z.at(i, k) = zv;
      n.at(i, k) = nv;
      uh_n.at(i, k) = uhn;
      out.at(i, k) = (1.0 - zv) * state.at(i, k) + zv * nv;
    }
  if (cache) *cache = Cache{x, state, std::move(r), std::move(z), std::move(n), std::move(uh_n)};
  return out;
}

std::pair<Tensor, Tensor> GruCell::step_backward(const Cache& c, const Tensor& dstate) {
  const std::size_t hid = hidden_size(), batch = dstate.dim(0);
  Tensor da_x({batch, 3 * hid}), da_h({batch, 3 * hid});
  Tensor dh_direct({batch, hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      const double g = dstate.at(i, k);
      const double rv = c.r.at(i, k), zv = c.z.at(i, k), nv = c.n.at(i, k);
      const double dz = g * (nv - c.h_prev.at(i, k));
      const double dn = g * zv;
      dh_direct.at(i, k) = g * (1.0 - zv);
      const double dan = dn * (1.0 - nv * nv);
      const double dr = dan * c.uh_n.at(i, k);
      const double dar = dr * rv * (1.0 - rv);
      const double daz = dz * zv * (1.0 - zv);
      da_x.at(i, k) = dar;
      da_x.at(i, hid + k) = daz;
      da_x.at(i, 2 * hid + k) = dan;
      da_h.at(i, k) = dar;
      da_h.at(i, hid + k) = daz;
      da_h.at(i, 2 * hid + k) = dan * rv;
    }
  auto [dx, dh] = affine_backward(c.x, c.h_prev, da_x, da_h, W, U, b);
  dh.add(dh_direct);
  return {std::move(dx), std::move(dh)};
}

LstmCell::LstmCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : W(name + ".W", uniform_tensor({in, 4 * hidden}, std::sqrt(6.0 / double(in + hidden)), rng)),
      U(name + ".U", uniform_tensor({hidden, 4 * hidden}, std::sqrt(3.0 / double(hidden)), rng)),
      b(name + ".b", Tensor({4 * hidden})) {}

Tensor LstmCell::output(const Tensor& state) const {
  const std::size_t hid = hidden_size(), batch = state.dim(0);
  Tensor h({batch, hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) h.at(i, k) = state.at(i, k);
  return h;
}

Tensor LstmCell::output_grad_to_state(const Tensor& dout) const {
  const std::size_t hid = hidden_size(), batch = dout.dim(0);
  Tensor ds({batch, 2 * hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) ds.at(i, k) = dout.at(i, k);
  return ds;
}

Tensor LstmCell::step(const Tensor& x, const Tensor& state, Cache* cache) const {
  const std::size_t hid = hidden_size();
  check_step_shapes(x, state, input_size(), 2 * hid, W.name);
  const std::size_t batch = x.dim(0);
  Tensor h_prev({batch, hid}), c_prev({batch, hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      h_prev.at(i, k) = state.at(i, k);
      c_prev.at(i, k) = state.at(i, hid + k);
    }
  Tensor a = affine(x, h_prev, W, U, b);
  Tensor ig({batch, hid}), fg({batch, hid}), gg({batch, hid}), og({batch, hid}),
      tc({batch, hid}), out({batch, 2 * hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      const double iv = sigmoid_scalar(a.at(i, k));
      const double fv = sigmoid_scalar(a.at(i, hid + k));
      const double gv = std::tanh(a.at(i, 2 * hid + k));
      const double ov = sigmoid_scalar(a.at(i, 3 * hid + k));
      const double cv = fv * c_prev.at(i, k) + iv * gv;
      const double t = std::tanh(cv);
      ig.at(i, k) = iv;
      fg.at(i, k) = fv;
      gg.at(i, k) = gv;
      og.at(i, k) = ov;
      tc.at(i, k) = t;
      out.at(i, k) = ov * t;
      out.at(i, hid + k) = cv;
    }
  if (cache) {
    *cache = Cache{x,          std::move(h_prev), std::move(c_prev), std::move(ig),
                   std::move(fg), std::move(gg),  std::move(og),     std::move(tc)};
  }
  return out;
}

std::pair<Tensor, Tensor> LstmCell::step_backward(const Cache& c, const Tensor& dstate) {
  const std::size_t hid = hidden_size(), batch = dstate.dim(0);
  Tensor da({batch, 4 * hid});
  Tensor dc_prev({batch, hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      const double dh = dstate.at(i, k);
      const double iv = c.i.at(i, k), fv = c.f.at(i, k), gv = c.g.at(i, k), ov = c.o.at(i, k);
      const double t = c.tanh_c.at(i, k);
      const double dc = dstate.at(i, hid + k) + dh * ov * (1.0 - t * t);
      da.at(i, k) = dc * gv * iv * (1.0 - iv);
      da.at(i, hid + k) = dc * c.c_prev.at(i, k) * fv * (1.0 - fv);
      da.at(i, 2 * hid + k) = dc * iv * (1.0 - gv * gv);
      da.at(i, 3 * hid + k) = dh * t * ov * (1.0 - ov);
      dc_prev.at(i, k) = dc * fv;
    }
  auto [dx, dh] = affine_backward(c.x, c.h_prev, da, da, W, U, b);
  Tensor dprev({batch, 2 * hid});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t k = 0; k < hid; ++k) {
      dprev.at(i, k) = dh.at(i, k);
      dprev.at(i, hid + k) = dc_prev.at(i, k);
    }
  return {std::move(dx), std::move(dprev)};
}

}  // namespace hf
