#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "headline_forge/error.hpp"
#include "headline_forge/layers.hpp"

namespace hf {

// Gated recurrent unit:
//   r = sigmoid(W_r x + U_r h + b_r)
//   z = sigmoid(W_z x + U_z h + b_z)
//   n = tanh(W_h x + r * (U_h h) + b_h)
//   h' = (1 - z) * h + z * n
// The three gate blocks are packed column-wise: W is [in, 3*hidden] laid out
// as [W_r | W_z | W_h], likewise U and b.
class GruCell {
 public:
  struct Cache {
    Tensor x, h_prev, r, z, n, uh_n;
  };

  GruCell() = default;
  GruCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return W.value.dim(0); }
  std::size_t hidden_size() const { return U.value.dim(0); }
  std::size_t state_size() const { return hidden_size(); }

  Tensor step(const Tensor& x, const Tensor& state, Cache* cache) const;
  // Returns {dx, dstate_prev}.
  std::pair<Tensor, Tensor> step_backward(const Cache& cache, const Tensor& dstate);

  // The externally visible output of a state ([batch, state_size]).
  Tensor output(const Tensor& state) const { return state; }
  Tensor output_grad_to_state(const Tensor& dout) const { return dout; }

  std::vector<Param*> params() { return {&W, &U, &b}; }

  Param W, U, b;
};

// Long short-term memory. State is [h | c] of width 2*hidden. Gate blocks are
// packed as [input | forget | candidate | output].
//   c' = f * c + i * g,  h' = o * tanh(c')
class LstmCell {
 public:
  struct Cache {
    Tensor x, h_prev, c_prev, i, f, g, o, tanh_c;
  };

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return W.value.dim(0); }
  std::size_t hidden_size() const { return U.value.dim(0); }
  std::size_t state_size() const { return 2 * hidden_size(); }

  Tensor step(const Tensor& x, const Tensor& state, Cache* cache) const;
  std::pair<Tensor, Tensor> step_backward(const Cache& cache, const Tensor& dstate);

  Tensor output(const Tensor& state) const;
  Tensor output_grad_to_state(const Tensor& dout) const;

  std::vector<Param*> params() { return {&W, &U, &b}; }

  Param W, U, b;
};

// Runs one cell left-to-right and another right-to-left over the real
// (mask != 0) positions of each sequence and returns the concatenation of the
// forward direction's last output and the backward direction's last output
// (the one produced at the first real position): [batch, 2*hidden].
template <typename Cell>
class Bidirectional {
 public:
  struct Cache {
    std::vector<std::vector<std::size_t>> positions;
    std::vector<typename Cell::Cache> fwd_steps, bwd_steps;
    std::vector<std::vector<std::uint8_t>> active;
    Shape input_shape;
  };

  Bidirectional() = default;
  Bidirectional(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
      : forward_cell(name + ".fwd", in, hidden, rng), backward_cell(name + ".bwd", in, hidden, rng) {}

  std::size_t output_size() const { return 2 * forward_cell.hidden_size(); }

  // seq: [batch, len, in]; mask: batch*len flags.
  Tensor forward(const Tensor& seq, std::span<const std::uint8_t> mask, Cache* cache) const {
    require(seq.rank() == 3 && seq.dim(2) == forward_cell.input_size(), ErrorCode::shape,
            "bidirectional: bad sequence shape " + shape_string(seq.shape()));
    const std::size_t batch = seq.dim(0), len = seq.dim(1);
    require(mask.size() == batch * len, ErrorCode::shape, "bidirectional: mask size mismatch");
    std::vector<std::vector<std::size_t>> positions(batch);
    std::size_t steps = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < len; ++t)
        if (mask[b * len + t]) positions[b].push_back(t);
      require(!positions[b].empty(), ErrorCode::domain,
              "bidirectional: sequence " + std::to_string(b) + " has no real positions");
      steps = std::max(steps, positions[b].size());
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.positions = positions;
    c.input_shape = seq.shape();
    c.active.assign(steps, std::vector<std::uint8_t>(batch, 0));
    for (std::size_t s = 0; s < steps; ++s)
      for (std::size_t b = 0; b < batch; ++b) c.active[s][b] = s < positions[b].size();

    Tensor fwd = run(forward_cell, seq, c, false, cache ? &c.fwd_steps : nullptr);
    Tensor bwd = run(backward_cell, seq, c, true, cache ? &c.bwd_steps : nullptr);
    Tensor out_f = forward_cell.output(fwd), out_b = backward_cell.output(bwd);
    const Tensor* parts[] = {&out_f, &out_b};
    return concat_columns(parts);
  }

  // Returns the gradient with respect to the sequence.
  Tensor backward(const Cache& cache, const Tensor& dy) {
    const std::size_t h = forward_cell.hidden_size();
    const std::size_t widths[] = {h, h};
    auto parts = split_columns(dy, widths);
    Tensor dseq(cache.input_shape);
    unrun(forward_cell, cache, cache.fwd_steps, false, forward_cell.output_grad_to_state(parts[0]),
          dseq);
    unrun(backward_cell, cache, cache.bwd_steps, true, backward_cell.output_grad_to_state(parts[1]),
          dseq);
    return dseq;
  }

  std::vector<Param*> params() {
    auto p = forward_cell.params();
    for (Param* q : backward_cell.params()) p.push_back(q);
    return p;
  }

  Cell forward_cell;
  Cell backward_cell;

 private:
  static std::size_t position_at(const Cache& c, std::size_t b, std::size_t s, bool reverse) {
    const auto& pos = c.positions[b];
    return reverse ? pos[pos.size() - 1 - s] : pos[s];
  }

  static Tensor run(const Cell& cell, const Tensor& seq, const Cache& c, bool reverse,
                    std::vector<typename Cell::Cache>* steps_out) {
    const std::size_t batch = seq.dim(0), in = seq.dim(2);
    Tensor state({batch, cell.state_size()});
    if (steps_out) steps_out->assign(c.active.size(), {});
    for (std::size_t s = 0; s < c.active.size(); ++s) {
      Tensor x({batch, in});
      for (std::size_t b = 0; b < batch; ++b) {
        if (!c.active[s][b]) continue;
        auto src = seq.row(b).subspan(position_at(c, b, s, reverse) * in, in);
        std::copy(src.begin(), src.end(), x.data() + b * in);
      }
      Tensor next = cell.step(x, state, steps_out ? &(*steps_out)[s] : nullptr);
      for (std::size_t b = 0; b < batch; ++b) {
        if (c.active[s][b]) continue;
        auto keep = state.row(b);
        std::copy(keep.begin(), keep.end(), next.row(b).begin());
      }
      state = std::move(next);
    }
    return state;
  }

  static void unrun(Cell& cell, const Cache& c, const std::vector<typename Cell::Cache>& steps,
                    bool reverse, Tensor dstate, Tensor& dseq) {
    const std::size_t batch = dstate.dim(0), in = cell.input_size();
    for (std::size_t s = c.active.size(); s-- > 0;) {
      Tensor upstream = dstate;
      for (std::size_t b = 0; b < batch; ++b)
        if (!c.active[s][b]) std::fill(upstream.row(b).begin(), upstream.row(b).end(), 0.0);
      auto [dx, dprev] = cell.step_backward(steps[s], upstream);
      for (std::size_t b = 0; b < batch; ++b) {
        if (!c.active[s][b]) {
          // inactive rows carried the state through unchanged
          auto keep = dstate.row(b);
          std::copy(keep.begin(), keep.end(), dprev.row(b).begin());
          continue;
        }
        double* dst = dseq.data() + (b * dseq.dim(1) + position_at(c, b, s, reverse)) * in;
        auto src = dx.row(b);
        for (std::size_t k = 0; k < in; ++k) dst[k] += src[k];
      }
      dstate = std::move(dprev);
    }
  }
};

}  // namespace hf
