#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmiway/rng.hpp"

namespace hmiway {

enum class Act { kLinear, kTanh };

// Fully connected network over a flat 64-bit parameter vector. Layout per
// layer: W (out x in, row-major), then b (out). forward() caches enough for
// an exact reverse pass; backward() accumulates into `grad` and optionally
// produces the input gradient.
class Mlp {
 public:
  Mlp() = default;
  static Mlp make(std::vector<int> widths, Act hidden, Act output, Rng& init_rng);
  // Widths only; parameters left at zero.
  static Mlp zeros(std::vector<int> widths, Act hidden, Act output);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  Act hidden_act() const { return hidden_; }
  Act output_act() const { return output_; }
  std::size_t param_count() const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  struct Cache {
    // acts[0] is the input; acts[l+1] is layer l's activation output.
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
  };

  std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const;

  // grad += dL/dparams given dL/doutput; dx (if non-empty) receives dL/dinput.
  void backward(const Cache& cache, std::span<const double> dout, std::span<double> grad,
                std::span<double> dx = {}) const;

 private:
  std::vector<int> widths_;
  Act hidden_ = Act::kTanh;
  Act output_ = Act::kLinear;
  std::vector<double> params_;
};

// Single-layer LSTM encoder; returns the final hidden state. Gate order in
// the parameter layout is i, f, g, o: Wx (4H x in), Wh (4H x H), b (4H).
class LstmEncoder {
 public:
  LstmEncoder() = default;
  static LstmEncoder make(int input_dim, int hidden_dim, Rng& init_rng);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  std::size_t param_count() const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  struct Cache {
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> gi, gf, gg, go;  // post-activation gates
    std::vector<std::vector<double>> c, h;            // cell and hidden per step
  };

  std::vector<double> encode(std::span<const std::vector<double>> xs, Cache* cache = nullptr) const;

  // Backward through time from dL/dh_final; grad += dL/dparams. dxs (if
  // non-null) receives per-step input gradients.
  void backward(const Cache& cache, std::span<const double> dh_final, std::span<double> grad,
                std::vector<std::vector<double>>* dxs = nullptr) const;

 private:
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  std::vector<double> params_;
};

// Adam with bias correction. Gradients must be finite; the offending index
// is reported otherwise.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return t_; }

  void step(std::span<double> params, std::span<const double> grads);

  // State round-trip for checkpointing.
  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& v() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, std::int64_t t);

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace hmiway
