#include "hmiway/nn.hpp"

#include <cmath>

#include "hmiway/errors.hpp"

namespace hmiway {

namespace {

double activate(double x, Act a) { return a == Act::kTanh ? std::tanh(x) : x; }

// Derivative in terms of the activation output.
double activate_grad_from_out(double y, Act a) { return a == Act::kTanh ? 1.0 - y * y : 1.0; }

void init_uniform_fan_in(std::span<double> w, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : w) x = rng.uniform(-bound, bound);
}

}  // namespace

Mlp Mlp::make(std::vector<int> widths, Act hidden, Act output, Rng& init_rng) {
  Mlp mlp = zeros(std::move(widths), hidden, output);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < mlp.widths_.size(); ++l) {
    int in = mlp.widths_[l];
    int out = mlp.widths_[l + 1];
    init_uniform_fan_in(std::span<double>(mlp.params_.data() + offset,
                                          static_cast<std::size_t>(in) * out),
                        in, init_rng);
    offset += static_cast<std::size_t>(in) * out + out;  // biases stay zero
  }
  return mlp;
}

Mlp Mlp::zeros(std::vector<int> widths, Act hidden, Act output) {
  if (widths.size() < 2) throw ContractError("Mlp: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw ContractError("Mlp: widths must be positive");
  Mlp mlp;
  mlp.widths_ = std::move(widths);
  mlp.hidden_ = hidden;
  mlp.output_ = output;
  mlp.params_.assign(mlp.param_count(), 0.0);
  return mlp;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
    n += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> input, Cache* cache) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw ContractError("Mlp::forward: input width mismatch");
  std::vector<double> x(input.begin(), input.end());
  if (cache) {
    cache->acts.clear();
    cache->pre.clear();
    cache->acts.push_back(x);
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    int in = widths_[l];
    int out = widths_[l + 1];
    Act a = (l + 2 == widths_.size()) ? output_ : hidden_;
    std::vector<double> pre(static_cast<std::size_t>(out));
    const double* w = params_.data() + offset;
    const double* b = w + static_cast<std::size_t>(in) * out;
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) s += row[k] * x[static_cast<std::size_t>(k)];
      pre[static_cast<std::size_t>(o)] = s;
    }
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(o)] = activate(pre[static_cast<std::size_t>(o)], a);
    if (cache) {
      cache->pre.push_back(pre);
      cache->acts.push_back(y);
    }
    x = std::move(y);
    offset += static_cast<std::size_t>(in) * out + out;
  }
  return x;
}

void Mlp::backward(const Cache& cache, std::span<const double> dout, std::span<double> grad,
                   std::span<double> dx) const {
  if (cache.acts.size() != widths_.size() || cache.pre.size() + 1 != widths_.size())
    throw ContractError("Mlp::backward: stale or mismatched cache");
  for (std::size_t l = 0; l < widths_.size(); ++l)
    if (static_cast<int>(cache.acts[l].size()) != widths_[l])
      throw ContractError("Mlp::backward: stale cache (layer width mismatch)");
  if (static_cast<int>(dout.size()) != output_dim())
    throw ContractError("Mlp::backward: output gradient width mismatch");
  if (grad.size() != param_count())
    throw ContractError("Mlp::backward: gradient buffer size mismatch");
  if (!dx.empty() && static_cast<int>(dx.size()) != input_dim())
    throw ContractError("Mlp::backward: input gradient width mismatch");

  std::vector<double> delta(dout.begin(), dout.end());

  // Offsets of each layer's parameter block.
  std::vector<std::size_t> offsets(widths_.size() - 1);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }

  for (std::size_t l = widths_.size() - 1; l-- > 0;) {
    int in = widths_[l];
    int out = widths_[l + 1];
    Act a = (l + 2 == widths_.size()) ? output_ : hidden_;
    const std::vector<double>& x = cache.acts[l];
    const std::vector<double>& y = cache.acts[l + 1];
    for (int o = 0; o < out; ++o)
      delta[static_cast<std::size_t>(o)] *= activate_grad_from_out(y[static_cast<std::size_t>(o)], a);

    double* gw = grad.data() + offsets[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    const double* w = params_.data() + offsets[l];
    std::vector<double> dprev(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      double d = delta[static_cast<std::size_t>(o)];
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* wrow = w + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) {
        grow[k] += d * x[static_cast<std::size_t>(k)];
        dprev[static_cast<std::size_t>(k)] += d * wrow[k];
      }
      gb[o] += d;
    }
    delta = std::move(dprev);
  }
  if (!dx.empty())
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += delta[k];
}

LstmEncoder LstmEncoder::make(int input_dim, int hidden_dim, Rng& init_rng) {
  if (input_dim < 1 || hidden_dim < 1)
    throw ContractError("LstmEncoder: dimensions must be positive");
  LstmEncoder e;
  e.input_dim_ = input_dim;
  e.hidden_dim_ = hidden_dim;
  e.params_.assign(e.param_count(), 0.0);
  int fan_in = input_dim + hidden_dim;
  std::size_t wx = static_cast<std::size_t>(4) * hidden_dim * input_dim;
  std::size_t wh = static_cast<std::size_t>(4) * hidden_dim * hidden_dim;
  init_uniform_fan_in(std::span<double>(e.params_.data(), wx), fan_in, init_rng);
  init_uniform_fan_in(std::span<double>(e.params_.data() + wx, wh), fan_in, init_rng);
  return e;
}

std::size_t LstmEncoder::param_count() const {
  return static_cast<std::size_t>(4) * hidden_dim_ * (input_dim_ + hidden_dim_ + 1);
}

std::vector<double> LstmEncoder::encode(std::span<const std::vector<double>> xs,
                                        Cache* cache) const {
  if (xs.empty()) throw ContractError("LstmEncoder::encode: empty sequence");
  const int H = hidden_dim_;
  const int I = input_dim_;
  const double* Wx = params_.data();
  const double* Wh = Wx + static_cast<std::size_t>(4) * H * I;
  const double* b = Wh + static_cast<std::size_t>(4) * H * H;

  std::vector<double> h(static_cast<std::size_t>(H), 0.0);
  std::vector<double> c(static_cast<std::size_t>(H), 0.0);
  if (cache) *cache = Cache{};

  for (const auto& x : xs) {
    if (static_cast<int>(x.size()) != I)
      throw ContractError("LstmEncoder::encode: input width mismatch");
    std::vector<double> gi(static_cast<std::size_t>(H)), gf(static_cast<std::size_t>(H)),
        gg(static_cast<std::size_t>(H)), go(static_cast<std::size_t>(H));
    std::vector<double> c_new(static_cast<std::size_t>(H)), h_new(static_cast<std::size_t>(H));
    for (int u = 0; u < H; ++u) {
      double pre[4];
      for (int gate = 0; gate < 4; ++gate) {
        int row = gate * H + u;
        double s = b[row];
        const double* wx_row = Wx + static_cast<std::size_t>(row) * I;
        for (int k = 0; k < I; ++k) s += wx_row[k] * x[static_cast<std::size_t>(k)];
        const double* wh_row = Wh + static_cast<std::size_t>(row) * H;
        for (int k = 0; k < H; ++k) s += wh_row[k] * h[static_cast<std::size_t>(k)];
        pre[gate] = s;
      }
      double iv = 1.0 / (1.0 + std::exp(-pre[0]));
      double fv = 1.0 / (1.0 + std::exp(-pre[1]));
      double gv = std::tanh(pre[2]);
      double ov = 1.0 / (1.0 + std::exp(-pre[3]));
      double cv = fv * c[static_cast<std::size_t>(u)] + iv * gv;
      gi[static_cast<std::size_t>(u)] = iv;
      gf[static_cast<std::size_t>(u)] = fv;
      gg[static_cast<std::size_t>(u)] = gv;
      go[static_cast<std::size_t>(u)] = ov;
      c_new[static_cast<std::size_t>(u)] = cv;
      h_new[static_cast<std::size_t>(u)] = ov * std::tanh(cv);
    }
    if (cache) {
      cache->xs.push_back(x);
      cache->gi.push_back(gi);
      cache->gf.push_back(gf);
      cache->gg.push_back(gg);
      cache->go.push_back(go);
      cache->c.push_back(c_new);
      cache->h.push_back(h_new);
    }
    c = std::move(c_new);
    h = std::move(h_new);
  }
  return h;
}

void LstmEncoder::backward(const Cache& cache, std::span<const double> dh_final,
                           std::span<double> grad, std::vector<std::vector<double>>* dxs) const {
  const int H = hidden_dim_;
  const int I = input_dim_;
  const std::size_t T = cache.xs.size();
  if (T == 0 || cache.h.size() != T || cache.c.size() != T)
    throw ContractError("LstmEncoder::backward: stale or mismatched cache");
  if (static_cast<int>(dh_final.size()) != H)
    throw ContractError("LstmEncoder::backward: hidden gradient width mismatch");
  if (grad.size() != param_count())
    throw ContractError("LstmEncoder::backward: gradient buffer size mismatch");

  const double* Wx = params_.data();
  const double* Wh = Wx + static_cast<std::size_t>(4) * H * I;
  double* gWx = grad.data();
  double* gWh = gWx + static_cast<std::size_t>(4) * H * I;
  double* gb = gWh + static_cast<std::size_t>(4) * H * H;

  if (dxs) dxs->assign(T, std::vector<double>(static_cast<std::size_t>(I), 0.0));

  std::vector<double> dh(dh_final.begin(), dh_final.end());
  std::vector<double> dc(static_cast<std::size_t>(H), 0.0);

  for (std::size_t t = T; t-- > 0;) {
    const auto& gi = cache.gi[t];
    const auto& gf = cache.gf[t];
    const auto& gg = cache.gg[t];
    const auto& go = cache.go[t];
    const auto& c = cache.c[t];
    const std::vector<double>* c_prev = t > 0 ? &cache.c[t - 1] : nullptr;
    const std::vector<double>* h_prev = t > 0 ? &cache.h[t - 1] : nullptr;

    std::vector<double> dpre(static_cast<std::size_t>(4 * H));
    for (int u = 0; u < H; ++u) {
      double tc = std::tanh(c[static_cast<std::size_t>(u)]);
      double dhu = dh[static_cast<std::size_t>(u)];
      double dcu = dc[static_cast<std::size_t>(u)] + dhu * go[static_cast<std::size_t>(u)] * (1.0 - tc * tc);
      double cp = c_prev ? (*c_prev)[static_cast<std::size_t>(u)] : 0.0;
      double di = dcu * gg[static_cast<std::size_t>(u)];
      double df = dcu * cp;
      double dg = dcu * gi[static_cast<std::size_t>(u)];
      double do_ = dhu * tc;
      // Sigmoid/tanh pre-activation gradients.
      dpre[static_cast<std::size_t>(0 * H + u)] = di * gi[static_cast<std::size_t>(u)] * (1.0 - gi[static_cast<std::size_t>(u)]);
      dpre[static_cast<std::size_t>(1 * H + u)] = df * gf[static_cast<std::size_t>(u)] * (1.0 - gf[static_cast<std::size_t>(u)]);
      dpre[static_cast<std::size_t>(2 * H + u)] = dg * (1.0 - gg[static_cast<std::size_t>(u)] * gg[static_cast<std::size_t>(u)]);
      dpre[static_cast<std::size_t>(3 * H + u)] = do_ * go[static_cast<std::size_t>(u)] * (1.0 - go[static_cast<std::size_t>(u)]);
      dc[static_cast<std::size_t>(u)] = dcu * gf[static_cast<std::size_t>(u)];
    }

    std::vector<double> dh_prev(static_cast<std::size_t>(H), 0.0);
    const auto& x = cache.xs[t];
    for (int row = 0; row < 4 * H; ++row) {
      double d = dpre[static_cast<std::size_t>(row)];
      if (d == 0.0) continue;
      double* gwx_row = gWx + static_cast<std::size_t>(row) * I;
      for (int k = 0; k < I; ++k) gwx_row[k] += d * x[static_cast<std::size_t>(k)];
      if (dxs) {
        const double* wx_row = Wx + static_cast<std::size_t>(row) * I;
        auto& dx = (*dxs)[t];
        for (int k = 0; k < I; ++k) dx[static_cast<std::size_t>(k)] += d * wx_row[k];
      }
      double* gwh_row = gWh + static_cast<std::size_t>(row) * H;
      const double* wh_row = Wh + static_cast<std::size_t>(row) * H;
      if (h_prev) {
        for (int k = 0; k < H; ++k) gwh_row[k] += d * (*h_prev)[static_cast<std::size_t>(k)];
      }
      for (int k = 0; k < H; ++k) dh_prev[static_cast<std::size_t>(k)] += d * wh_row[k];
      gb[row] += d;
    }
    dh = std::move(dh_prev);
  }
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractError("Adam::step: size mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k]))
      throw ContractError("Adam::step: non-finite gradient at index " + std::to_string(k));
  }
  t_ += 1;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k] * grads[k];
    double mhat = m_[k] / bc1;
    double vhat = v_[k] / bc2;
    params[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

void Adam::restore(std::vector<double> m, std::vector<double> v, std::int64_t t) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw ContractError("Adam::restore: size mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace hmiway
