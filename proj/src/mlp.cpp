#include "hems/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hems {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void append_row(std::string& s, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  s += "\n";
}

std::vector<double> parse_row(const std::string& line, std::size_t expect,
                              const std::string& what) {
  std::vector<std::string> cells = split(trim(line), ',');
  if (cells.size() != expect)
    fail(Status::parse_error, what + ": expected " + std::to_string(expect) + " values, got " +
                                  std::to_string(cells.size()));
  std::vector<double> v(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) v[i] = parse_double(cells[i], what);
  return v;
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "relu_hidden_tanh_out") return Activation::relu_hidden_tanh_out;
  if (s == "relu_hidden_linear_out") return Activation::relu_hidden_linear_out;
  fail(Status::parse_error, "unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  return a == Activation::relu_hidden_tanh_out ? "relu_hidden_tanh_out"
                                               : "relu_hidden_linear_out";
}

void GradSet::match(const Mlp& net) {
  w.resize(net.layer_count());
  b.resize(net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    w[l].assign(net.weights()[l].size(), 0.0);
    b[l].assign(net.biases()[l].size(), 0.0);
  }
}

void GradSet::zero() {
  for (auto& m : w) std::fill(m.begin(), m.end(), 0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}

void GradSet::scale(double s) {
  for (auto& m : w)
    for (double& x : m) x *= s;
  for (auto& v : b)
    for (double& x : v) x *= s;
}

Mlp::Mlp(std::vector<std::size_t> sizes, Activation act, Rng& rng)
    : sizes_(std::move(sizes)), act_(act) {
  if (sizes_.size() < 2) fail(Status::invalid_argument, "mlp needs at least 2 layers");
  for (std::size_t s : sizes_)
    if (s == 0) fail(Status::invalid_argument, "mlp layer size must be > 0");
  std::size_t layers = sizes_.size() - 1;
  w_.resize(layers);
  b_.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    std::size_t in = sizes_[l], out = sizes_[l + 1];
    w_[l].resize(in * out);
    b_[l].assign(out, 0.0);
    if (l + 1 == layers) {
      // Small output layer keeps initial actions/values near zero.
      for (double& x : w_[l]) x = rng.uniform(-3e-3, 3e-3);
    } else {
      double s = std::sqrt(2.0 / static_cast<double>(in));
      for (double& x : w_[l]) x = s * rng.gaussian();
    }
  }
}

void Mlp::prepare(MlpWorkspace& ws) const {
  ws.act.resize(sizes_.size());
  ws.delta.resize(layer_count());
  for (std::size_t l = 0; l < sizes_.size(); ++l) ws.act[l].resize(sizes_[l]);
  for (std::size_t l = 0; l < layer_count(); ++l) ws.delta[l].resize(sizes_[l + 1]);
  ws.input_grad.resize(input_size());
}

const std::vector<double>& Mlp::forward(const double* x, MlpWorkspace& ws) const {
  std::copy(x, x + sizes_[0], ws.act[0].begin());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* wl = w_[l].data();
    const double* prev = ws.act[l].data();
    double* next = ws.act[l + 1].data();
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = wl + o * in;
      double z = b_[l][o];
      for (std::size_t i = 0; i < in; ++i) z += row[i] * prev[i];
      if (l + 1 < layer_count())
        next[o] = z > 0.0 ? z : 0.0;
      else
        next[o] = act_ == Activation::relu_hidden_tanh_out ? std::tanh(z) : z;
    }
  }
  return ws.act.back();
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
  if (x.size() != input_size()) fail(Status::invalid_argument, "mlp input size mismatch");
  MlpWorkspace ws;
  prepare(ws);
  return forward(x.data(), ws);
}

void Mlp::backward_input(const double* upstream, MlpWorkspace& ws) const {
  std::size_t last = layer_count() - 1;
  // Output layer delta.
  for (std::size_t o = 0; o < sizes_[last + 1]; ++o) {
    double a = ws.act[last + 1][o];
    double dz = act_ == Activation::relu_hidden_tanh_out ? 1.0 - a * a : 1.0;
    ws.delta[last][o] = upstream[o] * dz;
  }
  // Backpropagate through hidden layers.
  for (std::size_t l = last; l-- > 0;) {
    std::size_t out = sizes_[l + 1];
    std::size_t nxt = sizes_[l + 2];
    const double* wnext = w_[l + 1].data();
    const double* dnext = ws.delta[l + 1].data();
    double* dl = ws.delta[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      if (ws.act[l + 1][o] <= 0.0) {  // ReLU gate (activation stores max(z,0))
        dl[o] = 0.0;
        continue;
      }
      double s = 0.0;
      for (std::size_t k = 0; k < nxt; ++k) s += wnext[k * out + o] * dnext[k];
      dl[o] = s;
    }
  }
  // Input gradient.
  std::size_t in0 = sizes_[0], out0 = sizes_[1];
  const double* w0 = w_[0].data();
  const double* d0 = ws.delta[0].data();
  for (std::size_t i = 0; i < in0; ++i) {
    double s = 0.0;
    for (std::size_t o = 0; o < out0; ++o) s += w0[o * in0 + i] * d0[o];
    ws.input_grad[i] = s;
  }
}

void Mlp::backward(const double* x, const double* upstream, MlpWorkspace& ws,
                   GradSet& g) const {
  (void)x;  // activations for x are already in ws from forward()
  backward_input(upstream, ws);
  // Parameter gradients.
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* prev = ws.act[l].data();
    const double* dl = ws.delta[l].data();
    double* gw = g.w[l].data();
    double* gb = g.b[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      double d = dl[o];
      gb[o] += d;
      double* row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += d * prev[i];
    }
  }
}

void Mlp::ensure_adam_state() {
  if (!mw_.empty()) return;
  mw_.resize(layer_count());
  vw_.resize(layer_count());
  mb_.resize(layer_count());
  vb_.resize(layer_count());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    mw_[l].assign(w_[l].size(), 0.0);
    vw_[l].assign(w_[l].size(), 0.0);
    mb_[l].assign(b_[l].size(), 0.0);
    vb_[l].assign(b_[l].size(), 0.0);
  }
}

void Mlp::apply_update(const GradSet& g, double lr, Optimizer opt) {
  for (std::size_t l = 0; l < layer_count(); ++l)
    if (!all_finite(g.w[l]) || !all_finite(g.b[l]))
      fail(Status::diverged, "non-finite gradient in layer " + std::to_string(l));

  if (opt == Optimizer::sgd) {
    for (std::size_t l = 0; l < layer_count(); ++l) {
      for (std::size_t i = 0; i < w_[l].size(); ++i) w_[l][i] -= lr * g.w[l][i];
      for (std::size_t i = 0; i < b_[l].size(); ++i) b_[l][i] -= lr * g.b[l][i];
    }
  } else {
    ensure_adam_state();
    ++adam_t_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    auto step = [&](std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                    const std::vector<double>& grad) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    };
    for (std::size_t l = 0; l < layer_count(); ++l) {
      step(w_[l], mw_[l], vw_[l], g.w[l]);
      step(b_[l], mb_[l], vb_[l], g.b[l]);
    }
  }
  for (std::size_t l = 0; l < layer_count(); ++l)
    if (!all_finite(w_[l]) || !all_finite(b_[l]))
      fail(Status::diverged, "non-finite parameter in layer " + std::to_string(l));
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (target.sizes() != source.sizes() || target.activation() != source.activation())
    fail(Status::invalid_argument, "soft_update architecture mismatch");
  for (std::size_t l = 0; l < target.layer_count(); ++l) {
    // Convex form: exact at tau = 0 and tau = 1, so a full update is a
    // bit-exact copy (the incremental t += tau*(s-t) is one rounding off).
    auto& tw = target.weights()[l];
    const auto& sw = source.weights()[l];
    for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = tau * sw[i] + (1.0 - tau) * tw[i];
    auto& tb = target.biases()[l];
    const auto& sb = source.biases()[l];
    for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = tau * sb[i] + (1.0 - tau) * tb[i];
  }
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::string s = "# hems mlp v1\n";
  s += "activation " + to_string(net.activation()) + "\n";
  s += "layers";
  for (std::size_t sz : net.sizes()) s += " " + std::to_string(sz);
  s += "\n";
  s += "adam_steps " + std::to_string(net.adam_steps()) + "\n";
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    s += "w" + std::to_string(l) + "\n";
    append_row(s, net.weights()[l]);
    s += "b" + std::to_string(l) + "\n";
    append_row(s, net.biases()[l]);
  }
  if (!net.adam_mw().empty()) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      s += "mw" + std::to_string(l) + "\n";
      append_row(s, net.adam_mw()[l]);
      s += "vw" + std::to_string(l) + "\n";
      append_row(s, net.adam_vw()[l]);
      s += "mb" + std::to_string(l) + "\n";
      append_row(s, net.adam_mb()[l]);
      s += "vb" + std::to_string(l) + "\n";
      append_row(s, net.adam_vb()[l]);
    }
  }
  write_text_file(path, s);
}

Mlp load_mlp(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "# hems mlp v1")
    fail(Status::parse_error, path + ": not a checkpoint file");
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": missing activation");
  std::vector<std::string> tok = split(trim(line), ' ');
  if (tok.size() != 2 || tok[0] != "activation")
    fail(Status::parse_error, path + ": malformed activation line");
  Activation act = activation_from_string(tok[1]);
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": missing layers");
  tok = split(trim(line), ' ');
  if (tok.size() < 3 || tok[0] != "layers")
    fail(Status::parse_error, path + ": malformed layers line");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < tok.size(); ++i)
    sizes.push_back(static_cast<std::size_t>(parse_long(tok[i], "layer size")));
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": missing adam_steps");
  tok = split(trim(line), ' ');
  if (tok.size() != 2 || tok[0] != "adam_steps")
    fail(Status::parse_error, path + ": malformed adam_steps line");
  long adam_t = parse_long(tok[1], "adam_steps");

  Rng dummy(0);
  Mlp net(sizes, act, dummy);
  net.set_adam_steps(adam_t);
  auto read_block = [&](const std::string& tag, std::vector<double>& dest) -> bool {
    std::string header;
    if (!std::getline(in, header)) return false;
    if (trim(header) != tag) fail(Status::parse_error, path + ": expected block '" + tag + "'");
    std::string row;
    if (!std::getline(in, row)) fail(Status::parse_error, path + ": truncated block " + tag);
    dest = parse_row(row, dest.size(), path + " " + tag);
    return true;
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    read_block("w" + std::to_string(l), net.weights()[l]);
    read_block("b" + std::to_string(l), net.biases()[l]);
  }
  // Optional optimizer state.
  std::streampos pos = in.tellg();
  std::string probe;
  if (std::getline(in, probe) && trim(probe) == "mw0") {
    in.seekg(pos);
    net.adam_mw().resize(net.layer_count());
    net.adam_vw().resize(net.layer_count());
    net.adam_mb().resize(net.layer_count());
    net.adam_vb().resize(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      net.adam_mw()[l].assign(net.weights()[l].size(), 0.0);
      net.adam_vw()[l].assign(net.weights()[l].size(), 0.0);
      net.adam_mb()[l].assign(net.biases()[l].size(), 0.0);
      net.adam_vb()[l].assign(net.biases()[l].size(), 0.0);
      read_block("mw" + std::to_string(l), net.adam_mw()[l]);
      read_block("vw" + std::to_string(l), net.adam_vw()[l]);
      read_block("mb" + std::to_string(l), net.adam_mb()[l]);
      read_block("vb" + std::to_string(l), net.adam_vb()[l]);
    }
  }
  return net;
}

}  // namespace hems
