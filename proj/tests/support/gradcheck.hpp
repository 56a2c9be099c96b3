#pragma once

// Finite-difference gradient check shared by the unit tests and the
// acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dqp/nn/network.hpp"

namespace dqp::testing {

using nn::ArchSpec;
using nn::Cache;
using nn::Gradients;
using nn::LayerKind;
using nn::Matrix;
using nn::Mode;
using nn::Network;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline ArchSpec reduced(int side = 0) {
  ArchSpec a;
  a.height = 8;
  a.width = 8;
  a.channels = 3;
  a.convs = {{4, 3, 2}, {5, 2, 1}};
  a.hidden = {6};
  a.side = side;
  return a;
}

using Pattern = std::vector<std::vector<bool>>;

// ReLU on/off pattern of a forward pass.
inline Pattern relu_pattern(const Network& net, const Cache& cache) {
  Pattern p;
  for (std::size_t i = 0; i < net.chain().size(); ++i) {
    if (net.chain()[i].kind != LayerKind::kRelu) continue;
    const Matrix& x = cache.inputs[i];
    std::vector<bool> on(static_cast<std::size_t>(x.size()));
    for (Eigen::Index k = 0; k < x.size(); ++k) on[static_cast<std::size_t>(k)] = x.data()[k] > 0;
    p.push_back(std::move(on));
  }
  return p;
}

inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

struct FdReport {
  double worst = 0;
  int probed = 0;
  int kinks = 0;  // probes skipped because +-h crossed a ReLU kink
};

// Central differences with step 1e-3 on randomly chosen parameter entries and
// a strided sweep over input and side entries, for the scalar loss
// sum_i w_i * out_i. A probe whose +h or -h evaluation flips any ReLU relative
// to the base point straddles a kink where the loss is not differentiable;
// such probes are counted but not compared.
inline FdReport fd_check(const ArchSpec& arch, int probes_per_block, int batch, Mode mode = Mode::kTrain) {
  std::mt19937_64 rng(99);
  Network net(arch, 5);
  // Random batch norm affine parameters so that gamma/beta are not trivially 1/0.
  for (Matrix* p : net.parameters()) {
    if (p->rows() == 1) *p += random_matrix(rng, 1, p->cols(), -0.3, 0.3);
  }
  net.touch();
  const Matrix x = random_matrix(rng, batch, arch.input_size());
  const Matrix side = arch.side > 0 ? random_matrix(rng, batch, arch.side) : Matrix();
  const Matrix w = random_matrix(rng, batch, 1);
  if (mode == Mode::kInfer) {
    for (Matrix* b : net.buffers()) *b = random_matrix(rng, b->rows(), b->cols(), 0.2, 1.0);
  }
  Cache base;
  net.forward(x, side, mode, &base);
  const Pattern pattern = relu_pattern(net, base);
  const Gradients g = net.backward(base, w);

  const double h = 1e-3;
  FdReport r;
  auto eval = [&](const Matrix& xi, const Matrix& si, bool* same) {
    Cache c;
    const double v = (net.forward(xi, si, mode, &c).array() * w.array()).sum();
    *same = *same && relu_pattern(net, c) == pattern;
    return v;
  };
  auto compare = [&](double analytic, double up, double down, bool same) {
    if (!same) {
      ++r.kinks;
      return;
    }
    r.worst = std::max(r.worst, rel_error(analytic, (up - down) / (2 * h)));
    ++r.probed;
  };

  auto params = net.parameters();
  if (params.size() != g.params.size()) throw std::logic_error("gradient count differs from parameter count");
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& p = *params[b];
    if (p.rows() != g.params[b].rows() || p.cols() != g.params[b].cols()) {
      throw std::logic_error("gradient shape differs from parameter shape");
    }
    std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
    const Eigen::Index count = std::min<Eigen::Index>(probes_per_block, p.size());
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index i = count == p.size() ? k : pick(rng);
      const double saved = p.data()[i];
      bool same = true;
      p.data()[i] = saved + h;
      net.touch();
      const double up = eval(x, side, &same);
      p.data()[i] = saved - h;
      net.touch();
      const double down = eval(x, side, &same);
      p.data()[i] = saved;
      net.touch();
      compare(g.params[b].data()[i], up, down, same);
    }
  }
  for (Eigen::Index i = 0; i < x.size(); i += 5) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    bool same = true;
    const double up = eval(xp, side, &same);
    const double down = eval(xm, side, &same);
    compare(g.input.data()[i], up, down, same);
  }
  for (Eigen::Index i = 0; i < side.size(); ++i) {
    Matrix sp = side, sm = side;
    sp.data()[i] += h;
    sm.data()[i] -= h;
    bool same = true;
    const double up = eval(x, sp, &same);
    const double down = eval(x, sm, &same);
    compare(g.side.data()[i], up, down, same);
  }
  return r;
}

}  // namespace dqp::testing
