#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dqp/nn/network.hpp"
#include "gradcheck.hpp"

using namespace dqp::nn;
using namespace dqp::testing;

TEST_CASE("full chain shapes follow valid-padding arithmetic") {
  const ArchSpec a = ArchSpec::full();
  const auto chain = build_chain(a);
  const auto shapes = layer_shapes(a);
  REQUIRE(chain.size() == shapes.size());
  // Independent oracle: floor((n - k) / s) + 1 per conv.
  std::vector<std::vector<int>> conv_shapes;
  int n = 30;
  for (auto [f, k, s] : std::vector<std::tuple<int, int, int>>{{32, 4, 2}, {64, 4, 2}, {64, 3, 1}}) {
    n = (n - k) / s + 1;
    conv_shapes.push_back({n, n, f});
  }
  std::vector<std::vector<int>> seen;
  std::vector<int> dense;
  int flat = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].kind == LayerKind::kConv) seen.push_back(shapes[i]);
    if (chain[i].kind == LayerKind::kDense) dense.push_back(shapes[i][0]);
    if (chain[i].kind == LayerKind::kFlatten) flat = shapes[i][0];
  }
  CHECK(seen == conv_shapes);
  CHECK(seen == std::vector<std::vector<int>>{{14, 14, 32}, {6, 6, 64}, {4, 4, 64}});
  CHECK(flat == 1024);
  CHECK(dense == std::vector<int>{128, 1});

  // Batch norm before every layer except the output one.
  int bn = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].kind == LayerKind::kConv || (chain[i].kind == LayerKind::kDense && i + 1 < chain.size())) {
      REQUIRE(i > 0);
      CHECK(chain[i - 1].kind == LayerKind::kBatchNorm);
      ++bn;
    }
  }
  CHECK(bn == 4);
  CHECK(chain.back().kind == LayerKind::kDense);
  CHECK(chain[chain.size() - 2].kind != LayerKind::kBatchNorm);

  Network net(a, 1);
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(rng, 2, a.input_size(), 0, 1);
  const Matrix out = net.infer(x);
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 1);
}

TEST_CASE("zero weights give zero output") {
  Network net(ArchSpec::desk(), 11);
  net.set_zero();
  std::mt19937_64 rng(4);
  for (int t = 0; t < 3; ++t) {
    const Matrix x = random_matrix(rng, 3, net.arch().input_size(), -2, 2);
    CHECK(net.infer(x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.forward(x, Matrix(), Mode::kTrain).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("infer mode is per-sample and order independent") {
  Network net(reduced(2), 8);
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(rng, 5, net.arch().input_size());
  const Matrix s = random_matrix(rng, 5, 2);
  const Matrix all = net.infer(x, s);
  for (int i = 0; i < 5; ++i) {
    const Matrix one = net.infer(x.row(i), s.row(i));
    CHECK(one(0, 0) == doctest::Approx(all(i, 0)).epsilon(1e-12));
  }
  Matrix same(3, x.cols());
  for (int i = 0; i < 3; ++i) same.row(i) = x.row(1);
  Matrix same_side(3, 2);
  for (int i = 0; i < 3; ++i) same_side.row(i) = s.row(1);
  const Matrix rep = net.infer(same, same_side);
  CHECK(rep(0, 0) == rep(1, 0));
  CHECK(rep(1, 0) == rep(2, 0));

  // Train mode couples samples only through batch statistics, which do not
  // depend on order: a permuted batch gives permuted outputs.
  Network a(reduced(2), 8), b(reduced(2), 8);
  const Matrix out = a.forward(x, s, Mode::kTrain);
  Matrix xp(5, x.cols()), sp(5, 2);
  const int perm[] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) {
    xp.row(i) = x.row(perm[i]);
    sp.row(i) = s.row(perm[i]);
  }
  const Matrix outp = b.forward(xp, sp, Mode::kTrain);
  for (int i = 0; i < 5; ++i) CHECK(outp(i, 0) == doctest::Approx(out(perm[i], 0)).epsilon(1e-12));
}

TEST_CASE("batch norm in infer mode is a fixed affine map") {
  // A dense-only net with no hidden layers is affine in its input; with a
  // hidden layer and frozen statistics the pre-activation of the first dense
  // layer is affine too, which shows up as exact midpoint linearity of the
  // output when every ReLU stays active.
  ArchSpec a;
  a.height = 2;
  a.width = 2;
  a.channels = 1;
  a.hidden = {3};
  Network net(a, 2);
  for (Matrix* p : net.parameters()) {
    if (p->rows() == 4 && p->cols() == 3) *p = Matrix::Constant(4, 3, 0.5);  // dense weights
    if (p->rows() == 1 && p->cols() == 3) *p = Matrix::Constant(1, 3, 10.0);  // dense bias: keep ReLU active
  }
  net.touch();
  auto buf = net.buffers();
  *buf[0] = Matrix::Constant(1, 4, 0.25);
  *buf[1] = Matrix::Constant(1, 4, 2.0);
  Matrix x1(1, 4), x2(1, 4);
  x1 << 0.1, 0.2, 0.3, 0.4;
  x2 << 1.0, -0.5, 0.0, 2.0;
  const double y1 = net.infer(x1)(0, 0), y2 = net.infer(x2)(0, 0);
  const double ymid = net.infer((x1 + x2) / 2)(0, 0);
  CHECK(ymid == doctest::Approx((y1 + y2) / 2).epsilon(1e-12));
  CHECK(net.infer(x1)(0, 0) == y1);
}

TEST_CASE("gradient of the output with respect to the final bias is one") {
  Network net(reduced(), 12);
  std::mt19937_64 rng(6);
  const Matrix x = random_matrix(rng, 4, net.arch().input_size());
  Cache cache;
  net.forward(x, Matrix(), Mode::kTrain, &cache);
  const Gradients g = net.backward(cache, Matrix::Ones(4, 1));
  CHECK(g.params.back().size() == 1);
  CHECK(g.params.back()(0, 0) == doctest::Approx(4.0));  // one per sample
  const Gradients g1 = net.backward(cache, (Matrix(4, 1) << 1, 0, 0, 0).finished());
  CHECK(g1.params.back()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Network net(reduced(3), 13);
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(rng, 4, net.arch().input_size());
  const Matrix s = random_matrix(rng, 4, 3);
  Cache cache;
  net.forward(x, s, Mode::kTrain, &cache);
  const Gradients g = net.backward(cache, Matrix::Zero(4, 1));
  for (const Matrix& m : g.params) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.input.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.side.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences agree with backward on the reduced net") {
  // Batch of 32 as in training; with tiny batches the batch-norm curvature
  // alone pushes the O(h^2) truncation error of step 1e-3 above 1e-4.
  const FdReport r = fd_check(reduced(2), 80, 32);
  MESSAGE("compared ", r.probed, " entries (", r.kinks, " kink crossings skipped), max relative error ", r.worst);
  CHECK(r.probed >= 500);
  CHECK(r.worst < 1e-4);
}

TEST_CASE("finite differences per layer kind") {
  ArchSpec dense_only;
  dense_only.height = 3;
  dense_only.width = 3;
  dense_only.channels = 2;
  CHECK(fd_check(dense_only, 50, 32).worst < 1e-4);  // flatten + dense
  dense_only.hidden = {4};
  CHECK(fd_check(dense_only, 50, 32).worst < 1e-4);  // batch norm + relu on vectors
  ArchSpec conv_only;
  conv_only.height = 6;
  conv_only.width = 5;
  conv_only.channels = 2;
  conv_only.convs = {{3, 2, 1}};
  CHECK(fd_check(conv_only, 50, 32).worst < 1e-4);  // spatial batch norm + conv
  conv_only.convs = {{3, 3, 2}};
  CHECK(fd_check(conv_only, 50, 32).worst < 1e-4);  // strided conv
  CHECK(fd_check(reduced(2), 30, 32, Mode::kInfer).worst < 1e-4);  // frozen statistics
}

TEST_CASE("adam closed-form first step") {
  Matrix p = Matrix::Zero(1, 1);
  Adam adam;
  adam.lr = 0.1;
  adam.step({&p}, {Matrix::Ones(1, 1)});
  // m_hat = 1, v_hat = 1: step = -0.1 / (1 + 1e-8).
  CHECK(p(0, 0) == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(adam.steps == 1);
  adam.step({&p}, {Matrix::Ones(1, 1)});
  CHECK(p(0, 0) == doctest::Approx(-0.2).epsilon(1e-7));
}

TEST_CASE("adam with zero gradients only decays the moments") {
  Matrix p = Matrix::Constant(2, 2, 0.5);
  Adam adam;
  adam.lr = 0.1;
  adam.m = {Matrix::Zero(2, 2)};
  adam.v = {Matrix::Zero(2, 2)};
  adam.step({&p}, {Matrix::Zero(2, 2)});
  CHECK(p == Matrix::Constant(2, 2, 0.5));
  adam.m[0].setConstant(1.0);
  adam.v[0].setConstant(1.0);
  const Matrix before = p;
  adam.step({&p}, {Matrix::Zero(2, 2)});
  CHECK(adam.m[0](0, 0) == doctest::Approx(0.9));
  CHECK(adam.v[0](0, 0) == doctest::Approx(0.999));
  CHECK(adam.steps == 2);
  // Decayed moments still move the parameter; only a fresh state stays put.
  CHECK(p != before);
  CHECK_THROWS_AS(adam.step({&p}, {Matrix::Zero(3, 2)}), ShapeError);
}

TEST_CASE("training trajectories are reproducible") {
  auto run = [] {
    Network net(reduced(1), 21);
    Adam adam;
    adam.lr = 1e-2;
    std::mt19937_64 rng(17);
    std::vector<double> losses;
    for (int it = 0; it < 20; ++it) {
      const Matrix x = random_matrix(rng, 8, net.arch().input_size());
      const Matrix s = random_matrix(rng, 8, 1);
      const Matrix y = random_matrix(rng, 8, 1);
      Cache cache;
      const Matrix out = net.forward(x, s, Mode::kTrain, &cache);
      const Matrix diff = out - y;
      losses.push_back(diff.squaredNorm());
      adam.step(net, net.backward(cache, 2 * diff, false));
    }
    return std::make_pair(losses, net);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.back() < a.first.front());
}

TEST_CASE("stale caches and bad inputs are rejected") {
  Network net(reduced(), 1);
  Network other(reduced(), 1);
  std::mt19937_64 rng(8);
  const Matrix x = random_matrix(rng, 2, net.arch().input_size());
  Cache cache;
  net.forward(x, Matrix(), Mode::kTrain, &cache);
  CHECK_THROWS_AS(other.backward(cache, Matrix::Ones(2, 1)), std::logic_error);
  Adam adam;
  adam.step(net, net.backward(cache, Matrix::Ones(2, 1)));
  CHECK_THROWS_AS(net.backward(cache, Matrix::Ones(2, 1)), std::logic_error);

  CHECK_THROWS_AS(net.infer(Matrix::Zero(1, 10)), ShapeError);
  CHECK_THROWS_AS(net.infer(x, Matrix::Zero(2, 1)), ShapeError);
  Matrix bad = x;
  bad(0, 3) = std::nan("");
  CHECK_THROWS_AS(net.infer(bad), NumericError);
  for (Matrix* p : net.parameters()) p->setConstant(1e300);
  net.touch();
  CHECK_THROWS_AS(net.infer(x), NumericError);

  ArchSpec a = reduced();
  a.convs[0].stride = 0;
  CHECK_THROWS_AS(build_chain(a), ShapeError);
  Tensor t = Tensor::zeros({2, 3});
  t.values.pop_back();
  CHECK_THROWS_AS(t.validate(), ShapeError);
}

TEST_CASE("tensor indexing is row-major") {
  Tensor t = Tensor::zeros({30, 30, 7});
  t.at({5, 3, 6}) = 1;
  CHECK(t.values[(5 * 30 + 3) * 7 + 6] == 1);
  CHECK_THROWS_AS(t.at({30, 0, 0}), ShapeError);
  const Matrix m = to_matrix(Tensor::zeros({4, 2, 3}));
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 6);
}

TEST_CASE("checkpoint round trip is bit identical") {
  Network net(reduced(2), 31);
  Adam adam;
  adam.lr = 0.003;
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(rng, 6, net.arch().input_size());
  const Matrix s = random_matrix(rng, 6, 2);
  for (int it = 0; it < 3; ++it) {
    Cache cache;
    net.forward(x, s, Mode::kTrain, &cache);
    adam.step(net, net.backward(cache, Matrix::Ones(6, 1), false));
  }
  std::stringstream buf;
  save_checkpoint(buf, net, &adam, R"({"note":"unit"})");
  Adam adam2;
  std::string meta;
  Network back = load_checkpoint(buf, &adam2, &meta);
  CHECK(back == net);
  CHECK(back.arch() == net.arch());
  CHECK(back.seed() == 31);
  CHECK(meta == R"({"note":"unit"})");
  CHECK(adam2.steps == 3);
  CHECK(adam2.lr == 0.003);
  REQUIRE(adam2.m.size() == adam.m.size());
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    CHECK(adam2.m[i] == adam.m[i]);
    CHECK(adam2.v[i] == adam.v[i]);
  }
  CHECK(back.infer(x, s) == net.infer(x, s));

  std::stringstream junk("not a checkpoint at all");
  CHECK_THROWS(load_checkpoint(junk));
  std::stringstream truncated(buf.str().substr(0, 200));
  save_checkpoint(truncated, net, nullptr);
  std::string bytes = truncated.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS(load_checkpoint(cut));
}

TEST_CASE("checkpoint bytes match the golden file") {
  ArchSpec a;
  a.height = 4;
  a.width = 4;
  a.channels = 2;
  a.convs = {{2, 2, 1}};
  a.hidden = {3};
  a.side = 1;
  Network net(a, 7);
  Adam adam;
  adam.lr = 0.5;
  Matrix x(2, a.input_size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(i % 5) / 4.0;
  Matrix s(2, 1);
  s << 1.0, 0.0;
  Cache cache;
  net.forward(x, s, Mode::kTrain, &cache);
  adam.step(net, net.backward(cache, Matrix::Ones(2, 1), false));
  std::stringstream buf;
  save_checkpoint(buf, net, &adam, R"({"golden":true})");

  const std::string path = std::string(DQP_TEST_DATA) + "/golden_tiny.ckpt";
  if (std::getenv("DQP_UPDATE_GOLDEN")) {
    std::ofstream(path, std::ios::binary) << buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  CHECK(golden.str() == buf.str());
  std::stringstream g2(golden.str());
  CHECK(load_checkpoint(g2).infer(x, s) == net.infer(x, s));
}

TEST_CASE("forward matches a direct loop implementation") {
  // Reference: explicit nested loops over the layer definitions, infer mode.
  ArchSpec a;
  a.height = 7;
  a.width = 6;
  a.channels = 3;
  a.convs = {{2, 3, 2}, {3, 2, 1}};
  a.hidden = {4};
  a.side = 2;
  Network net(a, 41);
  std::mt19937_64 rng(12);
  for (Matrix* b : net.buffers()) *b = random_matrix(rng, b->rows(), b->cols(), 0.2, 1.5);
  for (Matrix* p : net.parameters()) {
    if (p->rows() == 1) *p += random_matrix(rng, 1, p->cols(), -0.5, 0.5);
  }
  net.touch();
  // Sparse one-hot-like input plus a dense sample.
  Matrix x = Matrix::Zero(2, a.input_size());
  for (int cell = 0; cell < 42; cell += 3) x(0, cell * 3 + cell % 3) = 1;
  x.row(1) = random_matrix(rng, 1, a.input_size());
  const Matrix side = random_matrix(rng, 2, 2);
  const Matrix got = net.infer(x, side);

  const auto params = net.parameters();
  const auto bufs = net.buffers();
  for (int sample = 0; sample < 2; ++sample) {
    // act[i][j][c]
    int h = a.height, w = a.width, c = a.channels;
    std::vector<double> act(x.row(sample).data(), x.row(sample).data() + a.input_size());
    std::size_t pi = 0, bi = 0;
    auto norm = [&](std::vector<double>& v, int ch) {
      const Matrix& g = *params[pi++];
      const Matrix& be = *params[pi++];
      const Matrix& mu = *bufs[bi++];
      const Matrix& var = *bufs[bi++];
      for (std::size_t k = 0; k < v.size(); ++k) {
        const int q = static_cast<int>(k % static_cast<std::size_t>(ch));
        v[k] = g(0, q) * (v[k] - mu(0, q)) / std::sqrt(var(0, q) + a.bn_eps) + be(0, q);
      }
    };
    for (const ConvSpec& cs : a.convs) {
      norm(act, c);
      const Matrix& wgt = *params[pi++];
      const Matrix& bias = *params[pi++];
      const int oh = (h - cs.kernel) / cs.stride + 1, ow = (w - cs.kernel) / cs.stride + 1;
      std::vector<double> out(static_cast<std::size_t>(oh * ow * cs.filters));
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j)
          for (int f = 0; f < cs.filters; ++f) {
            double sum = bias(0, f);
            for (int ki = 0; ki < cs.kernel; ++ki)
              for (int kj = 0; kj < cs.kernel; ++kj)
                for (int q = 0; q < c; ++q) {
                  const double in = act[static_cast<std::size_t>(((i * cs.stride + ki) * w + j * cs.stride + kj) * c + q)];
                  sum += in * wgt((ki * cs.kernel + kj) * c + q, f);
                }
            out[static_cast<std::size_t>((i * ow + j) * cs.filters + f)] = std::max(0.0, sum);
          }
      act = out;
      h = oh;
      w = ow;
      c = cs.filters;
    }
    act.push_back(side(sample, 0));
    act.push_back(side(sample, 1));
    for (int units : a.hidden) {
      norm(act, static_cast<int>(act.size()));
      const Matrix& wgt = *params[pi++];
      const Matrix& bias = *params[pi++];
      std::vector<double> out(static_cast<std::size_t>(units));
      for (int u = 0; u < units; ++u) {
        double sum = bias(0, u);
        for (std::size_t k = 0; k < act.size(); ++k) sum += act[k] * wgt(static_cast<Eigen::Index>(k), u);
        out[static_cast<std::size_t>(u)] = std::max(0.0, sum);
      }
      act = out;
    }
    const Matrix& wgt = *params[pi++];
    const Matrix& bias = *params[pi++];
    double y = bias(0, 0);
    for (std::size_t k = 0; k < act.size(); ++k) y += act[k] * wgt(static_cast<Eigen::Index>(k), 0);
    CHECK(got(sample, 0) == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("output scale multiplies the output and its gradients") {
  ArchSpec scaled = reduced(2);
  scaled.output_scale = 100.0;
  Network a(reduced(2), 41);
  Network b(scaled, 41);
  std::mt19937_64 rng(12);
  const Matrix x = random_matrix(rng, 5, a.arch().input_size());
  const Matrix s = random_matrix(rng, 5, 2);
  const Matrix up = random_matrix(rng, 5, 1);
  Cache ca, cb;
  const Matrix ya = a.forward(x, s, Mode::kTrain, &ca);
  const Matrix yb = b.forward(x, s, Mode::kTrain, &cb);
  CHECK((yb - 100.0 * ya).cwiseAbs().maxCoeff() < 1e-9);
  const Gradients ga = a.backward(ca, up);
  const Gradients gb = b.backward(cb, up);
  for (std::size_t i = 0; i < ga.params.size(); ++i) {
    CHECK((gb.params[i] - 100.0 * ga.params[i]).cwiseAbs().maxCoeff() <= 1e-9 * (1 + gb.params[i].cwiseAbs().maxCoeff()));
  }

  std::stringstream buf;
  save_checkpoint(buf, b, nullptr);
  const Network back = load_checkpoint(buf);
  CHECK(back.arch().output_scale == 100.0);
  CHECK(back.infer(x, s) == b.infer(x, s));
  CHECK(ArchSpec::desk().output_scale == 100.0);
  CHECK(ArchSpec::full().output_scale == 1.0);
}

TEST_CASE("refreshed running statistics make infer mode match train mode") {
  Network net(reduced(), 43);
  std::mt19937_64 rng(13);
  const Matrix x = random_matrix(rng, 16, net.arch().input_size(), 0, 1);
  const SparseInput sparse = SparseInput::from_dense(x, net.arch().channels);
  const Matrix train = net.forward(x, Matrix(), Mode::kTrain);
  CHECK((net.infer(x) - train).cwiseAbs().maxCoeff() > 1e-3);  // one momentum step is far off
  net.refresh_running_stats({sparse});
  CHECK((net.infer(x) - train).cwiseAbs().maxCoeff() < 1e-9);

  // Several batches: running statistics are the average of the batch ones.
  const Matrix x2 = random_matrix(rng, 16, net.arch().input_size(), 0, 1);
  net.refresh_running_stats({sparse, SparseInput::from_dense(x2, net.arch().channels)});
  const Matrix first_only = net.buffers()[0]->eval();
  net.refresh_running_stats({sparse});
  const Matrix m1 = net.buffers()[0]->eval();
  net.refresh_running_stats({SparseInput::from_dense(x2, net.arch().channels)});
  const Matrix m2 = net.buffers()[0]->eval();
  CHECK((first_only - 0.5 * (m1 + m2)).cwiseAbs().maxCoeff() < 1e-12);
}
