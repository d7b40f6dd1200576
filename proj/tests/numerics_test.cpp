#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tlmg/error.hpp"
#include "tlmg/numerics/checkpoint.hpp"
#include "tlmg/numerics/gradcheck.hpp"
#include "tlmg/numerics/ops.hpp"
#include "tlmg/numerics/optim.hpp"

using namespace tlmg;
using namespace tlmg::nn;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, bool grad = false) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({r, c}, std::move(v), grad);
}

// Independent triple loop.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a.at(i, p) * b.at(p, j);
      out[i * b.cols() + j] = s;
    }
  return out;
}

// Direct per-row softmax(QK^T / sqrt(dk)) V.
std::vector<double> naive_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  const std::size_t dk = q.cols();
  std::vector<double> out(q.rows() * v.cols(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> s(k.rows());
    double mx = -1e300;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double d = 0.0;
      for (std::size_t p = 0; p < dk; ++p) d += q.at(i, p) * k.at(j, p);
      s[j] = d / std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (auto& x : s) z += (x = std::exp(x - mx));
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t c = 0; c < v.cols(); ++c)
        out[i * v.cols() + c] += s[j] / z * v.at(j, c);
  }
  return out;
}

}  // namespace

TEST(Matmul, IdentityCase) {
  auto a = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::from({2, 2}, {3, 4, 5, 6});
  auto c = matmul(a, b);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()),
            (std::vector<double>{3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  auto c = matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c.item(), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(7);
  auto a = random_matrix(rng, 3, 4);
  auto b = random_matrix(rng, 4, 2);
  auto c = matmul(a, b);
  auto ref = naive_matmul(a, b);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.data()[i], ref[i], 1e-12);
}

TEST(Matmul, ShapeMismatchReportsBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3] x [2, 3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, BitIdenticalAcrossRuns) {
  Rng rng(3);
  auto a = random_matrix(rng, 17, 23);
  auto b = random_matrix(rng, 23, 11);
  auto c1 = matmul(a, b);
  auto c2 = matmul(a, b);
  EXPECT_TRUE(std::equal(c1.data().begin(), c1.data().end(), c2.data().begin()));
}

TEST(Softmax, Examples) {
  auto s = softmax(Tensor::from({2}, {0, 0}), 0);
  EXPECT_DOUBLE_EQ(s.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.data()[1], 0.5);
  s = softmax(Tensor::from({2}, {1000, 1000}), 0);
  EXPECT_DOUBLE_EQ(s.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.data()[1], 0.5);
  s = softmax(Tensor::from({2}, {0, std::log(3.0)}), 0);
  EXPECT_NEAR(s.data()[0], 0.25, 1e-15);
  EXPECT_NEAR(s.data()[1], 0.75, 1e-15);
}

TEST(Softmax, InvalidAxis) {
  EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), DimensionError);
}

TEST(Softmax, SlicesSumToOneAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(7);
    const std::size_t axis = rng.below(2);
    auto x = random_matrix(rng, r, c);
    auto y = softmax(x, axis);
    const double shift = rng.uniform(-50, 50);
    auto ys = softmax(add_scalar(x, shift), axis);
    const std::size_t outer = axis == 0 ? c : r, len = axis == 0 ? r : c;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t i = axis == 0 ? j * c + o : o * c + j;
        EXPECT_GE(y.data()[i], 0.0);
        EXPECT_NEAR(y.data()[i], ys.data()[i], 1e-12);
        total += y.data()[i];
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Attention, SingleKey) {
  auto out = attention(Tensor::from({1, 2}, {0.3, -0.2}), Tensor::from({1, 2}, {0.3, -0.2}),
                       Tensor::from({1, 1}, {7}));
  EXPECT_DOUBLE_EQ(out.item(), 7.0);
}

TEST(Attention, IdenticalKeysAverageValues) {
  auto out = attention(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5}),
                       Tensor::from({2, 1}, {2, 4}));
  EXPECT_DOUBLE_EQ(out.item(), 3.0);
}

TEST(Attention, MatchesPerRowOracle) {
  Rng rng(5);
  auto q = random_matrix(rng, 2, 3), k = random_matrix(rng, 3, 3), v = random_matrix(rng, 3, 2);
  auto out = attention(q, k, v);
  auto ref = naive_attention(q, k, v);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.data()[i], ref[i], 1e-12);
}

TEST(Attention, DimensionMismatch) {
  EXPECT_THROW(attention(Tensor::zeros({2, 3}), Tensor::zeros({2, 4}), Tensor::zeros({2, 1})),
               DimensionError);
  EXPECT_THROW(attention(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), Tensor::zeros({3, 1})),
               DimensionError);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  std::vector<Parameter> ps{{"w", Tensor::from({3}, {1, -2, 3}, true)}};
  AdamState st;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    ps[0].tensor.zero_grad();
    adam_step(ps, st, {0.1, 0.9, 0.999, 1e-8}, s);
  }
  EXPECT_EQ(ps[0].tensor.data()[0], 1.0);
  EXPECT_EQ(ps[0].tensor.data()[1], -2.0);
  EXPECT_EQ(ps[0].tensor.data()[2], 3.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Parameter> ps{{"w", Tensor::scalar(2.0, true)}};
  auto loss = ps[0].tensor;  // d/dw w = 1
  ps[0].tensor.zero_grad();
  loss.backward();
  AdamState st;
  adam_step(ps, st, {0.1, 0.9, 0.999, 1e-8}, 1);
  EXPECT_NEAR(ps[0].tensor.item(), 2.0 - 0.1, 1e-8);
}

TEST(Adam, MatchesScalarReferenceOverTenSteps) {
  // Standalone scalar Adam on f(w) = (w - 0.3)^2 * 1.7.
  double w_ref = 1.25, m = 0, v = 0;
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<Parameter> ps{{"w", Tensor::scalar(1.25, true)}};
  AdamState st;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2 * 1.7 * (w_ref - 0.3);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    w_ref -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);

    ps[0].tensor.zero_grad();
    auto d = add_scalar(ps[0].tensor, -0.3);
    scale(mul(d, d), 1.7).backward();
    adam_step(ps, st, {lr, b1, b2, eps}, static_cast<std::uint64_t>(t));
    EXPECT_NEAR(ps[0].tensor.item(), w_ref, 1e-12);
  }
}

TEST(Adam, MissingGradientThrows) {
  std::vector<Parameter> ps{{"w", Tensor::scalar(1.0, true)}};
  AdamState st;
  EXPECT_THROW(adam_step(ps, st, {}, 1), NumericalError);
  ps[0].trainable = false;
  EXPECT_NO_THROW(adam_step(ps, st, {}, 1));
}

TEST(GradCheck, Square) {
  auto theta = Tensor::scalar(3.0, true);
  auto r = check_gradients([&] { return mul(theta, theta); }, {theta});
  EXPECT_NEAR(r.analytic, 6.0, 1e-12);
  EXPECT_LE(r.max_relative_error, 1e-9);
}

TEST(GradCheck, CrossEntropySoftmaxMatmul) {
  Rng rng(21);
  auto x = random_matrix(rng, 4, 4, true), w = random_matrix(rng, 4, 4, true);
  std::vector<std::size_t> y{0, 3, 1, 2};
  auto f = [&] { return neg(mean(log(pick(softmax(matmul(x, w), 1), y)))); };
  EXPECT_LE(check_gradients(f, {x, w}).max_relative_error, 1e-4);
}

TEST(GradCheck, AttentionHead) {
  Rng rng(22);
  auto q = random_matrix(rng, 3, 8, true), k = random_matrix(rng, 3, 8, true),
       v = random_matrix(rng, 3, 8, true), probe = random_matrix(rng, 3, 8);
  auto f = [&] { return sum(mul(attention(q, k, v), probe)); };
  EXPECT_LE(check_gradients(f, {q, k, v}).max_relative_error, 1e-4);
}

TEST(GradCheck, NonFiniteThrows) {
  auto x = Tensor::scalar(-1.0, true);
  EXPECT_THROW(check_gradients([&] { return log(x); }, {x}), NumericalError);
}

// Every differentiable op against central differences on inputs in [-1, 1].
TEST(GradCheck, EveryOpOnRandomInputs) {
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_matrix(rng, 3, 4, true), b = random_matrix(rng, 3, 4, true);
    auto c = random_matrix(rng, 4, 2, true), bias = random_matrix(rng, 1, 4, true);
    auto gamma = random_matrix(rng, 1, 4, true), beta = random_matrix(rng, 1, 4, true);
    auto probe = random_matrix(rng, 3, 4), probe2 = random_matrix(rng, 3, 2);
    auto pos = Tensor::from({3, 4}, std::vector<double>(12, 0.0), true);
    for (std::size_t i = 0; i < 12; ++i) pos.mutable_data()[i] = rng.uniform(0.2, 1.0);
    std::vector<std::size_t> ids{2, 0, 2}, cols{1, 3, 0};
    std::vector<std::size_t> override_at{0, 2};
    Tensor base = random_matrix(rng, 3, 4);

    auto dot = [](const Tensor& x, const Tensor& p) { return sum(mul(x, p)); };
    const std::vector<std::pair<const char*, std::function<Tensor()>>> cases{
        {"matmul", [&] { return dot(matmul(a, c), probe2); }},
        {"transpose", [&] { return dot(transpose(transpose(a)), probe); }},
        {"add", [&] { return dot(add(a, b), probe); }},
        {"sub", [&] { return dot(sub(a, b), probe); }},
        {"mul", [&] { return dot(mul(a, b), probe); }},
        {"scale", [&] { return dot(scale(a, -2.5), probe); }},
        {"add_row", [&] { return dot(add_row(a, bias), probe); }},
        {"gelu", [&] { return dot(gelu(a), probe); }},
        {"log", [&] { return dot(log(pos), probe); }},
        {"softmax0", [&] { return dot(softmax(a, 0), probe); }},
        {"softmax1", [&] { return dot(softmax(a, 1), probe); }},
        {"log_softmax", [&] { return dot(log_softmax(a), probe); }},
        {"layer_norm", [&] { return dot(layer_norm(a, gamma, beta), probe); }},
        {"embedding", [&] { return dot(embedding(a, ids), probe); }},
        {"pick", [&] { return sum(pick(a, cols)); }},
        {"hcat", [&] { return dot(hcat({a, matmul(a, c)}), hcat({probe, probe2})); }},
        {"vcat", [&] { return dot(vcat({a, b}), vcat({probe, probe})); }},
        {"slices", [&] { return sum(slice_rows(slice_cols(a, 1, 3), 1, 3)); }},
        {"override_rows",
         [&] { return dot(override_rows(base, override_at, {slice_rows(a, 0, 1), slice_rows(b, 2, 3)}), probe); }},
        {"mean", [&] { return mean(mul(a, a)); }},
        {"clamp", [&] { return dot(clamp(pos, 0.0, 2.0), probe); }},
    };
    for (const auto& [name, f] : cases) {
      auto r = check_gradients(f, {a, b, c, bias, gamma, beta, pos});
      EXPECT_LE(r.max_relative_error, 1e-4) << name;
    }
  }
}

TEST(GradCheck, SparseProduct) {
  std::vector<WeightedEdge> edges{{0, 1, 1.0}, {1, 2, 3.0}, {3, 0, 0.5}};
  auto adj = normalized_adjacency(4, edges);
  Rng rng(4);
  auto x = random_matrix(rng, 4, 3, true), probe = random_matrix(rng, 4, 3);
  auto r = check_gradients([&] { return sum(mul(spmm(adj, x), probe)); }, {x});
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  auto x = Tensor::scalar(1.5, true);
  auto y = mul(x, x);
  auto z = add(y, y);  // 4x
  x.zero_grad();
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, NoGradGuardSkipsRecording) {
  auto x = Tensor::scalar(2.0, true);
  NoGradGuard g;
  EXPECT_FALSE(mul(x, x).requires_grad());
}

TEST(Checkpoint, RoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "tlmg_ckpt_test.bin";
  Checkpoint c;
  c.hyperparameters = {{"layers", 2}, {"note", "x"}};
  c.tensors.push_back({"a", Tensor::from({2, 2}, {1.5, -0.0, 1e-300, 3})});
  c.tensors.push_back({"b", Tensor::from({3}, {0.1, 0.2, 0.3})});
  save_checkpoint(path, c);
  auto back = load_checkpoint(path);
  EXPECT_EQ(back.hyperparameters, c.hyperparameters);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.find("a").shape(), (Shape{2, 2}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.find("a").data()[i], c.tensors[0].tensor.data()[i]);
  // JSON header line followed by 7 raw doubles.
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  auto j = nlohmann::json::parse(header);
  EXPECT_EQ(j["format_version"], 1);
  EXPECT_EQ(j["tensors"][1]["name"], "b");
  EXPECT_EQ(std::filesystem::file_size(path), header.size() + 1 + 7 * sizeof(double));
  in.close();
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), MissingArtifactError);
}

TEST(ParameterStore, NamesAreUnique) {
  ParameterStore s;
  s.add("w", Tensor::zeros({2}));
  EXPECT_THROW(s.add("w", Tensor::zeros({2})), ConfigError);
}
