#include <gtest/gtest.h>

#include <random>

#include <Eigen/QR>

#include "cutcluster/clustering.hpp"
#include "cutcluster/objective.hpp"
#include "oracles.hpp"

using namespace cutcluster;

namespace {

struct Instance {
  AttributedGraph graph;
  StructureLaplacian lg;
  ImplicitAttributeLaplacian ls;
};

Instance make_instance(int n, int f, std::mt19937_64& rng) {
  Instance in;
  in.graph = oracle::random_graph(n, 0.4, f, rng);
  in.lg = build_normalized_laplacian(in.graph);
  in.ls = build_attribute_laplacian(in.graph);
  return in;
}

Matrix random_row_stochastic(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = u(rng);
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

}  // namespace

TEST(Orthogonality, ZeroAtOrthonormalColumns) {
  Matrix h = Matrix::Zero(6, 2);
  h(0, 0) = 1.0;
  h(3, 1) = 1.0;
  std::mt19937_64 rng(1);
  const Instance in = make_instance(6, 3, rng);
  const EncodingLoss l = encoding_loss(h, in.lg, in.ls, {0.5, 2.0, 1.0, 1.0});
  EXPECT_EQ(l.penalty_term, 0.0);
  EXPECT_EQ(orthogonality_penalty(h).value, 0.0);
  EXPECT_TRUE(orthogonality_penalty(h).grad.isZero(0.0));
}

TEST(Orthogonality, PositiveOtherwise) {
  const Matrix h = Matrix::Constant(5, 2, 0.3);
  EXPECT_GT(orthogonality_penalty(h).value, 0.0);
}

TEST(EncodingLoss, AlphaOneDropsAttributeTerm) {
  std::mt19937_64 rng(2);
  const Instance in = make_instance(8, 3, rng);
  const Matrix h = oracle::random_matrix(8, 2, rng);
  const EncodingLoss l = encoding_loss(h, in.lg, in.ls, {1.0, 1.5, 1.0, 1.0});
  EXPECT_EQ(l.attribute_term, 0.0);
  EXPECT_DOUBLE_EQ(l.value,
                   structure_quadratic(in.lg, h).value + 1.5 * orthogonality_penalty(h).value);
  const EncodingLoss l0 = encoding_loss(h, in.lg, in.ls, {0.0, 1.5, 1.0, 1.0});
  EXPECT_EQ(l0.structure_term, 0.0);
}

TEST(EncodingLoss, LinearInAlpha) {
  std::mt19937_64 rng(3);
  const Instance in = make_instance(10, 4, rng);
  const Matrix h = oracle::random_matrix(10, 3, rng);
  const double s = structure_quadratic(in.lg, h).value;
  const double a = attribute_quadratic(in.ls, h).value;
  const double pen = orthogonality_penalty(h).value;
  for (double alpha : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    const EncodingLoss l = encoding_loss(h, in.lg, in.ls, {alpha, 2.0, 1.0, 1.0});
    EXPECT_NEAR(l.value, alpha * s + (1 - alpha) * a + 2.0 * pen, 1e-12);
    EXPECT_GE(l.value, 2.0 * pen + std::min(s, a) - 1e-12);
    EXPECT_LE(l.value, 2.0 * pen + std::max(s, a) + 1e-12);
  }
}

TEST(EncodingLoss, TraceTermsNonNegative) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = make_instance(15, 3, rng);
    const Matrix h = oracle::random_matrix(15, 4, rng);
    const EncodingLoss l = encoding_loss(h, in.lg, in.ls, {0.3, 1.0, 1.0, 1.0});
    EXPECT_GE(l.structure_term, 0.0);
    EXPECT_GE(l.attribute_term, 0.0);
    EXPECT_GE(l.penalty_term, 0.0);
  }
}

TEST(EncodingLoss, RotationInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = make_instance(12, 3, rng);
    const Matrix h = oracle::random_matrix(12, 3, rng);
    const Matrix r = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(3, 3, rng)).householderQ();
    const LossWeights w{0.6, 2.0, 1.0, 1.0};
    EXPECT_NEAR(encoding_loss(h * r, in.lg, in.ls, w).value,
                encoding_loss(h, in.lg, in.ls, w).value, 1e-9);
  }
}

TEST(EncodingLoss, FiniteDifferenceGradient) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = make_instance(8, 3, rng);
    const Matrix h = oracle::random_matrix(8, 2, rng);
    const LossWeights w{0.4, 3.0, 1.0, 1.0};
    const Matrix numeric = oracle::numeric_gradient(
        [&](const Matrix& x) { return encoding_loss(x, in.lg, in.ls, w).value; }, h);
    EXPECT_LE(oracle::rel_err(encoding_loss(h, in.lg, in.ls, w).grad_h, numeric), 1e-5);
  }
}

TEST(EncodingLoss, ShapeMismatch) {
  std::mt19937_64 rng(7);
  const Instance in = make_instance(8, 3, rng);
  EXPECT_THROW(encoding_loss(Matrix::Zero(7, 2), in.lg, in.ls, {}), Error);
}

TEST(LossWeights, Validation) {
  EXPECT_THROW((LossWeights{1.5, 1, 1, 1}.validate()), Error);
  EXPECT_THROW((LossWeights{0.5, -1, 1, 1}.validate()), Error);
  EXPECT_THROW((LossWeights{0.5, 1, -1, 1}.validate()), Error);
  EXPECT_NO_THROW((LossWeights{0.0, 0, 0, 0}.validate()));
}

TEST(ClusteringLoss, IdenticalIsZero) {
  std::mt19937_64 rng(8);
  const Matrix q = random_row_stochastic(6, 3, rng);
  EXPECT_NEAR(clustering_loss(q, q).value, 0.0, 1e-12);
}

TEST(ClusteringLoss, LogTwo) {
  Matrix p(1, 2), q(1, 2);
  p << 1.0, 0.0;
  q << 0.5, 0.5;
  const ClusteringLoss l = clustering_loss(p, q);
  EXPECT_NEAR(l.value, 0.693147, 1e-6);
  EXPECT_DOUBLE_EQ(l.grad_q(0, 0), -2.0);
  EXPECT_EQ(l.grad_q(0, 1), 0.0);
}

TEST(ClusteringLoss, NonNegativeAndGradient) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix p = random_row_stochastic(5, 4, rng);
    const Matrix q = random_row_stochastic(5, 4, rng);
    const ClusteringLoss l = clustering_loss(p, q);
    EXPECT_GT(l.value, 0.0);
    EXPECT_LE(oracle::rel_err(l.grad_q, -p.cwiseQuotient(q)), 1e-15);
  }
}

TEST(ClusteringLoss, InfiniteDivergence) {
  Matrix p(1, 2), q(1, 2);
  p << 0.5, 0.5;
  q << 1.0, 0.0;
  try {
    clustering_loss(p, q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::infinite_divergence);
  }
}

TEST(TotalLoss, GammaZeroAndZeroClusteringLoss) {
  std::mt19937_64 rng(10);
  const Instance in = make_instance(8, 3, rng);
  const Matrix h = oracle::random_matrix(8, 2, rng);
  const Matrix mu = oracle::random_matrix(3, 2, rng);
  const Matrix q = soft_assign(h, mu);
  const LossWeights w0{0.5, 1.0, 0.0, 1.0};
  const EncodingLoss enc = encoding_loss(h, in.lg, in.ls, w0);
  const ClusteringLoss clus = clustering_loss(random_row_stochastic(8, 3, rng), q);
  const TotalLoss t0 = total_loss(enc, clus, w0, h, mu, 1.0);
  EXPECT_EQ(t0.value, enc.value);
  EXPECT_EQ(t0.grad_h, enc.grad_h);
  EXPECT_TRUE(t0.grad_centroids.isZero(0.0));

  const LossWeights w{0.5, 1.0, 3.0, 1.0};
  const TotalLoss t = total_loss(enc, clustering_loss(q, q), w, h, mu, 1.0);
  EXPECT_NEAR(t.value, enc.value, 1e-12);
}

// d(total)/dH through L_GE, the soft assignment and the KL term, with the
// target held fixed.
TEST(TotalLoss, EndToEndFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = make_instance(9, 3, rng);
    const Matrix h = oracle::random_matrix(9, 2, rng);
    const Matrix mu = oracle::random_matrix(3, 2, rng);
    const Matrix p = random_row_stochastic(9, 3, rng);
    const LossWeights w{0.5, 2.0, 0.7, 1.0};
    const double theta = trial % 2 == 0 ? 1.0 : 2.5;
    auto value = [&](const Matrix& hh, const Matrix& mm) {
      const EncodingLoss enc = encoding_loss(hh, in.lg, in.ls, w);
      return enc.value + w.gamma * clustering_loss(p, soft_assign(hh, mm, theta)).value;
    };
    const EncodingLoss enc = encoding_loss(h, in.lg, in.ls, w);
    const TotalLoss t =
        total_loss(enc, clustering_loss(p, soft_assign(h, mu, theta)), w, h, mu, theta);
    EXPECT_NEAR(t.value, value(h, mu), 1e-12);
    const Matrix nh = oracle::numeric_gradient([&](const Matrix& x) { return value(x, mu); }, h);
    const Matrix nm = oracle::numeric_gradient([&](const Matrix& x) { return value(h, x); }, mu);
    EXPECT_LE(oracle::rel_err(t.grad_h, nh), 1e-5);
    EXPECT_LE(oracle::rel_err(t.grad_centroids, nm), 1e-5);
  }
}
