#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qcs/unfold.hpp"
#include "support.hpp"

namespace {

qcs::Vector random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  qcs::Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = d(rng);
  return v / v.norm();
}

double cosine(const qcs::Vector& a, const qcs::Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

TEST(StageSchedule, DefaultValues) {
  const auto s = qcs::StageSchedule::default_for(4);
  EXPECT_EQ(s.lambdas, (std::vector<double>{0.5, 0.5, 0.5, 0.5}));
  ASSERT_EQ(s.betas.size(), 4u);
  EXPECT_DOUBLE_EQ(s.betas[0], 0.1);
  EXPECT_DOUBLE_EQ(s.betas[1], 0.075);
  EXPECT_DOUBLE_EQ(s.betas[2], 0.05);
  EXPECT_DOUBLE_EQ(s.betas[3], 0.025);
  EXPECT_THROW(qcs::StageSchedule::default_for(0), qcs::ParameterError);
}

TEST(StageSchedule, ValidationErrors) {
  EXPECT_THROW((qcs::StageSchedule{{}, {}}.validate()), qcs::ParameterError);
  EXPECT_THROW((qcs::StageSchedule{{0.5}, {0.1, 0.1}}.validate()), qcs::ParameterError);
  EXPECT_THROW((qcs::StageSchedule{{0.5}, {-0.1}}.validate()), qcs::ParameterError);
  EXPECT_THROW((qcs::StageSchedule{{std::nan("")}, {0.1}}.validate()), qcs::ParameterError);
}

struct Problem {
  qcs::Vector x;
  qcs::SensingOperator op;
  qcs::MeasurementRecord record;
};

Problem make_problem(std::size_t m, std::size_t n, int bits, double delta, double sigma, std::uint64_t seed) {
  Problem p{random_signal(n, seed), qcs::gaussian_operator(m, n, seed + 100), {}};
  p.record = qcs::simulate(p.x, p.op, sigma, qcs::QuantizerSpec(bits, delta), seed + 200);
  return p;
}

TEST(Reconstruct, ZeroStepReturnsInitialEstimate) {
  const auto p = make_problem(40, 10, 2, 0.3, 0.01, 1);
  const qcs::StageSchedule s{{0.0}, {0.1}};
  for (auto init : {qcs::InitMode::zeros, qcs::InitMode::backprojection}) {
    const auto x0 = qcs::initial_estimate(p.record, p.op, init);
    const auto r = qcs::reconstruct(p.record, p.op, s, {}, {.init = init});
    EXPECT_EQ(r.estimate, x0);
    EXPECT_EQ(qcs::vanilla_reconstruct(p.record, p.op, s, {}, {.init = init}).estimate, x0);
    EXPECT_EQ(r.residual_trace, std::vector<double>{0.0});
  }
}

TEST(Reconstruct, BackprojectionStart) {
  const auto p = make_problem(30, 8, 1, 1.0, 0.0, 2);
  const auto x0 = qcs::initial_estimate(p.record, p.op, qcs::InitMode::backprojection);
  const qcs::Vector ref = p.op.entries().transpose() * p.record.dequantized() /
                          p.op.entries().rowwise().squaredNorm().maxCoeff();
  EXPECT_LE((x0 - ref).cwiseAbs().maxCoeff(), 1e-14);
}

// One-bit measurements fix only the direction.
TEST(Reconstruct, OneBitTwoDimensionalDirection) {
  qcs::Vector x(2);
  x << 0.8, -0.6;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto op = qcs::gaussian_operator(64, 2, seed);
    const auto record = qcs::simulate(x, op, 0.0, qcs::QuantizerSpec::sign(), seed);
    const auto r = qcs::reconstruct(record, op, qcs::StageSchedule::default_for(50), {}, {.monotone = true});
    EXPECT_GE(cosine(r.estimate, x), 0.99) << "seed " << seed;
  }
}

TEST(Reconstruct, MonotoneModeNeverIncreasesNll) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int bits = seed % 2 == 0 ? 1 : 2;
    const auto p = make_problem(96, 32, bits, 0.25, seed % 3 == 0 ? 0.0 : 0.05, 300 + seed);
    const auto s = qcs::StageSchedule::default_for(15);
    const auto r = qcs::reconstruct(p.record, p.op, s, {}, {.monotone = true});
    const auto eps = qcs::effective_scale(p.record.sigma, s.betas.back(), p.op.row_gram_diag());
    double prev = qcs::nll(p.record, qcs::Vector::Zero(96), eps);
    ASSERT_EQ(r.nll_trace.size(), 15u);
    for (double v : r.nll_trace) {
      ASSERT_LE(v, prev) << "seed " << seed;
      prev = v;
    }
    EXPECT_DOUBLE_EQ(r.nll_trace.back(), qcs::nll(p.record, p.op.apply(r.estimate), eps));
  }
}

TEST(Reconstruct, TracesHaveStageLengthAndResidualIsStepNorm) {
  const auto p = make_problem(50, 12, 2, 0.5, 0.05, 3);
  const qcs::StageSchedule s{{0.1, 0.1, 0.1}, {0.1, 0.05, 0.02}};
  const auto r3 = qcs::reconstruct(p.record, p.op, s, {});
  const auto r2 = qcs::reconstruct(p.record, p.op, {{0.1, 0.1}, {0.1, 0.05}}, {});
  EXPECT_EQ(r3.nll_trace.size(), 3u);
  EXPECT_EQ(r3.residual_trace.size(), 3u);
  // Stages depend only on earlier stages.
  EXPECT_EQ(r3.residual_trace[0], r2.residual_trace[0]);
  EXPECT_EQ(r3.residual_trace[1], r2.residual_trace[1]);
}

TEST(Reconstruct, DegenerateScaleNamesTheStage) {
  const auto p = make_problem(20, 5, 1, 1.0, 0.0, 4);
  try {
    qcs::reconstruct(p.record, p.op, {{0.5, 0.5, 0.5}, {0.1, 0.0, 0.1}}, {});
    FAIL() << "expected DegenerateScaleError";
  } catch (const qcs::DegenerateScaleError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(qcs::vanilla_reconstruct(p.record, p.op, {{0.5}, {0.0}}, {}), qcs::DegenerateScaleError);
  // sigma > 0 keeps beta = 0 legal
  auto noisy = p.record;
  noisy.sigma = 0.1;
  EXPECT_NO_THROW(qcs::reconstruct(noisy, p.op, {{0.5}, {0.0}}, {}));
}

TEST(Reconstruct, ShapeAndScheduleErrors) {
  const auto p = make_problem(20, 5, 1, 1.0, 0.0, 5);
  EXPECT_THROW(qcs::reconstruct(p.record, qcs::gaussian_operator(21, 5, 0), qcs::StageSchedule::default_for(2), {}),
               qcs::DimensionError);
  EXPECT_THROW(qcs::reconstruct(p.record, p.op, {{0.5}, {}}, {}), qcs::ParameterError);
  EXPECT_THROW(qcs::reconstruct(p.record, p.op, {{INFINITY}, {0.1}}, {}), qcs::ParameterError);
}

TEST(Reconstruct, Deterministic) {
  const auto p = make_problem(60, 16, 2, 0.3, 0.02, 6);
  const auto s = qcs::StageSchedule::default_for(8);
  const auto a = qcs::reconstruct(p.record, p.op, s, {}, {.monotone = true});
  const auto b = qcs::reconstruct(p.record, p.op, s, {}, {.monotone = true});
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.nll_trace, b.nll_trace);
}

TEST(VanillaReconstruct, FineQuantizationIdentityOperator) {
  const std::size_t n = 32;
  const double delta = 2.0 / 256.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  qcs::Vector x(n);
  for (auto& v : x) v = u(rng);
  const auto op = qcs::SensingOperator::identity(n);
  const auto record = qcs::simulate(x, op, 0.0, qcs::QuantizerSpec(8, delta), 1);
  const auto r = qcs::vanilla_reconstruct(record, op, {{1.0, 1.0, 1.0}, {0.01, 0.01, 0.01}}, {});
  EXPECT_EQ(r.estimate, record.dequantized());
  EXPECT_LE((r.estimate - x).cwiseAbs().maxCoeff(), delta / 2);
}

TEST(VanillaReconstruct, StepIsLinearResidual) {
  const auto p = make_problem(30, 10, 2, 0.5, 0.0, 8);
  const auto r = qcs::vanilla_reconstruct(p.record, p.op, {{0.3}, {0.1}}, {});
  const qcs::Vector ref = 0.3 * p.op.entries().transpose() * p.record.dequantized();
  EXPECT_LE((r.estimate - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CompositeLoss, Examples) {
  const auto op = qcs::SensingOperator::identity(4);
  qcs::MeasurementRecord rec;
  rec.spec = qcs::QuantizerSpec::sign();
  rec.sigma = 0.0;
  rec.indices = {qcs::CodewordIndex{1}, qcs::CodewordIndex{1}, qcs::CodewordIndex{0}, qcs::CodewordIndex{1}};
  const qcs::EffectiveScale eps(qcs::Vector::Constant(4, 0.3));
  // truth (0, 0, -1, 2): two elements sit on the 1-bit edge, each with NLL ln 2.
  qcs::Vector truth(4);
  truth << 0.0, 0.0, -1.0, 2.0;
  const double tail = -std::log(0.5 * std::erfc(-1.0 / 0.3 / std::sqrt(2.0))) - std::log(0.5 * std::erfc(-2.0 / 0.3 / std::sqrt(2.0)));
  const double nll = (2.0 * std::numbers::ln2 + tail) / 4.0;
  EXPECT_TRUE(RelNear(qcs::composite_loss(truth, truth, rec, op, eps), 0.05 * nll, 1e-12));
  qcs::Vector est = truth;
  est[3] += 3.0;
  est[2] -= 4.0;
  const double loss = qcs::composite_loss(est, truth, rec, op, eps);
  EXPECT_TRUE(RelNear(loss, 5.0 + 0.05 * qcs::nll(rec, est, eps), 1e-14));
  EXPECT_THROW(qcs::composite_loss(est, qcs::Vector::Zero(3), rec, op, eps), qcs::DimensionError);
}

std::vector<qcs::TrainingPair> toy_pairs(std::size_t count, const qcs::SensingOperator& op, int bits, double delta,
                                         double sigma) {
  std::vector<qcs::TrainingPair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = random_signal(op.cols(), 900 + i);
    pairs.push_back({x, qcs::simulate(x, op, sigma, qcs::QuantizerSpec(bits, delta), 950 + i)});
  }
  return pairs;
}

TEST(Calibrate, NeverWorseThanDefaultAndRespectsBudget) {
  const auto op = qcs::gaussian_operator(40, 12, 1);
  const auto pairs = toy_pairs(1, op, 2, 0.3, 0.02);
  const qcs::CalibrationOptions opts{.budget = 60, .reconstruct = {.monotone = true}};
  const auto r = qcs::calibrate(pairs, op, 1, {}, opts);
  const double def = qcs::schedule_loss(pairs, op, qcs::StageSchedule::default_for(1), {}, opts.reconstruct);
  // the search starts from exp(log(default)), equal up to rounding
  EXPECT_TRUE(RelNear(r.initial_loss, def, 1e-12));
  EXPECT_LE(r.final_loss, def);
  EXPECT_LE(r.evaluations, 60u);
  EXPECT_DOUBLE_EQ(qcs::schedule_loss(pairs, op, r.schedule, {}, opts.reconstruct), r.final_loss);
}

TEST(Calibrate, BudgetCountsEveryEvaluation) {
  const auto op = qcs::gaussian_operator(30, 8, 2);
  const auto pairs = toy_pairs(2, op, 1, 1.0, 0.0);
  for (std::size_t budget : {1u, 4u, 13u}) {
    const auto r = qcs::calibrate(pairs, op, 3, {}, {.budget = budget, .reconstruct = {.monotone = true}});
    EXPECT_EQ(r.evaluations, budget);
  }
}

TEST(Calibrate, Deterministic) {
  const auto op = qcs::gaussian_operator(30, 8, 3);
  const auto pairs = toy_pairs(2, op, 2, 0.4, 0.01);
  const qcs::CalibrationOptions opts{.budget = 40, .reconstruct = {.monotone = true}};
  const auto a = qcs::calibrate(pairs, op, 2, {}, opts);
  const auto b = qcs::calibrate(pairs, op, 2, {}, opts);
  EXPECT_EQ(a.schedule.lambdas, b.schedule.lambdas);
  EXPECT_EQ(a.schedule.betas, b.schedule.betas);
  EXPECT_EQ(a.final_loss, b.final_loss);
}

TEST(Calibrate, ImprovesOnTenPairTwoBitSet) {
  const auto op = qcs::gaussian_operator(64, 16, 4);
  const auto pairs = toy_pairs(10, op, 2, 0.25, 0.02);
  const qcs::CalibrationOptions opts{.budget = 80, .reconstruct = {.monotone = true}};
  const auto r = qcs::calibrate(pairs, op, 5, {}, opts);
  const double def = qcs::schedule_loss(pairs, op, qcs::StageSchedule::default_for(5), {}, opts.reconstruct);
  EXPECT_GT(def - r.final_loss, 1e-3 * def) << def << " -> " << r.final_loss;
}

TEST(Calibrate, Errors) {
  const auto op = qcs::gaussian_operator(10, 4, 5);
  EXPECT_THROW(qcs::calibrate({}, op, 2, {}, {}), qcs::InputError);
  EXPECT_THROW(qcs::calibrate(toy_pairs(1, op, 1, 1.0, 0.0), op, 2, {}, {.budget = 0, .reconstruct = {}}), qcs::ParameterError);
}

TEST(ScheduleLoss, FailuresScoreInfinity) {
  const auto op = qcs::gaussian_operator(10, 4, 6);
  const auto pairs = toy_pairs(1, op, 1, 1.0, 0.0);
  EXPECT_EQ(qcs::schedule_loss(pairs, op, {{0.5}, {0.0}}, {}, {}), INFINITY);
}

}  // namespace
