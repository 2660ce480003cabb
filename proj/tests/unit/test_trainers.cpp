#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dlab/autodiff/ops.hpp"
#include "dlab/diffusion/schedule.hpp"
#include "dlab/trainers/metrics.hpp"
#include "dlab/trainers/train.hpp"

using namespace dlab;
using namespace dlab::trainers;
using diffusion::alpha;
using diffusion::sigma;

namespace {

std::vector<double> flatten(const std::vector<ad::Value>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

TrainerConfig small_config(Method method) {
  TrainerConfig c;
  c.method = method;
  c.batch_size = 16;
  c.generator_hidden = {12};
  c.fake_hidden = {12};
  c.surrogate_steps = 150;
  c.surrogate_batch = 64;
  c.metric_samples = 300;
  c.snapshot_samples = 100;
  c.seed = 5;
  return c;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dlab_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

// Adam with beta1 = 0 on a scalar, as a reference for hand traces.
struct ScalarAdam {
  double lr, beta2 = 0.999, v = 0.0;
  int steps = 0;
  double update(double g) {
    ++steps;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double vhat = v / (1.0 - std::pow(beta2, steps));
    return -lr * g / (std::sqrt(vhat) + 1e-8);
  }
};

}  // namespace

TEST(TrainerConfig, DefaultsAndValidation) {
  TrainerConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.resolved_fake_updates(), 1);
  c.method = Method::dmd2;
  EXPECT_EQ(c.resolved_fake_updates(), 5);
  c.method = Method::tsg_fisher;
  EXPECT_EQ(c.resolved_fake_updates(), 5);
  EXPECT_EQ(parse_method("tsg_sim"), Method::tsg_sim);
  EXPECT_THROW(parse_method("gan"), std::invalid_argument);
  EXPECT_EQ(parse_truncation("last_step"), Truncation::last_step);

  TrainerConfig bad;
  bad.lambda = -1.0;
  bad.batch_size = 0;
  bad.fake_updates = 3;  // sgmd does one fake update
  try {
    bad.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.errors.size(), 3u);
    EXPECT_EQ(e.errors[0].rfind("lambda:", 0), 0u);
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
}

TEST(EnergyDistance, MatchesDirectSum) {
  const std::vector<double> x{0.0, 1.0, 3.0}, y{0.5, 2.0};
  double xy = 0.0;
  for (double a : x)
    for (double b : y) xy += std::abs(a - b);
  xy /= 6.0;
  const double xx = (1.0 + 3.0 + 2.0) * 2.0 / 6.0;
  const double yy = 1.5;
  EXPECT_NEAR(energy_distance(x, y, 1), 2.0 * xy - xx - yy, 1e-15);
  EXPECT_THROW(energy_distance(x, std::vector<double>{1.0}, 1), std::invalid_argument);
}

TEST(EnergyDistance, SmallForSameDistributionLargeForShift) {
  RngStream rng(3);
  const auto a = rng.normal_vector(4000), b = rng.normal_vector(4000);
  auto c = rng.normal_vector(4000);
  for (auto& v : c) v += 1.0;
  EXPECT_LT(std::abs(energy_distance(a, b, 2)), 0.01);
  EXPECT_GT(energy_distance(a, c, 2), 0.3);
}

TEST(Checkpoint, RoundTripAndHeader) {
  Checkpoint ckpt;
  ckpt.seed = 42;
  ckpt.iteration = 7;
  ckpt.meta["method"] = "sgmd";
  ckpt.tensors.push_back({"w", {2, 2}, {1.0, -0.5, 0.1, 3e-300}});
  ckpt.tensors.push_back({"b", {1}, {-0.0}});
  const auto bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(bytes.substr(0, bytes.find("end\n") + 4),
            "DLABCKPT v1\nseed 42\niteration 7\nmeta method sgmd\ntensor w 2 2\ntensor b 1\nend\n");
  // 1.0 little-endian
  const auto payload = bytes.substr(bytes.find("end\n") + 4);
  ASSERT_EQ(payload.size(), 40u);
  EXPECT_EQ(payload.substr(0, 8), std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.iteration, 7u);
  EXPECT_EQ(back.meta.at("method"), "sgmd");
  EXPECT_EQ(back.tensor("w").data, ckpt.tensors[0].data);
  EXPECT_TRUE(std::signbit(back.tensor("b").data[0]));
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  EXPECT_THROW(decode_checkpoint("NOPE\n"), CheckpointError);
}

TEST(TrainLog, CsvFormat) {
  TrainLog log;
  log.append({1, 0.889, 0.5, 0.25, 0.125, 1.0, 2.0, 2, std::nullopt});
  log.append({2, 0.96, -1e-20, 0.1, 0.0, 1.5, 0.3, 2, 0.0625});
  EXPECT_EQ(log.to_csv(), std::string(TrainLog::kHeader) +
                              "\n1,0.889,0.5,0.25,0.125,1,2,2,\n2,0.96,-1e-20,0.1,0,1.5,0.3,2,0.0625\n");
  EXPECT_THROW(log.append({2, 0.5, 0, 0, 0, 0, 0, 0, std::nullopt}), std::logic_error);
}

// Affine generator x0 = theta z + shift (ladder {1}), affine fake score
// a x_t + b, Gaussian teacher: two SGMD iterations against a hand-derived trace.
TEST(SgmdStep, MatchesHandTrace) {
  const double mu = 0.5, s = 0.8, lambda = 0.1, lr = 1e-2;
  TrainerConfig c;
  c.method = Method::sgmd;
  c.lambda = lambda;
  c.eta_theta = lr;
  c.eta_psi = lr;
  c.batch_size = 1;
  c.sampling_ladder = {1.0};
  c.train_timesteps = {0.889, 0.727};
  c.target = teachers::mixture_1d({1.0}, {mu}, {s});
  c.seed = 21;
  double theta = 0.7, shift = 0.0, a = 0.9, b = -0.2;
  Trainer trainer(c, std::make_unique<diffusion::LinearPredictor>(std::vector<double>{theta}, std::vector<double>{0.0}),
                  std::make_unique<diffusion::LinearPredictor>(std::vector<double>{a}, std::vector<double>{b}));
  ScalarAdam opt_theta{lr}, opt_shift{lr}, opt_a{lr}, opt_b{lr};
  for (int it = 0; it < 2; ++it) {
    const auto d = trainer.peek_draws();
    const double t = d.t, z = d.z[0], e = d.eps[0];
    const double al = alpha(t), sg = sigma(t), cw = al * al / std::pow(sg, 4);
    const double x0 = theta * z + shift;
    const double xt = al * x0 + sg * e;
    const double v = al * al * s * s + sg * sg;
    const double xr = mu + al * s * s / v * (xt - al * mu);
    const double xf = a * xt + b;
    const double delta = xf - xr, r = x0 - xf;
    // d/dtheta [1/2 c delta^2 - lambda/2 r^2], with x0 stopped inside r
    const double g_shift = a * al * (cw * delta + lambda * r);
    const double g_theta = g_shift * z;
    // d/da, d/db of lambda/2 r^2
    const double g_a = -lambda * r * xt, g_b = -lambda * r;
    const auto rec = trainer.step();
    EXPECT_EQ(rec.t, t);
    EXPECT_EQ(rec.backward_passes, 2u);
    theta += opt_theta.update(g_theta);
    shift += opt_shift.update(g_shift);
    a += opt_a.update(g_a);
    b += opt_b.update(g_b);
    const auto gp = flatten(trainer.generator().parameters());
    const auto fp = flatten(trainer.fake().parameters());
    EXPECT_NEAR(gp[0], theta, 1e-12);
    EXPECT_NEAR(gp[1], shift, 1e-12);
    EXPECT_NEAR(fp[0], a, 1e-12);
    EXPECT_NEAR(fp[1], b, 1e-12);
  }
}

namespace {

// Fake score that reproduces the teacher exactly and exposes one parameter
// with no influence on the output.
class FrozenTeacherScore final : public diffusion::XPredictor {
 public:
  explicit FrozenTeacherScore(teachers::AnalyticTeacher teacher)
      : teacher_(std::move(teacher)), dummy_(ad::Value::variable({0.3}, {1})) {}
  ad::Value predict(const ad::Value& xt, double t) const override {
    auto out = ad::Value::constant(teacher_.xpred(xt.data(), t), xt.shape());
    return ad::add(out, ad::scale(dummy_, 0.0));
  }
  std::vector<ad::Value> parameters() const override { return {dummy_}; }
  std::unique_ptr<XPredictor> clone() const override { return std::make_unique<FrozenTeacherScore>(teacher_); }

 private:
  teachers::AnalyticTeacher teacher_;
  ad::Value dummy_;
};

}  // namespace

TEST(SgmdStep, StationaryAtFixedPoint) {
  TrainerConfig c;
  c.target = teachers::mixture_1d({1.0}, {0.4}, {0.9});
  c.batch_size = 4096;
  c.seed = 3;
  const auto teacher = c.make_teacher();
  Trainer trainer(c, std::make_unique<diffusion::LinearPredictor>(std::vector<double>{0.9}, std::vector<double>{0.4}),
                  std::make_unique<FrozenTeacherScore>(teacher));
  const auto gen0 = flatten(trainer.generator().parameters());
  const auto fake0 = flatten(trainer.fake().parameters());
  double first = 0.0, second = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto rec = trainer.step();
    EXPECT_EQ(rec.delta_norm_mean, 0.0);
    (i < 100 ? first : second) += rec.r_norm_mean / 100.0;
  }
  EXPECT_EQ(flatten(trainer.generator().parameters()), gen0);
  EXPECT_EQ(flatten(trainer.fake().parameters()), fake0);
  EXPECT_NEAR(second, first, 0.01 * first);
}

TEST(TsgFisherStep, ZeroDeltaLeavesGeneratorUnchanged) {
  TrainerConfig c;
  c.method = Method::tsg_fisher;
  c.target = teachers::mixture_1d({1.0}, {0.4}, {0.9});
  c.batch_size = 8;
  const auto teacher = c.make_teacher();
  Trainer trainer(c, std::make_unique<diffusion::LinearPredictor>(std::vector<double>{0.9}, std::vector<double>{0.4}),
                  std::make_unique<FrozenTeacherScore>(teacher));
  const auto gen0 = flatten(trainer.generator().parameters());
  trainer.step();
  EXPECT_EQ(flatten(trainer.generator().parameters()), gen0);
}

TEST(Dmd2Step, MatchedScoresGiveNoGeneratorGradient) {
  TrainerConfig c;
  c.method = Method::dmd2;
  c.target = teachers::mixture_1d({0.3, 0.7}, {-1.0, 1.0}, {0.5, 0.6});
  c.batch_size = 8;
  const auto teacher = c.make_teacher();
  Trainer trainer(c, std::make_unique<diffusion::LinearPredictor>(std::vector<double>{1.1}, std::vector<double>{0.0}),
                  std::make_unique<FrozenTeacherScore>(teacher));
  const auto gen0 = flatten(trainer.generator().parameters());
  const auto rec = trainer.dmd2_step(1);
  EXPECT_EQ(rec.backward_passes, 2u);
  EXPECT_EQ(flatten(trainer.generator().parameters()), gen0);
}

TEST(Trainers, BackwardPassCounts) {
  for (auto [method, k, expected] : std::vector<std::tuple<Method, int, std::size_t>>{
           {Method::sgmd, 0, 2}, {Method::dmd2, 0, 6}, {Method::dmd2, 1, 2}, {Method::tsg_fisher, 0, 6},
           {Method::tsg_fisher, 3, 4}, {Method::tsg_sim, 0, 2}, {Method::sid, 0, 2}}) {
    auto c = small_config(method);
    c.fake_updates = k;
    c.surrogate_steps = 0;
    Trainer trainer(c);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(trainer.step().backward_passes, expected) << to_string(method);
  }
}

TEST(Trainers, ParameterIsolation) {
  for (auto method : {Method::sgmd, Method::dmd2, Method::tsg_fisher, Method::tsg_sim, Method::sid}) {
    auto c = small_config(method);
    c.surrogate_steps = 20;
    Trainer trainer(c);
    auto gen = flatten(trainer.generator().parameters());
    auto fake = flatten(trainer.fake().parameters());
    int generator_updates = 0, fake_updates = 0;
    trainer.set_phase_hook([&](Phase phase) {
      const auto g = flatten(trainer.generator().parameters());
      const auto f = flatten(trainer.fake().parameters());
      if (phase == Phase::generator_updated) {
        ++generator_updates;
        EXPECT_EQ(f, fake) << "generator update moved the fake score, " << to_string(method);
        EXPECT_NE(g, gen);
      } else {
        ++fake_updates;
        EXPECT_EQ(g, gen) << "fake update moved the generator, " << to_string(method);
        EXPECT_NE(f, fake);
      }
      gen = g;
      fake = f;
    });
    trainer.step();
    trainer.step();
    EXPECT_EQ(generator_updates, 2);
    EXPECT_EQ(fake_updates, 2 * c.resolved_fake_updates());
  }
}

TEST(Trainers, SidAlphaOneIsBitIdenticalToSim) {
  auto sim_cfg = small_config(Method::tsg_sim);
  auto sid_cfg = small_config(Method::sid);
  sid_cfg.sid_alpha = 1.0;
  Trainer sim(sim_cfg), sid(sid_cfg);
  for (int i = 0; i < 5; ++i) {
    const auto a = sim.step(), b = sid.step();
    EXPECT_EQ(a.generator_loss, b.generator_loss);
    EXPECT_EQ(a.fake_loss, b.fake_loss);
  }
  EXPECT_EQ(flatten(sim.generator().parameters()), flatten(sid.generator().parameters()));
  EXPECT_EQ(flatten(sim.fake().parameters()), flatten(sid.fake().parameters()));

  sid_cfg.sid_alpha = 0.5;
  Trainer sid_half(sid_cfg);
  for (int i = 0; i < 5; ++i) sid_half.step();
  EXPECT_NE(flatten(sim.generator().parameters()), flatten(sid_half.generator().parameters()));
}

TEST(Trainers, LastStepTruncation) {
  auto c = small_config(Method::sgmd);
  c.truncation = Truncation::last_step;
  Trainer trainer(c);
  bool saw_early = false;
  for (int i = 0; i < 10; ++i) {
    const auto d = trainer.peek_draws();
    ASSERT_TRUE(d.grad_step.has_value());
    ASSERT_LT(*d.grad_step, c.sampling_ladder.size());
    saw_early = saw_early || *d.grad_step + 1 < c.sampling_ladder.size();
    EXPECT_TRUE(std::isfinite(trainer.step().generator_loss));
  }
  EXPECT_TRUE(saw_early);
}

TEST(Trainers, MoreFakeUpdatesTrackBetter) {
  auto run = [](int k) {
    auto c = small_config(Method::tsg_fisher);
    c.fake_updates = k;
    c.seed = 9;
    Trainer trainer(c);
    double tail = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto rec = trainer.step();
      if (i >= 80) tail += rec.r_norm_mean / 20.0;
    }
    return tail;
  };
  EXPECT_LT(run(5), run(1));
}

TEST(Trainers, NonFiniteLossAbortsWithIteration) {
  auto c = small_config(Method::tsg_fisher);
  c.target = teachers::mixture_1d({1.0}, {0.0}, {1.0});
  diffusion::FunctionPredictor nan_fake([](std::span<const double> xt, std::size_t, double) {
    return std::vector<double>(xt.size(), std::nan(""));
  });
  Trainer trainer(c, std::make_unique<diffusion::LinearPredictor>(std::vector<double>{1.0}, std::vector<double>{0.0}),
                  nan_fake.clone());
  try {
    trainer.step();
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.iteration, 0u);
  }
}

TEST(Trainers, CheckpointRestoreContinuesIdentically) {
  auto c = small_config(Method::sgmd);
  Trainer a(c);
  for (int i = 0; i < 3; ++i) a.step();
  const auto bytes = encode_checkpoint(a.checkpoint());
  Trainer b(c);
  b.restore(decode_checkpoint(bytes));
  EXPECT_EQ(b.iteration(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto ra = a.step(), rb = b.step();
    EXPECT_EQ(TrainLog::csv_row(ra), TrainLog::csv_row(rb));
  }
  EXPECT_EQ(encode_checkpoint(a.checkpoint()), encode_checkpoint(b.checkpoint()));

  auto other = small_config(Method::sgmd);
  other.generator_hidden = {4};
  other.fake_hidden = {4};
  Trainer mismatched(other);
  EXPECT_THROW(mismatched.restore(decode_checkpoint(bytes)), CheckpointError);
}

TEST(Train, ZeroIterations) {
  auto c = small_config(Method::sgmd);
  c.iterations = 0;
  const auto dir = fresh_dir("zero");
  const auto result = train(c, dir);
  EXPECT_TRUE(result.log.empty());
  ASSERT_EQ(result.checkpoint_files.size(), 1u);
  EXPECT_EQ(result.checkpoint_files[0].filename(), "ckpt_000000.bin");
  std::ifstream f(dir / "train_log.csv");
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, std::string(TrainLog::kHeader) + "\n");
  EXPECT_TRUE(std::isfinite(result.final_energy_distance));
}

TEST(Train, DeterministicAndCheckpointed) {
  auto c = small_config(Method::dmd2);
  c.iterations = 6;
  c.checkpoint_every = 4;
  c.snapshot_every = 3;
  const auto r1 = train(c, fresh_dir("det1"));
  const auto r2 = train(c, fresh_dir("det2"));
  EXPECT_EQ(r1.log.to_csv(), r2.log.to_csv());
  EXPECT_EQ(r1.final_energy_distance, r2.final_energy_distance);
  ASSERT_EQ(r1.log.size(), 6u);
  EXPECT_FALSE(r1.log.rows()[1].energy_distance.has_value());
  EXPECT_TRUE(r1.log.rows()[2].energy_distance.has_value());
  std::vector<std::string> names;
  for (const auto& p : r1.checkpoint_files) names.push_back(p.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"ckpt_000000.bin", "ckpt_000004.bin", "ckpt_000006.bin"}));
  EXPECT_EQ(read_checkpoint(r1.checkpoint_files.back()).iteration, 6u);

  c.seed = 6;
  EXPECT_NE(train(c).log.to_csv(), r1.log.to_csv());
}
