#include "dlab/trainers/trainer.hpp"

#include <cmath>
#include <string>

#include "dlab/autodiff/ops.hpp"
#include "dlab/diffusion/sampler.hpp"

namespace dlab::trainers {
namespace {

constexpr std::uint64_t kSurrogateStream = 0x50a2a7e;
constexpr std::uint64_t kInitStream = 0x1417;

ad::AdamOptions adam_options(const TrainerConfig& c, double lr) { return {lr, c.adam_beta1, c.adam_beta2, 1e-8}; }

double row_norm_mean(const ad::Value& v) {
  const std::size_t rows = v.rows(), cols = v.cols();
  double acc = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += v.data()[i * cols + j] * v.data()[i * cols + j];
    acc += std::sqrt(s);
  }
  return acc / static_cast<double>(rows);
}

void add_tensors(Checkpoint& ckpt, const std::string& prefix, const std::vector<ad::Value>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.push_back(
        {prefix + "." + std::to_string(i), params[i].shape(), {params[i].data().begin(), params[i].data().end()}});
  }
}

void add_moments(Checkpoint& ckpt, const std::string& prefix, const ad::Adam& opt) {
  const auto& params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.push_back({prefix + ".adam_m." + std::to_string(i), params[i].shape(), opt.first_moments()[i]});
    ckpt.tensors.push_back({prefix + ".adam_v." + std::to_string(i), params[i].shape(), opt.second_moments()[i]});
  }
}

const NamedTensor& matching(const Checkpoint& ckpt, const std::string& name, const ad::Value& like) {
  const auto& t = ckpt.tensor(name);
  if (t.shape != like.shape()) {
    throw CheckpointError("tensor '" + name + "' has shape " + ad::shape_string(t.shape) + ", expected " +
                          ad::shape_string(like.shape()));
  }
  return t;
}

void load_into(const Checkpoint& ckpt, const std::string& prefix, std::vector<ad::Value> params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = matching(ckpt, prefix + "." + std::to_string(i), params[i]);
    auto dst = params[i].mutable_data();
    std::copy(t.data.begin(), t.data.end(), dst.begin());
  }
}

void load_moments(const Checkpoint& ckpt, const std::string& prefix, ad::Adam& opt) {
  const auto& params = opt.parameters();
  std::vector<std::vector<double>> m, v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m.push_back(matching(ckpt, prefix + ".adam_m." + std::to_string(i), params[i]).data);
    v.push_back(matching(ckpt, prefix + ".adam_v." + std::to_string(i), params[i]).data);
  }
  const auto it = ckpt.meta.find(prefix + "_adam_steps");
  if (it == ckpt.meta.end()) throw CheckpointError("checkpoint lacks " + prefix + "_adam_steps");
  opt.restore(std::stoll(it->second), std::move(m), std::move(v));
}

std::unique_ptr<diffusion::XPredictor> validated(const TrainerConfig& config,
                                                 std::unique_ptr<diffusion::XPredictor> net) {
  config.validate();
  if (!net) throw std::invalid_argument("trainer: null network");
  return net;
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::size_t it, const std::string& what)
    : std::runtime_error("training diverged at iteration " + std::to_string(it) + ": " + what), iteration(it) {}

std::unique_ptr<diffusion::MlpPredictor> pretrain_surrogate(const TrainerConfig& config,
                                                            const teachers::AnalyticTeacher& teacher,
                                                            const std::vector<std::size_t>& hidden) {
  const std::size_t dim = teacher.dim();
  RngStream rng = RngStream(config.seed).split(kSurrogateStream);
  RngStream init = RngStream(config.seed).split(kInitStream);
  auto net = std::make_unique<diffusion::MlpPredictor>(dim, hidden, init);
  std::vector<double> levels = config.sampling_ladder;
  levels.insert(levels.end(), config.train_timesteps.begin(), config.train_timesteps.end());
  ad::Adam opt(net->parameters(), {config.surrogate_lr, 0.9, 0.999, 1e-8});
  const std::size_t b = config.surrogate_batch;
  for (std::size_t step = 0; step < config.surrogate_steps; ++step) {
    const double t = levels[rng.index(levels.size())];
    const auto x0 = teachers::sample(teacher.density(), b, rng);
    const auto eps = rng.normal_vector(b * dim);
    const auto xt = diffusion::forward_noise(x0, t, eps, config.t_min);
    auto target = ad::Value::constant(teacher.xpred(xt, t), {b, dim});
    auto pred = net->predict(ad::Value::constant(xt, {b, dim}), t);
    auto loss = ad::scale(ad::squared_norm(ad::sub(pred, target)), 1.0 / static_cast<double>(b));
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
  }
  return net;
}

Trainer::Trainer(TrainerConfig config)
    : Trainer(config, nullptr, nullptr) {}

Trainer::Trainer(TrainerConfig config, std::unique_ptr<diffusion::XPredictor> generator,
                 std::unique_ptr<diffusion::XPredictor> fake)
    : config_((config.validate(), std::move(config))),
      teacher_(config_.make_teacher()),
      generator_(generator ? validated(config_, std::move(generator))
                           : std::unique_ptr<diffusion::XPredictor>(
                                 pretrain_surrogate(config_, teacher_, config_.generator_hidden))),
      fake_(fake ? validated(config_, std::move(fake))
                 : (config_.fake_hidden == config_.generator_hidden
                        ? generator_->clone()
                        : std::unique_ptr<diffusion::XPredictor>(
                              pretrain_surrogate(config_, teacher_, config_.fake_hidden)))),
      gen_opt_(generator_->parameters(), adam_options(config_, config_.eta_theta)),
      fake_opt_(fake_->parameters(), adam_options(config_, config_.eta_psi)),
      base_rng_(config_.seed) {}

StepDraws Trainer::draws_for(std::size_t iteration) const {
  RngStream rng = base_rng_.split(iteration);
  StepDraws d;
  d.t = config_.train_timesteps[rng.index(config_.train_timesteps.size())];
  const std::size_t n = config_.batch_size * teacher_.dim();
  d.z = rng.normal_vector(n);
  d.eps = rng.normal_vector(n);
  if (config_.truncation == Truncation::last_step) d.grad_step = rng.index(config_.sampling_ladder.size());
  return d;
}

ad::Value Trainer::generate(const StepDraws& draws) const {
  auto z = ad::Value::constant(draws.z, {config_.batch_size, teacher_.dim()});
  return diffusion::euler_sample(*generator_, config_.sampling_ladder, z, draws.grad_step);
}

objectives::ScorePair Trainer::pair_for(const ad::Value& x0, double t, std::span<const double> eps) const {
  return objectives::make_pair(x0, t, eps, *fake_, teacher_, config_.t_min);
}

void Trainer::require_finite(double v, const char* what) const {
  if (!std::isfinite(v)) throw TrainingDiverged(iteration_, std::string("non-finite ") + what);
}

void Trainer::step_optimizer(ad::Adam& opt, Phase phase) {
  try {
    opt.step();
  } catch (const ad::NonFiniteGradient& e) {
    throw TrainingDiverged(iteration_, e.what());
  }
  if (hook_) hook_(phase);
}

void Trainer::update_generator(const ad::Value& loss) {
  require_finite(loss.item(), "generator loss");
  gen_opt_.zero_grad();
  ad::backward(loss, gen_opt_.parameters());
  step_optimizer(gen_opt_, Phase::generator_updated);
}

double Trainer::fake_regression_updates(const ad::Value& x0, int count) {
  const auto frozen = ad::stop_gradient(x0);
  RngStream iter_rng = base_rng_.split(iteration_);
  double total = 0.0;
  for (int k = 0; k < count; ++k) {
    RngStream rng = iter_rng.split(static_cast<std::uint64_t>(k) + 1);
    const double t = config_.train_timesteps[rng.index(config_.train_timesteps.size())];
    const auto eps = rng.normal_vector(frozen.size());
    auto pair = pair_for(frozen, t, eps);
    auto loss = objectives::fake_regression_loss(pair);
    require_finite(loss.item(), "fake-score loss");
    fake_opt_.zero_grad();
    ad::backward(loss, fake_opt_.parameters());
    step_optimizer(fake_opt_, Phase::fake_updated);
    total += loss.item();
  }
  return total / count;
}

StepRecord Trainer::finish(StepRecord record, const objectives::ScorePair& pair, std::size_t backward_before) {
  record.iteration = iteration_;
  record.t = pair.t;
  record.fisher_loss = objectives::fisher_loss(pair).item();
  record.r_norm_mean = row_norm_mean(pair.r);
  record.delta_norm_mean = row_norm_mean(pair.delta);
  record.backward_passes = ad::backward_call_count() - backward_before;
  ++iteration_;
  return record;
}

StepRecord Trainer::step() {
  switch (config_.method) {
    case Method::sgmd: return sgmd_step();
    case Method::dmd2: return dmd2_step(config_.resolved_fake_updates());
    case Method::tsg_fisher: return tsg_fisher_step(config_.resolved_fake_updates());
    case Method::tsg_sim: return tsg_sim_step();
    case Method::sid: return sid_step(config_.sid_alpha);
  }
  throw std::logic_error("unknown method");
}

StepRecord Trainer::sgmd_step() {
  const auto before = ad::backward_call_count();
  const auto draws = draws_for(iteration_);
  auto x0 = generate(draws);
  auto pair = pair_for(x0, draws.t, draws.eps);
  StepRecord record;

  // Generator: Fisher + lambda NR, psi frozen.
  auto outer = objectives::sgmd_outer_loss(pair, config_.lambda);
  update_generator(outer);
  record.generator_loss = outer.item();

  // Fake score: lambda RC on the same sample, theta frozen.
  auto inner_pair = pair_for(ad::stop_gradient(x0), draws.t, draws.eps);
  auto inner = objectives::sgmd_inner_loss(inner_pair, config_.lambda);
  require_finite(inner.item(), "fake-score loss");
  fake_opt_.zero_grad();
  ad::backward(inner, fake_opt_.parameters());
  step_optimizer(fake_opt_, Phase::fake_updated);
  record.fake_loss = inner.item();
  return finish(record, pair, before);
}

StepRecord Trainer::dmd2_step(int fake_updates) {
  if (fake_updates < 1) throw std::invalid_argument("dmd2_step: K must be >= 1");
  const auto before = ad::backward_call_count();
  const auto draws = draws_for(iteration_);
  auto x0 = generate(draws);
  auto pair = pair_for(x0, draws.t, draws.eps);
  StepRecord record;

  const auto seed = objectives::dmd_generator_grad(pair, config_.dmd_normalize);
  double surrogate = 0.0;  // <seed, x_t>: its gradient is the injected one
  for (std::size_t i = 0; i < seed.size(); ++i) surrogate += seed[i] * pair.xt.data()[i];
  require_finite(surrogate, "generator loss");
  gen_opt_.zero_grad();
  ad::backward_seeded(pair.xt, seed, gen_opt_.parameters());
  step_optimizer(gen_opt_, Phase::generator_updated);
  record.generator_loss = surrogate;
  record.fake_loss = fake_regression_updates(x0, fake_updates);
  return finish(record, pair, before);
}

StepRecord Trainer::tsg_fisher_step(int fake_updates) {
  if (fake_updates < 1) throw std::invalid_argument("tsg_fisher_step: K must be >= 1");
  const auto before = ad::backward_call_count();
  const auto draws = draws_for(iteration_);
  auto x0 = generate(draws);
  auto pair = pair_for(x0, draws.t, draws.eps);
  StepRecord record;
  auto loss = objectives::fisher_loss(pair);
  update_generator(loss);
  record.generator_loss = loss.item();
  record.fake_loss = fake_regression_updates(x0, fake_updates);
  return finish(record, pair, before);
}

StepRecord Trainer::tsg_sim_step() {
  const auto before = ad::backward_call_count();
  const auto draws = draws_for(iteration_);
  auto x0 = generate(draws);
  auto pair = pair_for(x0, draws.t, draws.eps);
  StepRecord record;
  auto loss = objectives::sim_loss(pair);
  update_generator(loss);
  record.generator_loss = loss.item();
  record.fake_loss = fake_regression_updates(x0, 1);
  return finish(record, pair, before);
}

StepRecord Trainer::sid_step(double alpha) {
  const auto before = ad::backward_call_count();
  const auto draws = draws_for(iteration_);
  auto x0 = generate(draws);
  auto pair = pair_for(x0, draws.t, draws.eps);
  StepRecord record;
  auto loss = objectives::sid_loss(pair, alpha);
  update_generator(loss);
  record.generator_loss = loss.item();
  record.fake_loss = fake_regression_updates(x0, 1);
  return finish(record, pair, before);
}

std::vector<double> Trainer::sample(std::size_t n, RngStream& rng) const {
  auto z = ad::Value::constant(rng.normal_vector(n * teacher_.dim()), {n, teacher_.dim()});
  auto x = diffusion::euler_sample(*generator_, config_.sampling_ladder, z);
  return {x.data().begin(), x.data().end()};
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.seed = config_.seed;
  ckpt.iteration = iteration_;
  ckpt.meta["method"] = std::string(to_string(config_.method));
  ckpt.meta["generator_adam_steps"] = std::to_string(gen_opt_.step_count());
  ckpt.meta["fake_adam_steps"] = std::to_string(fake_opt_.step_count());
  add_tensors(ckpt, "generator", generator_->parameters());
  add_tensors(ckpt, "fake", fake_->parameters());
  add_moments(ckpt, "generator", gen_opt_);
  add_moments(ckpt, "fake", fake_opt_);
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  load_into(ckpt, "generator", generator_->parameters());
  load_into(ckpt, "fake", fake_->parameters());
  load_moments(ckpt, "generator", gen_opt_);
  load_moments(ckpt, "fake", fake_opt_);
  iteration_ = ckpt.iteration;
}

}  // namespace dlab::trainers
