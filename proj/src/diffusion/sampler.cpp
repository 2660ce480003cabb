#include "dlab/diffusion/sampler.hpp"

#include <stdexcept>

#include "dlab/autodiff/ops.hpp"
#include "dlab/diffusion/schedule.hpp"

namespace dlab::diffusion {

ad::Value euler_sample(const XPredictor& generator, std::span<const double> ladder, const ad::Value& z,
                       std::optional<std::size_t> grad_step) {
  validate_ladder(ladder, "euler_sample");
  if (grad_step && *grad_step >= ladder.size()) {
    throw std::invalid_argument("euler_sample: grad_step beyond ladder length");
  }
  ad::Value x = z;
  ad::Value x0_hat;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double t = ladder[i];
    x0_hat = generator.predict(x, t);
    if (grad_step) {
      if (*grad_step == i) break;
      x0_hat = ad::stop_gradient(x0_hat);
    }
    if (i + 1 == ladder.size()) break;
    const double t_next = ladder[i + 1];
    auto eps_hat = ad::scale(ad::sub(x, ad::scale(x0_hat, alpha(t))), 1.0 / sigma(t));
    x = ad::add(ad::scale(x0_hat, alpha(t_next)), ad::scale(eps_hat, sigma(t_next)));
  }
  return x0_hat;
}

}  // namespace dlab::diffusion
