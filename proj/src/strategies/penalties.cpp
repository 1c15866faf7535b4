#include "tabcl/strategies/penalties.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <algorithm>

namespace tabcl {

FisherMode fisher_mode_from_string(const std::string& s) {
  if (s == "empirical") return FisherMode::empirical;
  if (s == "model_sampled") return FisherMode::model_sampled;
  throw ConfigError("unknown fisher mode '" + s + "'");
}

Vec compute_fisher_diagonal(ClassifierModel& model, const Mat& x, const IntVec& y,
                            const ActiveUnitMask& mask, Index n_estimate,
                            FisherMode mode, Rng& rng) {
  if (x.rows() == 0) throw ConfigError("fisher estimate: empty sample set");
  if (mode == FisherMode::empirical && y.size() != x.rows())
    throw DimensionError("fisher estimate: label count mismatch");
  mask.validate(model.n_output_units());

  IndexList order(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const Index n_used = std::min<Index>(n_estimate, x.rows());

  Vec fisher = Vec::Zero(model.n_params());
  for (Index k = 0; k < n_used; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    const Mat xi = x.row(i);
    model.zero_grad();
    const Mat logits = model.forward(xi, false, nullptr);
    const Mat active = select_columns(logits, mask.active);
    const Mat probs = softmax_rows(active);

    int local;
    if (mode == FisherMode::model_sampled) {
      const Scalar u = rng.uniform01();
      Scalar acc = 0.0;
      local = static_cast<int>(mask.active.size()) - 1;
      for (Index j = 0; j < probs.cols(); ++j) {
        acc += probs(0, j);
        if (u < acc) { local = static_cast<int>(j); break; }
      }
    } else {
      local = -1;
      for (std::size_t j = 0; j < mask.active.size(); ++j)
        if (mask.active[j] == y[i]) { local = static_cast<int>(j); break; }
      if (local < 0) throw DimensionError("fisher estimate: label outside mask");
    }

    // d log p(y|x) / d logits over the active set
    Mat d_active = -probs;
    d_active(0, local) += 1.0;
    Mat d_full = Mat::Zero(1, logits.cols());
    for (std::size_t j = 0; j < mask.active.size(); ++j)
      d_full.col(mask.active[j]) = d_active.col(static_cast<Index>(j));
    model.backward_from_logits(d_full);
    fisher += model.flat_grads().array().square().matrix();
  }
  model.zero_grad();
  return fisher / static_cast<Scalar>(n_used);
}

Scalar ewc_penalty(const Vec& theta, const EWCState& state) {
  Scalar penalty = 0.0;
  for (const auto& anchor : state.anchors) {
    if (anchor.theta_star.size() != theta.size())
      throw DimensionError("ewc penalty: anchor length mismatch");
    penalty += 0.5 * state.lambda *
               (anchor.fisher.array() *
                (theta - anchor.theta_star).array().square())
                   .sum();
  }
  return penalty;
}

Vec ewc_penalty_grad(const Vec& theta, const EWCState& state) {
  Vec grad = Vec::Zero(theta.size());
  for (const auto& anchor : state.anchors) {
    if (anchor.theta_star.size() != theta.size())
      throw DimensionError("ewc penalty: anchor length mismatch");
    grad += (state.lambda * anchor.fisher.array() *
             (theta - anchor.theta_star).array())
                .matrix();
  }
  return grad;
}

OnlineEWCState ewc_online_consolidate(OnlineEWCState state, const Vec& fisher_new,
                                      const Vec& theta_now) {
  if (state.has_anchor && state.fisher_running.size() != fisher_new.size())
    throw DimensionError("ewc online: fisher length mismatch");
  if (state.has_anchor)
    state.fisher_running = state.gamma * state.fisher_running + fisher_new;
  else
    state.fisher_running = fisher_new;
  state.theta_star = theta_now;
  state.has_anchor = true;
  return state;
}

Scalar ewc_online_penalty(const Vec& theta, const OnlineEWCState& state) {
  if (!state.has_anchor) return 0.0;
  if (state.theta_star.size() != theta.size())
    throw DimensionError("ewc online penalty: length mismatch");
  return state.lambda * (state.fisher_running.array() *
                         (theta - state.theta_star).array().square())
                            .sum();
}

Vec ewc_online_penalty_grad(const Vec& theta, const OnlineEWCState& state) {
  if (!state.has_anchor) return Vec::Zero(theta.size());
  return (2.0 * state.lambda * state.fisher_running.array() *
          (theta - state.theta_star).array())
      .matrix();
}

void SIState::ensure_size(Index n) {
  if (!initialized) {
    path_accumulator = Vec::Zero(n);
    importance = Vec::Zero(n);
    theta_anchor = Vec::Zero(n);
    theta_task_start = Vec::Zero(n);
    initialized = true;
  } else if (path_accumulator.size() != n) {
    throw DimensionError("si state: parameter count changed");
  }
}

SIState si_track(SIState state, const Vec& grad, const Vec& delta_theta) {
  if (grad.size() != delta_theta.size())
    throw DimensionError("si_track: length mismatch");
  state.ensure_size(grad.size());
  state.path_accumulator -= (grad.array() * delta_theta.array()).matrix();
  return state;
}

SIState si_consolidate(SIState state, const Vec& theta_end) {
  state.ensure_size(theta_end.size());
  const Vec moved = theta_end - state.theta_task_start;
  state.importance +=
      (state.path_accumulator.array() / (moved.array().square() + state.xi)).matrix();
  state.path_accumulator.setZero();
  state.theta_anchor = theta_end;
  state.theta_task_start = theta_end;
  return state;
}

Scalar si_penalty(const Vec& theta, const SIState& state) {
  if (!state.initialized) return 0.0;
  if (state.theta_anchor.size() != theta.size())
    throw DimensionError("si penalty: length mismatch");
  return state.c *
         (state.importance.array() * (theta - state.theta_anchor).array().square()).sum();
}

Vec si_penalty_grad(const Vec& theta, const SIState& state) {
  if (!state.initialized) return Vec::Zero(theta.size());
  return (2.0 * state.c * state.importance.array() *
          (theta - state.theta_anchor).array())
      .matrix();
}

Vec agem_project(const Vec& g, const Vec& g_ref) {
  if (g.size() != g_ref.size()) throw DimensionError("agem_project: length mismatch");
  const Scalar ref_sq = g_ref.squaredNorm();
  if (ref_sq == 0.0) return g;
  const Scalar dot = g.dot(g_ref);
  if (dot >= 0.0) return g;
  return g - (dot / ref_sq) * g_ref;
}

} // namespace tabcl
