#ifndef TABCL_STRATEGIES_PENALTIES_HPP
#define TABCL_STRATEGIES_PENALTIES_HPP

#include "tabcl/model/mlp.hpp"
#include "tabcl/strategies/state.hpp"

namespace tabcl {

enum class FisherMode { empirical, model_sampled };
FisherMode fisher_mode_from_string(const std::string& s);

// Diagonal Fisher estimate: mean over samples of the squared gradient of
// log p(y|x) with respect to every parameter, evaluated in eval mode.
// model_sampled draws y from the model's own predictive distribution;
// empirical uses the provided labels.
Vec compute_fisher_diagonal(ClassifierModel& model, const Mat& x, const IntVec& y,
                            const ActiveUnitMask& mask, Index n_estimate,
                            FisherMode mode, Rng& rng);

// sum_t sum_i (lambda/2) * F_{t,i} * (theta_i - theta*_{t,i})^2
Scalar ewc_penalty(const Vec& theta, const EWCState& state);
Vec ewc_penalty_grad(const Vec& theta, const EWCState& state);

// fisher_running <- gamma * fisher_running + F_new; anchor <- theta_now
OnlineEWCState ewc_online_consolidate(OnlineEWCState state, const Vec& fisher_new,
                                      const Vec& theta_now);
// sum_i lambda * F~_i * (theta_i - theta*_i)^2  (single latest anchor)
Scalar ewc_online_penalty(const Vec& theta, const OnlineEWCState& state);
Vec ewc_online_penalty_grad(const Vec& theta, const OnlineEWCState& state);

// omega accumulates -grad . delta_theta elementwise, every optimizer step.
SIState si_track(SIState state, const Vec& grad, const Vec& delta_theta);
// Omega += omega / ((theta_end - theta_start)^2 + xi); omega resets.
SIState si_consolidate(SIState state, const Vec& theta_end);
// c * sum_k Omega_k * (theta_k - theta_anchor_k)^2
Scalar si_penalty(const Vec& theta, const SIState& state);
Vec si_penalty_grad(const Vec& theta, const SIState& state);

// g when g.g_ref >= 0, otherwise g projected onto the half-space where the
// reference gradient is not increased: g - (g.g_ref / g_ref.g_ref) g_ref.
Vec agem_project(const Vec& g, const Vec& g_ref);

} // namespace tabcl

#endif
