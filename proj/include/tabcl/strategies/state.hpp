#ifndef TABCL_STRATEGIES_STATE_HPP
#define TABCL_STRATEGIES_STATE_HPP

#include "tabcl/rng.hpp"
#include "tabcl/types.hpp"

#include <string>
#include <vector>

namespace tabcl {

enum class StrategyKind {
  none,
  joint,
  pjr,
  ewc,
  ewc_online,
  si,
  lwf,
  gr,
  gr_distill,
  rtf,
  bir,
  er,
  agem,
  icarl,
};

std::string to_string(StrategyKind k);
// Accepts "pjr" as well as "pjr:<fraction>"; the fraction is returned
// separately when present.
StrategyKind strategy_kind_from_string(const std::string& s, Scalar* pjr_fraction = nullptr);

// Quadratic-anchor state for the original formulation: one (snapshot, Fisher
// diagonal) pair per completed task, so storage grows with the task count.
struct EWCAnchor {
  Vec theta_star;
  Vec fisher;
};

struct EWCState {
  std::vector<EWCAnchor> anchors;
  Scalar lambda = 100.0;
};

// O(1)-in-tasks variant: a single anchor plus a running Fisher sum.
struct OnlineEWCState {
  Vec theta_star;
  Vec fisher_running;
  Scalar gamma = 1.0; // decay of the running sum
  Scalar lambda = 100.0;
  bool has_anchor = false;
};

// Path-integral importance state.
struct SIState {
  Vec path_accumulator;  // omega: running sum of -grad * delta_theta
  Vec importance;        // consolidated Omega
  Vec theta_anchor;      // parameters at the end of the last task
  Vec theta_task_start;  // parameters at the start of the current task
  Scalar xi = 0.1;       // damping
  Scalar c = 0.1;        // regularization strength
  bool initialized = false;

  void ensure_size(Index n);
};

// Fixed-capacity reservoir over dataset row indices; every stream element
// ends up stored with equal probability.
class ReservoirBuffer {
 public:
  explicit ReservoirBuffer(Index capacity) : capacity_(capacity) {}

  Index capacity() const { return capacity_; }
  Index size() const { return static_cast<Index>(items_.size()); }
  long long seen() const { return seen_; }
  const IndexList& items() const { return items_; }

  void insert(Index dataset_index, Rng& rng);
  // n distinct stored indices (fewer if the buffer is smaller).
  IndexList draw(Index n, Rng& rng) const;

 private:
  Index capacity_;
  IndexList items_;
  long long seen_ = 0;
};

// All retained past training samples, grouped by task.
struct PJRStore {
  std::vector<IndexList> per_task;
  Scalar fraction = 0.2;

  Index total() const;
  IndexList all() const;
};

// Uniform sample without replacement of floor(fraction * |past|) indices,
// re-drawn for every task.
IndexList pjr_sample(const PJRStore& store, Scalar fraction, std::uint64_t seed);

struct LwFConfig {
  Scalar lambda0 = 1.0; // balance between the new-task and distillation terms
  Scalar temperature = 2.0;

  void validate() const;
};

} // namespace tabcl

#endif
