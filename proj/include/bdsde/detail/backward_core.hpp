#pragma once

#include <span>

#include "bdsde/backward.hpp"

namespace bdsde {

struct TruncationLedger;

namespace detail {

// Hook for observing the pooled estimates of every provider call; used by
// the regression error probe to compare two providers on identical inputs.
struct StepObserver {
  virtual ~StepObserver() = default;
  virtual void on_estimates(const CondExpRequest& req, std::span<const double> estimates) = 0;
};

// Single backward-induction engine. With a null ledger this is the plain
// scheme; with a ledger the fitted values pass through the J/R clamps and
// the committed Y through the P clamp.
BackwardGrid backward_core(const ProblemSpec& spec, const ForwardEnsemble& forward,
                           const NoiseGrid& noise, const CondExpProvider& provider,
                           const SweepOptions& opts, const TruncationLedger* ledger,
                           StepObserver* observer);

}  // namespace detail
}  // namespace bdsde
