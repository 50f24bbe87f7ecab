#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lbsim/async_engine.hpp"

namespace lbsim::detail {

/// Shared delivery-order policy over directed-edge work queues. The selfstab
/// executor feeds it the same candidate sequences as the async engine so a
/// fault-free run makes identical decisions. Fairness: when the oldest head
/// reaches the age cap it is delivered first regardless of policy.
class WorkScheduler {
public:
    explicit WorkScheduler(const Schedule& schedule) : policy_(schedule.policy), rng_(schedule.seed) {}

    /// candidates: ascending edge ids with nonempty queues. head_steps and
    /// sizes align with candidates. Returns the position within candidates.
    std::size_t pick(const std::vector<std::size_t>& candidates, const std::vector<std::int64_t>& head_steps,
                     const std::vector<std::size_t>& sizes, std::int64_t now, std::int64_t age_cap) {
        std::size_t oldest = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (head_steps[i] < head_steps[oldest]) {
                oldest = i;
            }
        }
        if (now - head_steps[oldest] >= age_cap) {
            return oldest;
        }
        switch (policy_) {
            case SchedulePolicy::RoundRobinFair: {
                for (std::size_t i = 0; i < candidates.size(); ++i) {
                    if (candidates[i] > cursor_) {
                        cursor_ = candidates[i];
                        return i;
                    }
                }
                cursor_ = candidates[0];
                return 0;
            }
            case SchedulePolicy::RandomFair:
                return static_cast<std::size_t>(rng_() % candidates.size());
            case SchedulePolicy::AdversarialLongestQueue: {
                std::size_t best = 0;
                for (std::size_t i = 1; i < candidates.size(); ++i) {
                    if (sizes[i] > sizes[best]) {
                        best = i;
                    }
                }
                return best;
            }
        }
        return 0;
    }

private:
    SchedulePolicy policy_;
    std::mt19937_64 rng_;
    std::size_t cursor_ = static_cast<std::size_t>(-1);
};

}  // namespace lbsim::detail
