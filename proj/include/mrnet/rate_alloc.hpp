#pragma once

// Fairness-optimal rate allocations under the per-node resource constraint
// sum_l l * lambda(l) = theta, and a small solver for allocations with a prescribed
// workload bias.

#include "mrnet/sd_distance.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

namespace mrnet {

enum class FairnessCriterion { kProportional, kMaxMin, kCustom };

struct FairnessResult {
    RateAllocation allocation;
    double network_throughput = 0.0;  ///< lambda, exact
    double workload_bias = 0.0;       ///< u, exact
    FairnessCriterion criterion = FairnessCriterion::kCustom;
    /// Logarithmic approximations quoted alongside the exact values, where one exists.
    std::optional<double> approx_throughput;
    std::optional<double> approx_workload_bias;
};

/// u = (sum l^2 lambda(l) * sum lambda(l) + theta * sum lambda(l)) / (2 theta^2),
/// with theta = sum l lambda(l). Throws DegenerateAllocationError on a zero allocation.
double workload_bias_from_rates(std::span<const double> rates);

/// lambda(l) = theta / (l phi). Approximations: theta ln(phi) / phi and ln(phi) / 4.
FairnessResult proportional_allocation(double theta, int phi);

/// lambda(l) = 2 theta / (phi (phi + 1)); u = (2 phi + 4) / (3 phi + 3), approximated by 2/3.
FairnessResult maxmin_allocation(double theta, int phi);

/// Exact u of the proportional allocation, H_phi (phi + 3) / (4 phi).
double proportional_workload_bias(int phi);
/// (2 phi + 4) / (3 phi + 3).
double maxmin_workload_bias(int phi);

using AllocationObjective = std::function<double(std::span<const double> rates)>;

namespace objectives {
/// sum_l log lambda(l); -inf when any class is starved.
AllocationObjective log_sum();
/// sum_l lambda(l).
AllocationObjective total_rate();
}  // namespace objectives

struct QosOptions {
    int starts = 12;
    std::uint64_t seed = 0x5eed;
    double feasibility_tol = 1e-9;  ///< relative residual accepted as feasible
};

struct QosResult {
    FairnessResult result;  ///< best feasible point, or the closest point when infeasible
    bool feasible = false;
    double objective = 0.0;
    double resource_residual = 0.0;  ///< |sum l lambda(l) - theta| / theta
    double bias_residual = 0.0;      ///< relative violation of the workload-bias equality
};

/// Maximizes `objective` over allocations meeting both the resource constraint and the
/// workload-bias equality. Penalty method over the simplex of airtime shares
/// l lambda(l) / theta with pairwise coordinate moves from fixed-seed starts, followed
/// by Newton restoration onto the constraint. Supports phi <= 20.
/// Throws std::invalid_argument unless theta > 0, 1 <= phi <= 20 and u_target > 1/2.
QosResult optimize_with_qos(const AllocationObjective& objective, double theta, double u_target,
                            int phi, const QosOptions& options = {});

}  // namespace mrnet
