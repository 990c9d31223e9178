#pragma once

#include <array>

#include "cwlate/inference.hpp"

namespace cwlate {

struct BandwidthReport {
    double c_n = 0.0;                       // rule-of-thumb pilot
    std::array<double, 4> d_n{};            // derivative pilots: Y+, Y-, X+, X-
    double b_n = 0.0;                       // bias-estimation bandwidth
    double h_n = 0.0;                       // main bandwidth
    double v_bc = 0.0;                      // variance constant behind b_n
    double b_bc = 0.0;                      // bias constant behind b_n
    double v_main = 0.0;                    // variance constant behind h_n
    double bias_main = 0.0;                 // bias constant behind h_n
    double lower_clamp = 0.0;
    double upper_clamp = 0.0;
    bool zero_bias_b = false;               // b_n clamped because the bias vanished
    bool zero_bias_h = false;
};

// Step 1 rule of thumb: C_K * min(sd, IQR/1.349) * n^{-1/5}.
double pilot_bandwidth(const std::vector<double>& z, const KernelSpec& kernel);
double pilot_constant(const KernelSpec& kernel);  // 1.843 uniform, 2.576 triangular

// Smallest bandwidth keeping min_side_count points strictly inside the kernel
// window in every retained cell on both sides; and the sample range of z.
std::pair<double, double> bandwidth_clamps(const RddDataset& data, const CellPartition& part,
                                           std::size_t min_side_count);

struct BiasBandwidth {
    double b_n = 0.0;
    std::array<double, 4> d_n{};
    double v_bc = 0.0;
    double b_bc = 0.0;
    bool zero_bias = false;
};

// Step 2: MSE-optimal bandwidth for the bias estimate, rate n^{-1/7}, with
// inner n^{-1/9} pilots for the third derivatives of each variable/side.
BiasBandwidth bias_bandwidth(const RddDataset& data, const CellPartition& part,
                             const LinearizationCoeffs& coeffs, double c_n,
                             const KernelSpec& kernel, double lower, double upper);

struct MainBandwidth {
    double h_n = 0.0;
    double v_main = 0.0;
    double bias_main = 0.0;
    bool zero_bias = false;
};

// Step 3: MSE-optimal main bandwidth, rate n^{-1/5}.
MainBandwidth main_bandwidth(const RddDataset& data, const CellPartition& part,
                             const LinearizationCoeffs& coeffs, double c_n, double b_n,
                             const KernelSpec& kernel, double lower, double upper);

// Full pipeline for one estimand: pilot, linearization at the pilot, Step 2,
// Step 3, all clamped to feasible bandwidths.
BandwidthReport select_bandwidths(const RddDataset& data, const CellPartition& part,
                                  const EstimandSpec& spec, const KernelSpec& kernel,
                                  std::size_t min_side_count = 5);

}  // namespace cwlate
