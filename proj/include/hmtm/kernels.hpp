#pragma once

// Data-parallel inner loops of the sampler and of degree correction.
//
// Every kernel exists twice: `serial` is the plain reference implementation
// kept for testing, `parallel` splits the outer loop over OpenMP threads. Each
// output element is produced by exactly one thread with the same summation
// order as the serial code, so both versions agree bitwise and a chain does
// not depend on the thread count. The unqualified `kernels::` functions
// forward to `parallel` when built with OpenMP and to `serial` otherwise.

#include "hmtm/net_tensor.hpp"

#include <span>
#include <vector>

namespace hmtm::kernels {

// Sum over i < j of (b_ij - beta - sum_r u_ir v_r u_jr)^2 for one layer.
double layer_ssr(const Matrix& layer, const Matrix& U, const Vector& v, double beta);
// Sum over i < j of (b_ij - sum_r u_ir v_r u_jr), the intercept left in.
double layer_residual_sum(const Matrix& layer, const Matrix& U, const Vector& v);

namespace serial {

// Fills the null model for every layer and writes B_t = Y_t - Omega_t.
void correct_layers(std::span<const Matrix> raw, NullModel& null_model, std::vector<Matrix>& out);

// T x M table: layer_ssr of layer t under U[m] and row t of V.
Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta);

// Per-layer SSR under U[states[t]].
Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta);

// N x R: L[i,r] = sum_{t in idx} w_t v_tr sum_{j != i} (b_ijt - beta) u_jr.
Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta);

// |idx| x R: L[k,r] = sum_{i<j} (b_ij - beta) u_ir u_jr for layer idx[k].
Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta);

}  // namespace serial

namespace parallel {

void correct_layers(std::span<const Matrix> raw, NullModel& null_model, std::vector<Matrix>& out);
Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta);
Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta);
Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta);
Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta);

}  // namespace parallel

void correct_layers(std::span<const Matrix> raw, NullModel& null_model, std::vector<Matrix>& out);
Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta);
Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta);
Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta);
Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta);

// Threads available to the parallel kernels (1 without OpenMP).
int max_threads();

}  // namespace hmtm::kernels
