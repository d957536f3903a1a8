#pragma once

#include "pngnn/diff/tape.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pngnn::diff {

// Differentiable operations on 2-D values. Broadcasting is limited to a 1xN
// right-hand side repeated over the rows of the left-hand side.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var sqrt_eps(Var a, double eps);

// Full reductions to a 1x1 value.
Var sum(Var a);
Var mean(Var a);
Var max(Var a); // gradient goes to the first maximal element only

Var gather_rows(Var a, std::span<const std::size_t> index);
// Gathers from `primary` for index >= 0 and from `fallback` row (-index - 1)
// otherwise.
Var gather_rows_split(Var primary, Var fallback, std::span<const std::int64_t> index);
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows);

enum class Reduce { kSum, kMean, kMax, kMin };

// Rows of `a` are grouped into consecutive segments delimited by `offsets`
// (size segments + 1). Empty segments produce zero rows. Max/min route the
// gradient to the first extremal row per column.
Var segment_reduce(Var a, std::span<const std::size_t> offsets, Reduce mode);

// Row-wise layer normalisation with learned per-column gain and bias (1xN).
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);

// Rotates consecutive coordinate pairs (2k, 2k+1) of each row of `a` by the
// angle angles(row, k).
Var rotate_pairs(Var a, Var angles);

const char* reduce_name(Reduce mode);
Reduce parse_reduce(const std::string& name);

} // namespace pngnn::diff
