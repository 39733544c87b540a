#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bbnas/autodiff/tensor.hpp"

namespace bbnas::ad {

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
// Rows [begin, end) along axis 0.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
// Row r of a rank-2 tensor, as a rank-1 tensor.
Tensor select_row(const Tensor& a, std::size_t row);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softmax(const Tensor& a, std::size_t axis);

// x[N,D] * W[F,D]^T + b[F]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// sum_k weights[k] * terms[k]; weights is rank-1 of length terms.size().
Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights);

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
    std::size_t groups = 1;
};

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding, std::size_t dilation = 1);

// input[N,C,H,W], filters[F,C/groups,K,K], bias[F] (optional).
Tensor conv2d(const Tensor& input, const Tensor& filters, const std::optional<Tensor>& bias,
              const Conv2dOptions& opts = {});

// Non-overlapping P x P pooling; P must divide H and W.
Tensor max_pool2d(const Tensor& input, std::size_t window);
Tensor avg_pool2d(const Tensor& input, std::size_t window);

// Windowed pooling with stride and padding. Padded cells never win the max
// and are excluded from the average count.
Tensor max_pool(const Tensor& input, std::size_t kernel, std::size_t stride,
                std::size_t padding);
Tensor avg_pool(const Tensor& input, std::size_t kernel, std::size_t stride,
                std::size_t padding);

// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& input);

// branch + x, or branch + conv1x1(x; projection, stride) when a projection
// filter bank [F,C,1,1] is given.
Tensor residual_add(const Tensor& branch, const Tensor& x,
                    const std::optional<Tensor>& projection = std::nullopt,
                    std::size_t stride = 1);

// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace bbnas::ad
