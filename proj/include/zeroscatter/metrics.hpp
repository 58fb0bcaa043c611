#pragma once

#include "zeroscatter/image.hpp"

namespace zs {

/// 10*log10(1/MSE) over all channels of unit-interval images, capped (zero
/// MSE included) at `cap` dB.
double psnr(const Tensor& a, const Tensor& b, double cap = 99.0);
double psnr(const Image& a, const Image& b, double cap = 99.0);

/// Mean local SSIM on luminance: 11x11 Gaussian window (sigma 1.5), C1 =
/// 0.01^2, C2 = 0.03^2 on the unit dynamic range. Windows are fully interior
/// (no padding), so inputs must be at least 11x11. Accepts 1- or 3-channel
/// single-sample tensors.
double ssim(const Tensor& a, const Tensor& b);
double ssim(const Image& a, const Image& b);

}  // namespace zs
