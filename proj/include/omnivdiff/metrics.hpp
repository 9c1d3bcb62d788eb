#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovd {

struct MetricReport {
  double absrel = 0.0;
  double delta1 = 0.0;
  double miou = 0.0;
  double edge_f1 = 0.0;
  double psnr = 0.0;  // dB; +inf when MSE is exactly 0
  int64_t n_samples = 0;

  std::string to_line() const;
};

struct DepthAlignment {
  double scale = 0.0, shift = 0.0;
};

// Closed-form least squares of a*pred + b against gt. Constant pred
// degenerates to a=0, b=mean(gt).
DepthAlignment align_depth(const std::vector<float>& pred, const std::vector<float>& gt);

// AbsRel and delta1 (ratio threshold 1.25) after affine alignment; aligned
// values are clamped to >= 1e-3. `align` is a test hook for the raw formulas.
void depth_metrics(const std::vector<float>& pred, const std::vector<float>& gt, double& absrel,
                   double& delta1, bool align = true);

// Mean best-match IoU over gt instances (id > 0), oracle greedy matching by
// descending IoU without predicted-id reuse; background excluded.
double seg_miou(const std::vector<uint8_t>& pred_ids, const std::vector<uint8_t>& gt_ids);

// F1 with 1 px Chebyshev tolerance inside each frame. Both maps empty -> 1,
// exactly one empty -> 0.
double edge_f1(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt, int64_t frames,
               int64_t height, int64_t width, int64_t tol = 1);

// 10*log10(1/MSE) for values in [0,1].
double psnr(const std::vector<float>& pred, const std::vector<float>& gt);

}  // namespace ovd
