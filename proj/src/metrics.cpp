#include "omnivdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ovd {

std::string MetricReport::to_line() const {
  std::ostringstream os;
  os << "absrel=" << absrel << " delta1=" << delta1 << " miou=" << miou << " edge_f1=" << edge_f1
     << " psnr=" << psnr << " n_samples=" << n_samples;
  return os.str();
}

DepthAlignment align_depth(const std::vector<float>& pred, const std::vector<float>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("align_depth: shape mismatch");
  double n = static_cast<double>(pred.size());
  double sp = 0, sg = 0, spp = 0, spg = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    sp += pred[i];
    sg += gt[i];
    spp += static_cast<double>(pred[i]) * pred[i];
    spg += static_cast<double>(pred[i]) * gt[i];
  }
  double var = spp - sp * sp / n;
  if (var <= 1e-12) return {0.0, sg / n};
  double a = (spg - sp * sg / n) / var;
  double b = (sg - a * sp) / n;
  return {a, b};
}

void depth_metrics(const std::vector<float>& pred, const std::vector<float>& gt, double& absrel,
                   double& delta1, bool align) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("depth_metrics: shape mismatch");
  DepthAlignment al = align ? align_depth(pred, gt) : DepthAlignment{1.0, 0.0};
  double sum_rel = 0.0;
  int64_t good = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = std::max(al.scale * pred[i] + al.shift, 1e-3);
    double g = gt[i];
    if (g <= 0) throw std::invalid_argument("depth_metrics: gt must be > 0");
    sum_rel += std::abs(d - g) / g;
    if (std::max(d / g, g / d) < 1.25) ++good;
  }
  absrel = sum_rel / static_cast<double>(pred.size());
  delta1 = static_cast<double>(good) / static_cast<double>(pred.size());
}

double seg_miou(const std::vector<uint8_t>& pred_ids, const std::vector<uint8_t>& gt_ids) {
  if (pred_ids.size() != gt_ids.size()) throw std::invalid_argument("seg_miou: shape mismatch");
  std::set<uint8_t> gts, preds;
  for (uint8_t g : gt_ids)
    if (g) gts.insert(g);
  for (uint8_t p : pred_ids)
    if (p) preds.insert(p);
  if (gts.empty()) return 1.0;  // nothing to match

  struct Pair {
    double iou;
    uint8_t g, p;
  };
  std::vector<Pair> pairs;
  for (uint8_t g : gts)
    for (uint8_t p : preds) {
      int64_t inter = 0, uni = 0;
      for (size_t i = 0; i < gt_ids.size(); ++i) {
        bool ig = gt_ids[i] == g, ip = pred_ids[i] == p;
        if (ig && ip) ++inter;
        if (ig || ip) ++uni;
      }
      pairs.push_back({uni ? static_cast<double>(inter) / uni : 0.0, g, p});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });
  std::set<uint8_t> used_g, used_p;
  double total = 0.0;
  for (const Pair& pr : pairs) {
    if (used_g.count(pr.g) || used_p.count(pr.p)) continue;
    used_g.insert(pr.g);
    used_p.insert(pr.p);
    total += pr.iou;
  }
  return total / static_cast<double>(gts.size());
}

double edge_f1(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt, int64_t frames,
               int64_t height, int64_t width, int64_t tol) {
  if (pred.size() != gt.size() || static_cast<int64_t>(pred.size()) != frames * height * width)
    throw std::invalid_argument("edge_f1: shape mismatch");
  auto count_matched = [&](const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    // a-pixels that have a b-pixel within Chebyshev distance tol, same frame.
    int64_t total = 0, matched = 0;
    for (int64_t f = 0; f < frames; ++f)
      for (int64_t y = 0; y < height; ++y)
        for (int64_t x = 0; x < width; ++x) {
          if (!a[(f * height + y) * width + x]) continue;
          ++total;
          bool hit = false;
          for (int64_t dy = -tol; dy <= tol && !hit; ++dy)
            for (int64_t dx = -tol; dx <= tol && !hit; ++dx) {
              int64_t ny = y + dy, nx = x + dx;
              if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
              if (b[(f * height + ny) * width + nx]) hit = true;
            }
          if (hit) ++matched;
        }
    return std::pair<int64_t, int64_t>(matched, total);
  };
  auto [tp_p, n_p] = count_matched(pred, gt);
  auto [tp_g, n_g] = count_matched(gt, pred);
  if (n_p == 0 && n_g == 0) return 1.0;
  if (n_p == 0 || n_g == 0) return 0.0;
  double precision = static_cast<double>(tp_p) / n_p;
  double recall = static_cast<double>(tp_g) / n_g;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double psnr(const std::vector<float>& pred, const std::vector<float>& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = static_cast<double>(pred[i]) - gt[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace ovd
