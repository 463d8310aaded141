#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vislog/raster.hpp"

namespace vislog::imaging {

/// Rec.601 luma.
inline Raster to_grayscale(const Raster& img) {
  if (img.channels() != 3) fail_invalid("to_grayscale expects a 3-channel raster");
  Raster out(img.width(), img.height(), 1);
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    dst[p] = 0.299 * src[3 * p] + 0.587 * src[3 * p + 1] + 0.114 * src[3 * p + 2];
  }
  return out;
}

/// Gray view of any raster; a copy for 1-channel input.
inline Raster gray(const Raster& img) {
  return img.channels() == 1 ? img : to_grayscale(img);
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with clamp-to-border replication.
inline Raster gaussian_blur(const Raster& img, double sigma) {
  if (img.channels() != 1) fail_invalid("gaussian_blur expects a 1-channel raster");
  if (!(sigma > 0.0 && sigma <= 10.0)) fail_invalid("gaussian sigma must be in (0, 10]");
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();

  Raster tmp(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img.clamped(x + i, y);
      tmp.at(x, y) = acc;
    }
  }
  Raster out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i);
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

struct Gradient {
  std::vector<double> magnitude;  // normalized to [0,1]
  std::vector<double> gx;
  std::vector<double> gy;
};

/// 3x3 Sobel with clamp-to-border; magnitude divided by the image maximum.
inline Gradient sobel(const Raster& img) {
  const int w = img.width();
  const int h = img.height();
  Gradient g;
  g.magnitude.assign(img.pixel_count(), 0.0);
  g.gx.assign(img.pixel_count(), 0.0);
  g.gy.assign(img.pixel_count(), 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = img.clamped(x - 1, y - 1), b = img.clamped(x, y - 1), c = img.clamped(x + 1, y - 1);
      const double d = img.clamped(x - 1, y), f = img.clamped(x + 1, y);
      const double e = img.clamped(x - 1, y + 1), q = img.clamped(x, y + 1), r = img.clamped(x + 1, y + 1);
      const double gx = (c + 2 * f + r) - (a + 2 * d + e);
      const double gy = (e + 2 * q + r) - (a + 2 * b + c);
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      g.gx[p] = gx;
      g.gy[p] = gy;
      g.magnitude[p] = std::sqrt(gx * gx + gy * gy);
      peak = std::max(peak, g.magnitude[p]);
    }
  }
  if (peak > 0.0) {
    for (double& m : g.magnitude) m /= peak;
  }
  return g;
}

/// Canny edge detector on an already-blurred gray raster.
///
/// Non-maximum suppression keeps a pixel when it is >= its forward neighbour
/// and > its backward neighbour along the quantized gradient direction, so a
/// plateau of two equal responses (within 1e-9) resolves to the left/top pixel.
inline BitMask canny(const Raster& img, double low, double high) {
  if (img.channels() != 1) fail_invalid("canny expects a 1-channel raster");
  if (!(low >= 0.0 && low < high && high <= 1.0)) {
    fail_invalid("canny thresholds must satisfy 0 <= low < high <= 1");
  }
  const int w = img.width();
  const int h = img.height();
  const Gradient g = sobel(img);
  const auto mag = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return g.magnitude[static_cast<std::size_t>(y) * w + x];
  };

  constexpr double tan22 = 0.41421356237309503;  // tan(22.5 deg)
  constexpr double kTie = 1e-9;  // responses this close count as a plateau
  std::vector<std::uint8_t> state(img.pixel_count(), 0);  // 0 none, 1 weak, 2 strong
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const double m = g.magnitude[p];
      if (m <= 0.0 || m < low) continue;
      double gx = g.gx[p];
      double gy = g.gy[p];
      if (gy < 0.0 || (gy == 0.0 && gx < 0.0)) {  // fold direction into [0,180)
        gx = -gx;
        gy = -gy;
      }
      int dx = 0;
      int dy = 0;
      if (gy <= std::abs(gx) * tan22) {
        dx = 1;
      } else if (gx >= 0.0 && gy * tan22 <= gx) {
        dx = 1, dy = 1;
      } else if (gx < 0.0 && gy * tan22 <= -gx) {
        dx = -1, dy = 1;
      } else {
        dy = 1;
      }
      if (!(m >= mag(x + dx, y + dy) - kTie && m > mag(x - dx, y - dy) + kTie)) continue;
      state[p] = m >= high ? 2 : 1;
      if (state[p] == 2) stack.push_back(p);
    }
  }

  BitMask out(w, h);
  for (std::size_t p : stack) out.set(static_cast<int>(p % w), static_cast<int>(p / w));
  while (!stack.empty()) {
    const std::size_t p = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(p % w);
    const int y = static_cast<int>(p / w);
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (state[q] == 1 && !out.get(nx, ny)) {
          out.set(nx, ny);
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

/// Binary dilation with a (2r+1)x(2r+1) square; out-of-bounds neighbours ignored.
inline BitMask dilate(const BitMask& mask, int radius) {
  if (radius < 1 || radius > 10) fail_invalid("dilation radius must be in [1, 10]");
  const int w = mask.width();
  const int h = mask.height();
  BitMask rows(w, h);
  for (int y = 0; y < h; ++y) {
    int last = -1000000;  // most recent set column
    for (int x = 0; x < w + radius; ++x) {
      if (x < w && mask.get(x, y)) last = x;
      const int target = x - radius;
      if (target >= 0 && target < w) {
        // any set pixel in [target - r, target + r]
        bool hit = last >= target - radius;
        rows.set(target, y, hit);
      }
    }
  }
  BitMask out(w, h);
  for (int x = 0; x < w; ++x) {
    int last = -1000000;
    for (int y = 0; y < h + radius; ++y) {
      if (y < h && rows.get(x, y)) last = y;
      const int target = y - radius;
      if (target >= 0 && target < h) out.set(x, target, last >= target - radius);
    }
  }
  return out;
}

}  // namespace vislog::imaging
