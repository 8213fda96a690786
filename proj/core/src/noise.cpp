#include "ditra/noise.hpp"

#include <algorithm>
#include <cmath>

#include "ditra/error.hpp"
#include "ditra/rng.hpp"

namespace ditra {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// symmetric border reflection: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

Image blur(const Image& img, double sigma) {
  if (sigma <= 0.0) throw ConfigError("blur sigma must be > 0");
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[std::size_t(i + radius)] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
    sum += k[std::size_t(i + radius)];
  }
  for (double& v : k) v /= sum;

  Image tmp(img.h, img.w);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[std::size_t(i + radius)] * img.at(r, reflect(c + i, img.w));
      tmp.at(r, c) = acc;
    }
  Image out(img.h, img.w);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[std::size_t(i + radius)] * tmp.at(reflect(r + i, img.h), c);
      out.at(r, c) = clamp01(acc);
    }
  return out;
}

Image occlude(const Image& img, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ConfigError("occlusion fraction must be in (0,1), got " +
                      std::to_string(fraction));
  }
  const int target = int(std::floor(fraction * img.h * img.w));
  Rng rng(seed);
  const int h_min = std::max(1, (target + img.w - 1) / img.w);
  const int h_max = std::min(img.h, std::max(1, target));
  const int h = h_min + rng.next_int(std::max(1, h_max - h_min + 1));
  const int w = std::clamp(int(std::llround(double(target) / h)), 1, img.w);
  const int r0 = rng.next_int(img.h - h + 1);
  const int c0 = rng.next_int(img.w - w + 1);
  Image out = img;
  for (int r = r0; r < r0 + h; ++r)
    for (int c = c0; c < c0 + w; ++c) out.at(r, c) = 0.5;
  return out;
}

Image downsample(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("downsample factor must be >= 1");
  Image out(img.h, img.w);
  for (int br = 0; br < img.h; br += factor)
    for (int bc = 0; bc < img.w; bc += factor) {
      const int rh = std::min(factor, img.h - br);
      const int rw = std::min(factor, img.w - bc);
      double acc = 0.0;
      for (int r = 0; r < rh; ++r)
        for (int c = 0; c < rw; ++c) acc += img.at(br + r, bc + c);
      acc /= rh * rw;
      for (int r = 0; r < rh; ++r)
        for (int c = 0; c < rw; ++c) out.at(br + r, bc + c) = acc;
    }
  return out;
}

Image quantize(const Image& img, int levels) {
  if (levels < 2) throw ConfigError("quantization needs >= 2 levels");
  Image out(img.h, img.w);
  const double q = double(levels - 1);
  for (std::size_t i = 0; i < img.px.size(); ++i)
    out.px[i] = clamp01(std::round(img.px[i] * q) / q);
  return out;
}

}  // namespace

NoiseSpec::Kind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseSpec::Kind::none;
  if (s == "blur") return NoiseSpec::Kind::blur;
  if (s == "occlusion") return NoiseSpec::Kind::occlusion;
  if (s == "downsample") return NoiseSpec::Kind::downsample;
  if (s == "quantize") return NoiseSpec::Kind::quantize;
  if (s == "mixed") return NoiseSpec::Kind::mixed;
  throw ConfigError("unknown noise kind '" + s + "'");
}

std::string to_string(NoiseSpec::Kind k) {
  switch (k) {
    case NoiseSpec::Kind::none: return "none";
    case NoiseSpec::Kind::blur: return "blur";
    case NoiseSpec::Kind::occlusion: return "occlusion";
    case NoiseSpec::Kind::downsample: return "downsample";
    case NoiseSpec::Kind::quantize: return "quantize";
    case NoiseSpec::Kind::mixed: return "mixed";
  }
  return "none";
}

Image inject_noise(const Image& img, const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseSpec::Kind::none:
      return img;
    case NoiseSpec::Kind::blur:
      return blur(img, spec.sigma);
    case NoiseSpec::Kind::occlusion:
      return occlude(img, spec.fraction, spec.seed);
    case NoiseSpec::Kind::downsample:
      return downsample(img, spec.factor);
    case NoiseSpec::Kind::quantize:
      return quantize(img, spec.levels);
    case NoiseSpec::Kind::mixed: {
      Image out = blur(img, spec.sigma);
      out = occlude(out, spec.fraction, spec.seed);
      out = downsample(out, spec.factor);
      return quantize(out, spec.levels);
    }
  }
  throw ConfigError("unhandled noise kind");
}

}  // namespace ditra
