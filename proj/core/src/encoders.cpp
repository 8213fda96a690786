#include "ditra/encoders.hpp"

#include <cmath>

#include "ditra/error.hpp"
#include "ditra/rng.hpp"

namespace ditra {

namespace {
constexpr int kPoolK = 4;  // box-pool kernel side for the semantic stream
}

VisionEncoders::VisionEncoders(const TaskConfig& task, EncoderConfig cfg)
    : task_(task), cfg_(cfg) {
  if (task_.patch % kPoolK != 0) {
    throw ConfigError("patch side " + std::to_string(task_.patch) +
                      " not divisible by pooling kernel " +
                      std::to_string(kPoolK));
  }
  const int pooled = (task_.patch / kPoolK) * (task_.patch / kPoolK);
  const int f_sem = pooled + 1;  // + global band mean
  const int f_det = task_.patch * task_.patch;
  Rng rng(cfg_.seed);
  w_sem_ = Tensor::gaussian({f_sem, cfg_.d_sem}, rng,
                            1.0 / std::sqrt(double(f_sem)));
  w_det_ = Tensor::gaussian({f_det, cfg_.d_det}, rng,
                            1.0 / std::sqrt(double(f_det)));
  slot_codes_ = Tensor::gaussian({task_.n_patches(), cfg_.d_sem}, rng,
                                 cfg_.slot_code_std);
}

void VisionEncoders::check_geometry(const Image& img) const {
  if (img.h != task_.image_h() || img.w != task_.image_w()) {
    throw ShapeError("image " + std::to_string(img.h) + "x" +
                     std::to_string(img.w) + " does not match configured " +
                     std::to_string(task_.image_h()) + "x" +
                     std::to_string(task_.image_w()));
  }
}

Tensor VisionEncoders::encode_semantic(const Image& img) const {
  check_geometry(img);
  double band_mean = 0.0;
  for (int r = 0; r < task_.band; ++r)
    for (int c = 0; c < img.w; ++c) band_mean += img.at(r, c);
  band_mean /= double(task_.band) * img.w;

  const int side = task_.patch / kPoolK;
  const int f_sem = side * side + 1;
  Tensor out({task_.n_patches(), cfg_.d_sem});
  std::vector<double> feat(static_cast<std::size_t>(f_sem));
  for (int slot = 0; slot < task_.n_patches(); ++slot) {
    const int pr = task_.band + slot / task_.grid * task_.patch;
    const int pc = slot % task_.grid * task_.patch;
    for (int br = 0; br < side; ++br)
      for (int bc = 0; bc < side; ++bc) {
        double acc = 0.0;
        for (int r = 0; r < kPoolK; ++r)
          for (int c = 0; c < kPoolK; ++c)
            acc += img.at(pr + br * kPoolK + r, pc + bc * kPoolK + c);
        feat[std::size_t(br) * side + bc] = acc / (kPoolK * kPoolK);
      }
    feat[std::size_t(f_sem) - 1] = band_mean;
    double* row = out.data() + std::size_t(slot) * cfg_.d_sem;
    const double* code = slot_codes_.data() + std::size_t(slot) * cfg_.d_sem;
    for (int j = 0; j < cfg_.d_sem; ++j) {
      double acc = code[j];
      for (int k = 0; k < f_sem; ++k)
        acc += feat[std::size_t(k)] *
               w_sem_.data()[std::size_t(k) * cfg_.d_sem + j];
      row[j] = acc;
    }
  }
  return out;
}

Tensor VisionEncoders::encode_detail(const Image& img) const {
  check_geometry(img);
  const int f_det = task_.patch * task_.patch;
  Tensor out({task_.n_patches(), cfg_.d_det});
  std::vector<double> feat(static_cast<std::size_t>(f_det));
  for (int slot = 0; slot < task_.n_patches(); ++slot) {
    const int pr = task_.band + slot / task_.grid * task_.patch;
    const int pc = slot % task_.grid * task_.patch;
    double mean = 0.0;
    for (int r = 0; r < task_.patch; ++r)
      for (int c = 0; c < task_.patch; ++c) {
        feat[std::size_t(r) * task_.patch + c] = img.at(pr + r, pc + c);
        mean += feat[std::size_t(r) * task_.patch + c];
      }
    mean /= f_det;
    for (double& v : feat) v -= mean;
    double* row = out.data() + std::size_t(slot) * cfg_.d_det;
    for (int j = 0; j < cfg_.d_det; ++j) {
      double acc = 0.0;
      for (int k = 0; k < f_det; ++k)
        acc += feat[std::size_t(k)] *
               w_det_.data()[std::size_t(k) * cfg_.d_det + j];
      row[j] = acc;
    }
  }
  return out;
}

std::vector<Tensor> VisionEncoders::all_params() const {
  return {w_sem_, w_det_, slot_codes_};
}

Digest VisionEncoders::content_hash() const {
  return sha256_tensors(all_params());
}

}  // namespace ditra
