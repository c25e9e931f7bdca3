#pragma once

#include <torch/torch.h>

#include <functional>
#include <memory>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "faceseal/benign.hpp"
#include "faceseal/dataset.hpp"
#include "faceseal/losses.hpp"
#include "faceseal/networks.hpp"

namespace faceseal {

struct TrainConfig {
  std::int64_t batch_size = 64;
  std::int64_t iterations = 100000;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  ArchConfig arch;
  LossWeights weights;
  std::string perceptual_metric = "pyramid";
  BenignRanges benign;
  double retention_lo = 0.0;
  double retention_hi = 0.4;
  int mask_feather_px = 0;
  RoundingMode jpeg_rounding = RoundingMode::pass_through;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 1000;
  std::int64_t validate_every = 1000;
  double image_ramp_fraction = 0.1;  // image loss weight ramps linearly over this first fraction
  std::int64_t validation_images = 64;
  std::string on_missing_polygons = "error";
  bool assert_finite = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::string& path);

struct TrainState {
  TrainConfig config;
  ModelBundle models;
  std::unique_ptr<torch::optim::Adam> opt_generator;      // encoder + decoder
  std::unique_ptr<torch::optim::Adam> opt_discriminator;  // discriminator
  std::int64_t step = 0;
  std::mt19937_64 rng;
  std::shared_ptr<PerceptualMetric> metric;
};

TrainState init_train_state(const TrainConfig& config);

struct StepStats {
  LossBreakdown losses;
  double discriminator_loss = 0.0;
  TransformSpec transform;  // the one benign spec applied to the whole batch
  double mean_retention = 0.0;
};

/// One optimization step: encoder/decoder update from the joint objective,
/// then one discriminator update. `images` is float [n,3,S,S], `masks` the
/// matching binary feature masks [n,1,S,S]. Messages, the benign spec and
/// per-image retention factors are drawn from the state rng.
StepStats train_step(TrainState& state, const torch::Tensor& images, const torch::Tensor& masks);

struct ValidationStats {
  std::int64_t step = 0;
  double bra_benign = 0.0;     // identity transform, percent
  double bra_malicious = 0.0;  // full removal (retention 0), percent
  double margin = 0.0;         // benign - malicious
  double psnr = 0.0;
  double ssim = 0.0;
};

ValidationStats run_validation(TrainState& state, const FaceDataset& val);

struct TrainResult {
  std::string best_checkpoint;   // model-only, highest validation margin
  std::string final_checkpoint;  // full training state at the last step
  std::string metrics_path;
  ValidationStats best;
  ValidationStats last;
};

/// Full run: per-step metrics appended as JSON lines, periodic validation and
/// checkpointing under `out_dir`. Pass `resume_from` to continue a run; the
/// stored config is used so the trajectory matches an uninterrupted run.
TrainResult train(const TrainConfig& config, const Manifest& manifest, const std::string& out_dir,
                  const std::string& resume_from = "",
                  const std::function<void(const StepStats&)>& on_step = {});

// Full-state checkpoints (parameters, optimizer moments, step counter, rng).
void save_train_checkpoint(const std::string& path, const TrainState& state);
TrainState load_train_checkpoint(const std::string& path);

}  // namespace faceseal
