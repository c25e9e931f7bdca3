#include "faceseal/training.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "faceseal/checkpoint.hpp"
#include "faceseal/evaluation.hpp"
#include "faceseal/image.hpp"
#include "faceseal/malicious.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace faceseal {

namespace {

RoundingMode rounding_from_string(const std::string& s) {
  if (s == "pass_through") return RoundingMode::pass_through;
  if (s == "cubic") return RoundingMode::cubic;
  if (s == "none") return RoundingMode::none;
  throw config_error("unknown jpeg rounding mode: " + s);
}

const char* rounding_to_string(RoundingMode m) {
  switch (m) {
    case RoundingMode::pass_through: return "pass_through";
    case RoundingMode::cubic: return "cubic";
    case RoundingMode::none: return "none";
  }
  return "?";
}

torch::Tensor draw_messages(std::mt19937_64& rng, std::int64_t n, std::int64_t bits) {
  auto t = torch::empty({n, bits}, torch::kFloat32);
  auto acc = t.accessor<float, 2>();
  std::uniform_int_distribution<int> bit(0, 1);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < bits; ++j) acc[i][j] = static_cast<float>(bit(rng));
  return t;
}

torch::Tensor draw_retentions(std::mt19937_64& rng, std::int64_t n, double lo, double hi) {
  auto t = torch::empty({n, 1, 1, 1}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(sample_retention(rng, lo, hi));
  return t;
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw format_error("checkpoint rng state unreadable");
  return rng;
}

void require_finite(const torch::Tensor& value, const char* what, std::int64_t step) {
  if (!torch::isfinite(value).all().item<bool>())
    throw std::runtime_error(std::string(what) + " is not finite at step " + std::to_string(step));
}

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& c) {
  auto options = torch::optim::AdamOptions(c.learning_rate).betas({c.adam_beta1, c.adam_beta2});
  return std::make_unique<torch::optim::Adam>(params, options);
}

// Adam moments keyed by parameter path so checkpoints stay inspectable.
void append_adam_state(std::vector<NamedTensor>& out, json& steps, const torch::optim::Adam& opt,
                       const std::vector<std::pair<std::string, torch::Tensor>>& named_params,
                       const std::string& prefix) {
  const auto& state = opt.state();
  for (const auto& [name, param] : named_params) {
    auto it = state.find(param.unsafeGetTensorImpl());
    if (it == state.end()) continue;  // parameter not stepped yet
    auto* s = static_cast<torch::optim::AdamParamState*>(it->second.get());
    out.push_back({prefix + "/" + name + "/exp_avg", s->exp_avg()});
    out.push_back({prefix + "/" + name + "/exp_avg_sq", s->exp_avg_sq()});
    steps[prefix + "/" + name] = s->step();
  }
}

void restore_adam_state(torch::optim::Adam& opt, const json& steps,
                        const std::vector<std::pair<std::string, torch::Tensor>>& named_params,
                        const std::string& prefix,
                        const std::unordered_map<std::string, const torch::Tensor*>& tensors) {
  auto& state = opt.state();
  for (const auto& [name, param] : named_params) {
    const std::string key = prefix + "/" + name;
    if (!steps.contains(key)) continue;
    auto m = tensors.find(key + "/exp_avg");
    auto v = tensors.find(key + "/exp_avg_sq");
    if (m == tensors.end() || v == tensors.end()) throw io_error("checkpoint missing optimizer state for " + key);
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(steps.at(key).get<std::int64_t>());
    s->exp_avg(m->second->clone());
    s->exp_avg_sq(v->second->clone());
    state[param.unsafeGetTensorImpl()] = std::move(s);
  }
}

std::vector<std::pair<std::string, torch::Tensor>> named_generator_params(const ModelBundle& b) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : b.encoder->named_parameters()) out.emplace_back("encoder/" + p.key(), p.value());
  for (const auto& p : b.decoder->named_parameters()) out.emplace_back("decoder/" + p.key(), p.value());
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> named_discriminator_params(const ModelBundle& b) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : b.discriminator->named_parameters()) out.emplace_back("discriminator/" + p.key(), p.value());
  return out;
}

json stats_to_json(std::int64_t step, const StepStats& s) {
  return json{{"step", step},
              {"l1", s.losses.l1},
              {"l2", s.losses.l2},
              {"lpips", s.losses.lpips},
              {"adversarial", s.losses.adversarial},
              {"image", s.losses.image},
              {"message", s.losses.message},
              {"aux", s.losses.aux},
              {"image_weight", s.losses.image_weight},
              {"total", s.losses.total},
              {"discriminator", s.discriminator_loss},
              {"transform", s.transform.describe()},
              {"mean_retention", s.mean_retention}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw config_error("train: batch_size must be positive");
  if (iterations < 1) throw config_error("train: iterations must be positive");
  if (learning_rate <= 0) throw config_error("train: learning_rate must be positive");
  if (retention_lo < 0 || retention_hi > 1 || retention_lo > retention_hi)
    throw config_error("train: retention range must satisfy 0 <= lo <= hi <= 1");
  if (image_ramp_fraction < 0 || image_ramp_fraction > 1)
    throw config_error("train: image_ramp_fraction must be in [0,1]");
  if (validation_images < 1) throw config_error("train: validation_images must be positive");
  arch.resolved();  // throws on bad geometry
  make_perceptual_metric(perceptual_metric);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"iterations", c.iterations},
           {"learning_rate", c.learning_rate},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"arch", c.arch},
           {"weights",
            {{"perceptual", c.weights.perceptual},
             {"adversarial", c.weights.adversarial},
             {"message", c.weights.message},
             {"aux", c.weights.aux}}},
           {"perceptual_metric", c.perceptual_metric},
           {"benign",
            {{"blur_kernels", c.benign.blur_kernels},
             {"jpeg_qualities", c.benign.jpeg_qualities},
             {"saturation_lo", c.benign.saturation_lo},
             {"saturation_hi", c.benign.saturation_hi},
             {"contrast_lo", c.benign.contrast_lo},
             {"contrast_hi", c.benign.contrast_hi},
             {"scale_lo", c.benign.scale_lo},
             {"scale_hi", c.benign.scale_hi},
             {"shift_max", c.benign.shift_max},
             {"rotate_max", c.benign.rotate_max}}},
           {"retention_lo", c.retention_lo},
           {"retention_hi", c.retention_hi},
           {"mask_feather_px", c.mask_feather_px},
           {"jpeg_rounding", rounding_to_string(c.jpeg_rounding)},
           {"seed", c.seed},
           {"checkpoint_every", c.checkpoint_every},
           {"validate_every", c.validate_every},
           {"image_ramp_fraction", c.image_ramp_fraction},
           {"validation_images", c.validation_images},
           {"on_missing_polygons", c.on_missing_polygons},
           {"assert_finite", c.assert_finite}};
}

void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  if (j.contains("arch")) c.arch = j.at("arch").get<ArchConfig>();
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    c.weights.perceptual = w.value("perceptual", c.weights.perceptual);
    c.weights.adversarial = w.value("adversarial", c.weights.adversarial);
    c.weights.message = w.value("message", c.weights.message);
    c.weights.aux = w.value("aux", c.weights.aux);
  }
  c.perceptual_metric = j.value("perceptual_metric", c.perceptual_metric);
  if (j.contains("benign")) {
    const auto& b = j.at("benign");
    c.benign.blur_kernels = b.value("blur_kernels", c.benign.blur_kernels);
    c.benign.jpeg_qualities = b.value("jpeg_qualities", c.benign.jpeg_qualities);
    c.benign.saturation_lo = b.value("saturation_lo", c.benign.saturation_lo);
    c.benign.saturation_hi = b.value("saturation_hi", c.benign.saturation_hi);
    c.benign.contrast_lo = b.value("contrast_lo", c.benign.contrast_lo);
    c.benign.contrast_hi = b.value("contrast_hi", c.benign.contrast_hi);
    c.benign.scale_lo = b.value("scale_lo", c.benign.scale_lo);
    c.benign.scale_hi = b.value("scale_hi", c.benign.scale_hi);
    c.benign.shift_max = b.value("shift_max", c.benign.shift_max);
    c.benign.rotate_max = b.value("rotate_max", c.benign.rotate_max);
  }
  c.retention_lo = j.value("retention_lo", c.retention_lo);
  c.retention_hi = j.value("retention_hi", c.retention_hi);
  c.mask_feather_px = j.value("mask_feather_px", c.mask_feather_px);
  if (j.contains("jpeg_rounding")) c.jpeg_rounding = rounding_from_string(j.at("jpeg_rounding").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.image_ramp_fraction = j.value("image_ramp_fraction", c.image_ramp_fraction);
  c.validation_images = j.value("validation_images", c.validation_images);
  c.on_missing_polygons = j.value("on_missing_polygons", c.on_missing_polygons);
  c.assert_finite = j.value("assert_finite", c.assert_finite);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw format_error(std::string("bad config: ") + e.what());
  }
  auto c = j.get<TrainConfig>();
  c.validate();
  return c;
}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.config = config;
  state.config.arch = config.arch.resolved();
  state.models = init_models(state.config.arch, config.seed);
  state.opt_generator = make_adam(state.models.generator_parameters(), config);
  state.opt_discriminator = make_adam(state.models.discriminator->parameters(), config);
  state.rng = std::mt19937_64(config.seed);
  state.metric = make_perceptual_metric(config.perceptual_metric);
  return state;
}

StepStats train_step(TrainState& state, const torch::Tensor& images, const torch::Tensor& masks) {
  const auto& cfg = state.config;
  const std::int64_t n = images.size(0);
  if (!masks.defined() || masks.size(0) != n)
    throw std::invalid_argument("train_step: masks missing or batch size mismatch");

  // all per-step randomness flows from the state rng, in a fixed order
  auto s = draw_messages(state.rng, n, cfg.arch.message_bits);
  auto spec = sample_benign(state.rng, cfg.benign);
  auto wr = draw_retentions(state.rng, n, cfg.retention_lo, cfg.retention_hi);

  state.models.train(true);

  auto x_w = state.models.encoder->forward(images, s);
  auto x_b = apply_benign(x_w, spec, cfg.jpeg_rounding);
  auto retention = 1.0 - (1.0 - wr) * masks;  // [n,1,S,S]
  auto x_m = apply_malicious(x_w, images, retention);

  auto dec_b = state.models.decoder->forward(x_b);
  auto dec_m = state.models.decoder->forward(x_m);
  auto a_xw = state.models.discriminator->forward(x_w).mean;

  double ramp = 1.0;
  if (cfg.image_ramp_fraction > 0) {
    const double horizon = cfg.image_ramp_fraction * static_cast<double>(cfg.iterations);
    ramp = std::min(1.0, static_cast<double>(state.step + 1) / std::max(1.0, horizon));
  }

  TotalLossInputs inputs;
  inputs.x = images;
  inputs.x_w = x_w;
  inputs.s = s;
  inputs.s_benign = dec_b.soft_bits;
  inputs.s_malicious = dec_m.soft_bits;
  inputs.a_xw = a_xw;
  if (cfg.weights.aux != 0.0) {
    inputs.proj = state.models.encoder->project_message(s);
    inputs.decoded_map = dec_b.decoded_map;
  }
  auto [total, breakdown] = total_encoder_decoder_loss(inputs, cfg.weights, *state.metric, ramp);
  if (cfg.assert_finite) require_finite(total, "encoder/decoder loss", state.step);

  state.opt_generator->zero_grad();
  total.backward();
  state.opt_generator->step();

  auto a_x = state.models.discriminator->forward(images).mean;
  auto a_fake = state.models.discriminator->forward(x_w.detach()).mean;
  auto d_loss = discriminator_loss(a_x, a_fake);
  if (cfg.assert_finite) require_finite(d_loss, "discriminator loss", state.step);

  state.opt_discriminator->zero_grad();
  d_loss.backward();
  state.opt_discriminator->step();

  ++state.step;

  StepStats stats;
  stats.losses = breakdown;
  stats.discriminator_loss = d_loss.item<double>();
  stats.transform = spec;
  stats.mean_retention = wr.mean().item<double>();
  return stats;
}

ValidationStats run_validation(TrainState& state, const FaceDataset& val) {
  torch::NoGradGuard guard;
  state.models.train(false);
  const auto& cfg = state.config;
  const std::int64_t n = std::min<std::int64_t>(cfg.validation_images, val.size());
  auto idx = torch::arange(n, torch::kInt64);
  auto x = val.image_batch(idx);
  auto masks = val.mask_batch(idx);

  // fixed stream so validation never disturbs the training rng
  std::mt19937_64 vrng(cfg.seed ^ 0x76616c69646174ULL);
  auto s = draw_messages(vrng, n, cfg.arch.message_bits);

  auto x_w = state.models.encoder->forward(x, s);
  auto soft_benign = state.models.decoder->forward(x_w).soft_bits;
  auto x_m = apply_malicious(x_w, x, 1.0 - masks);  // retention 0 inside features
  auto soft_malicious = state.models.decoder->forward(x_m).soft_bits;

  ValidationStats v;
  v.step = state.step;
  v.bra_benign = bit_recovery_accuracy(s, soft_benign);
  v.bra_malicious = bit_recovery_accuracy(s, soft_malicious);
  v.margin = v.bra_benign - v.bra_malicious;
  double psnr_sum = 0, ssim_sum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    auto a = quantize_8bit(x[i]);
    auto b = quantize_8bit(x_w[i]);
    double p = psnr(a, b);
    psnr_sum += std::isinf(p) ? 100.0 : p;
    ssim_sum += ssim(a, b);
  }
  v.psnr = psnr_sum / static_cast<double>(n);
  v.ssim = ssim_sum / static_cast<double>(n);
  state.models.train(true);
  return v;
}

void save_train_checkpoint(const std::string& path, const TrainState& state) {
  CheckpointPayload payload;
  payload.arch = state.config.arch;
  payload.meta["kind"] = "train";
  payload.meta["step"] = state.step;
  payload.meta["rng"] = rng_to_string(state.rng);
  payload.meta["config"] = state.config;
  append_module_tensors(payload.tensors, *state.models.encoder, "encoder");
  append_module_tensors(payload.tensors, *state.models.decoder, "decoder");
  append_module_tensors(payload.tensors, *state.models.discriminator, "discriminator");
  json adam_steps = json::object();
  append_adam_state(payload.tensors, adam_steps, *state.opt_generator, named_generator_params(state.models),
                    "opt_gen");
  append_adam_state(payload.tensors, adam_steps, *state.opt_discriminator, named_discriminator_params(state.models),
                    "opt_disc");
  payload.meta["adam_steps"] = adam_steps;
  write_checkpoint(path, payload);
}

TrainState load_train_checkpoint(const std::string& path) {
  auto payload = read_checkpoint(path);
  if (payload.meta.value("kind", "") != "train")
    throw format_error("not a training checkpoint (model-only?): " + path);

  TrainConfig config = payload.meta.at("config").get<TrainConfig>();
  if (!(config.arch.resolved() == payload.arch))
    throw config_error("checkpoint arch does not match its stored config: " + path);

  TrainState state;
  state.config = config;
  state.config.arch = payload.arch;
  state.models = init_models(payload.arch, config.seed);
  load_module_tensors(*state.models.encoder, "encoder", payload.tensors);
  load_module_tensors(*state.models.decoder, "decoder", payload.tensors);
  load_module_tensors(*state.models.discriminator, "discriminator", payload.tensors);

  state.opt_generator = make_adam(state.models.generator_parameters(), config);
  state.opt_discriminator = make_adam(state.models.discriminator->parameters(), config);
  std::unordered_map<std::string, const torch::Tensor*> by_name;
  for (const auto& nt : payload.tensors) by_name[nt.name] = &nt.tensor;
  const auto& adam_steps = payload.meta.at("adam_steps");
  restore_adam_state(*state.opt_generator, adam_steps, named_generator_params(state.models), "opt_gen", by_name);
  restore_adam_state(*state.opt_discriminator, adam_steps, named_discriminator_params(state.models), "opt_disc",
                     by_name);

  state.step = payload.meta.at("step").get<std::int64_t>();
  state.rng = rng_from_string(payload.meta.at("rng").get<std::string>());
  state.metric = make_perceptual_metric(config.perceptual_metric);
  return state;
}

TrainResult train(const TrainConfig& config, const Manifest& manifest, const std::string& out_dir,
                  const std::string& resume_from, const std::function<void(const StepStats&)>& on_step) {
  fs::create_directories(out_dir);

  TrainState state = resume_from.empty() ? init_train_state(config) : load_train_checkpoint(resume_from);
  const auto& cfg = state.config;
  if (manifest.side != cfg.arch.image_side)
    throw config_error("manifest side " + std::to_string(manifest.side) + " does not match arch side " +
                       std::to_string(cfg.arch.image_side));

  SidecarPolygonProvider polygons;
  auto train_set = FaceDataset::load(manifest, "train", polygons, cfg.on_missing_polygons);
  auto val_set = FaceDataset::load(manifest, "val", polygons, cfg.on_missing_polygons);

  const std::string metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  std::ofstream metrics(metrics_path, resume_from.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw io_error("cannot write metrics log: " + metrics_path);

  const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
  const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
  const std::string final_path = (fs::path(out_dir) / "final.ckpt").string();

  TrainResult result;
  result.metrics_path = metrics_path;
  result.best.margin = -1e9;

  std::uniform_int_distribution<std::int64_t> pick(0, train_set.size() - 1);
  while (state.step < cfg.iterations) {
    auto idx = torch::empty({cfg.batch_size}, torch::kInt64);
    auto* p = idx.data_ptr<std::int64_t>();
    for (std::int64_t i = 0; i < cfg.batch_size; ++i) p[i] = pick(state.rng);

    auto stats = train_step(state, train_set.image_batch(idx), train_set.mask_batch(idx));
    metrics << stats_to_json(state.step, stats).dump() << "\n";
    if (on_step) on_step(stats);

    if (cfg.validate_every > 0 && state.step % cfg.validate_every == 0) {
      auto v = run_validation(state, val_set);
      metrics << json{{"step", v.step},         {"validation", true},          {"bra_benign", v.bra_benign},
                      {"bra_malicious", v.bra_malicious}, {"margin", v.margin}, {"psnr", v.psnr},
                      {"ssim", v.ssim}}
                     .dump()
              << "\n";
      metrics.flush();
      result.last = v;
      if (v.margin > result.best.margin) {
        result.best = v;
        save_model_checkpoint(best_path, state.models,
                              json{{"step", v.step},
                                   {"bra_benign", v.bra_benign},
                                   {"bra_malicious", v.bra_malicious},
                                   {"psnr", v.psnr},
                                   {"ssim", v.ssim}});
        result.best_checkpoint = best_path;
      }
    }
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
      save_train_checkpoint(last_path, state);
  }

  save_train_checkpoint(final_path, state);
  result.final_checkpoint = final_path;
  if (result.best_checkpoint.empty()) {
    // no validation ran; fall back to the final weights
    save_model_checkpoint(best_path, state.models, json{{"step", state.step}});
    result.best_checkpoint = best_path;
  }
  return result;
}

}  // namespace faceseal
