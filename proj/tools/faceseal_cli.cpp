// Command-line front end: ingest, train, embed, verify, multiface-embed,
// multiface-verify, evaluate, attack-copy.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "faceseal/checkpoint.hpp"
#include "faceseal/evaluation.hpp"
#include "faceseal/pipeline.hpp"
#include "faceseal/plot.hpp"
#include "faceseal/synth.hpp"
#include "faceseal/training.hpp"

namespace fs = std::filesystem;
using namespace faceseal;

namespace {

struct MessageArgs {
  std::string hex;
  std::string key_file;
  std::string context;
};

void add_message_flags(CLI::App* cmd, MessageArgs& args) {
  cmd->add_option("--message", args.hex, "Message as a hex string (length L/4)");
  cmd->add_option("--key-file", args.key_file, "File with raw key bytes (alternative to --message)");
  cmd->add_option("--context", args.context, "Context string mixed into the keyed message");
}

std::vector<std::uint8_t> read_key_bytes(const MessageArgs& args) {
  if (!args.key_file.empty()) {
    std::ifstream in(args.key_file, std::ios::binary);
    if (!in) throw io_error("cannot read key file: " + args.key_file);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  if (const char* env = std::getenv("FACESEAL_KEY"); env && *env)
    return std::vector<std::uint8_t>(env, env + std::string(env).size());
  throw config_error("no message source: pass --message, --key-file, or set FACESEAL_KEY");
}

MessageBits resolve_message(const MessageArgs& args, int bits) {
  if (!args.hex.empty()) return hex_to_bits(args.hex, bits);
  return generate_message(read_key_bytes(args),
                          std::vector<std::uint8_t>(args.context.begin(), args.context.end()), bits);
}

std::vector<FaceBox> load_boxes(const std::string& sidecar_path) {
  auto sc = load_sidecar(sidecar_path);
  if (sc.faces.empty()) throw config_error("sidecar has no face boxes: " + sidecar_path);
  return sc.faces;
}

void print_verify(const VerifyResult& r, const std::string& label) {
  std::cout << label << " decoded=" << r.decoded_hex << " bra=" << r.bra << "%"
            << " threshold=" << r.threshold << "% verdict=" << (r.authentic ? "authentic" : "manipulated") << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"semi-fragile face watermarking toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Preprocess a directory of face images into a split dataset");
  std::string in_dir, out_dir;
  IngestOptions ingest_opts;
  ingest->add_option("--src", in_dir, "Source image directory")->required();
  ingest->add_option("--out", out_dir, "Output dataset directory")->required();
  ingest->add_option("--side", ingest_opts.side, "Output square side");
  ingest->add_option("--seed", ingest_opts.seed, "Split seed");
  ingest->add_option("--max-test", ingest_opts.max_test, "Cap on the test split size");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train encoder/decoder/discriminator");
  std::string config_path, data_dir, run_dir, resume;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  train_cmd->add_option("--config", config_path, "Training config (JSON)")->required();
  train_cmd->add_option("--data", data_dir, "Ingested dataset directory")->required();
  train_cmd->add_option("--out", run_dir, "Run output directory")->required();
  train_cmd->add_option("--resume", resume, "Resume from a training checkpoint");
  train_cmd->add_option("--seed", seed_override, "Override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });

  // embed
  auto* embed = app.add_subcommand("embed", "Embed a message into an image");
  std::string ckpt, embed_in, embed_out, format = "png";
  int quality = 95;
  MessageArgs embed_msg;
  embed->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  embed->add_option("--in", embed_in, "Input image")->required();
  embed->add_option("--out", embed_out, "Output image")->required();
  embed->add_option("--format", format, "png or jpeg")->check(CLI::IsMember({"png", "jpeg"}));
  embed->add_option("--quality", quality, "JPEG quality");
  add_message_flags(embed, embed_msg);

  // verify
  auto* verify = app.add_subcommand("verify", "Verify the watermark in an image");
  std::string verify_ckpt, verify_in;
  double threshold = 85.0;
  MessageArgs verify_msg;
  verify->add_option("--checkpoint", verify_ckpt, "Model checkpoint")->required();
  verify->add_option("--in", verify_in, "Input image")->required();
  verify->add_option("--threshold", threshold, "Authenticity threshold (BRA percent)");
  add_message_flags(verify, verify_msg);

  // multiface-embed
  auto* mf_embed = app.add_subcommand("multiface-embed", "Embed watermarks into each face box");
  std::string mfe_ckpt, mfe_in, mfe_out, mfe_boxes;
  std::vector<std::string> mfe_messages;
  MessageArgs mfe_msg;
  mf_embed->add_option("--checkpoint", mfe_ckpt)->required();
  mf_embed->add_option("--in", mfe_in)->required();
  mf_embed->add_option("--out", mfe_out)->required();
  mf_embed->add_option("--boxes", mfe_boxes, "Sidecar file with face boxes")->required();
  mf_embed->add_option("--message", mfe_messages, "Hex message (repeat per face, or give one shared)");
  mf_embed->add_option("--key-file", mfe_msg.key_file);
  mf_embed->add_option("--context", mfe_msg.context);

  // multiface-verify
  auto* mf_verify = app.add_subcommand("multiface-verify", "Verify each face box");
  std::string mfv_ckpt, mfv_in, mfv_boxes;
  std::vector<std::string> mfv_messages;
  MessageArgs mfv_msg;
  double mfv_threshold = 85.0;
  mf_verify->add_option("--checkpoint", mfv_ckpt)->required();
  mf_verify->add_option("--in", mfv_in)->required();
  mf_verify->add_option("--boxes", mfv_boxes)->required();
  mf_verify->add_option("--message", mfv_messages, "Expected hex message(s)");
  mf_verify->add_option("--key-file", mfv_msg.key_file);
  mf_verify->add_option("--context", mfv_msg.context);
  mf_verify->add_option("--threshold", mfv_threshold);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Benchmark a checkpoint on the test split");
  std::string eval_ckpt, eval_data, eval_out, plots_dir, export_dir;
  std::vector<std::string> external_specs;
  std::int64_t max_images = 0;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data, "Ingested dataset directory")->required();
  eval->add_option("--out", eval_out, "Report JSON path");
  eval->add_option("--plots", plots_dir, "Directory for ROC/BRA figures");
  eval->add_option("--max-images", max_images, "Cap on evaluated test images (0 = all)");
  eval->add_option("--export-watermarked", export_dir, "Write watermarked test images here");
  eval->add_option("--external", external_specs,
                   "label=dir with externally manipulated copies of exported images (repeatable)");

  // attack-copy
  auto* attack = app.add_subcommand("attack-copy", "Watermark transplant attack benchmark");
  std::string atk_ckpt, atk_data, atk_out;
  std::int64_t pairs = 100;
  attack->add_option("--checkpoint", atk_ckpt)->required();
  attack->add_option("--data", atk_data)->required();
  attack->add_option("--pairs", pairs, "Number of source/target pairs");
  attack->add_option("--out", atk_out, "Report JSON path");

  bool verify_chosen = false;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    verify_chosen = app.got_subcommand(verify) || app.got_subcommand(mf_verify);
    int code = app.exit(e);
    return code == 0 ? 0 : (verify_chosen ? 2 : code);
  }
  verify_chosen = app.got_subcommand(verify) || app.got_subcommand(mf_verify);

  try {
    if (app.got_subcommand(ingest)) {
      auto manifest = ingest_dataset(in_dir, out_dir, ingest_opts);
      std::cout << "ingested " << manifest.entries.size() << " images: " << manifest.count("train") << " train, "
                << manifest.count("val") << " val, " << manifest.count("test") << " test -> " << out_dir << "\n";
      return 0;
    }

    if (app.got_subcommand(train_cmd)) {
      auto config = load_train_config(config_path);
      if (seed_set) config.seed = seed_override;
      auto manifest = Manifest::load(data_dir);
      std::int64_t report_every = std::max<std::int64_t>(1, config.iterations / 200);
      std::int64_t counter = 0;
      auto result = train(config, manifest, run_dir, resume, [&](const StepStats& s) {
        if (++counter % report_every == 0)
          std::cerr << "step " << counter << "/" << config.iterations << " total=" << s.losses.total
                    << " msg=" << s.losses.message << " img=" << s.losses.image << " disc=" << s.discriminator_loss
                    << " [" << s.transform.describe() << "]\n";
      });
      std::cout << "best checkpoint: " << result.best_checkpoint << " (margin " << result.best.margin
                << ", benign BRA " << result.best.bra_benign << "%, tampered BRA " << result.best.bra_malicious
                << "%, psnr " << result.best.psnr << ")\n"
                << "final checkpoint: " << result.final_checkpoint << "\n";
      return 0;
    }

    if (app.got_subcommand(embed)) {
      auto bundle = load_model_checkpoint(ckpt);
      auto message = resolve_message(embed_msg, static_cast<int>(bundle.arch.message_bits));
      EmbedOptions opts;
      opts.format = format == "jpeg" ? ImageFormat::jpeg : ImageFormat::png;
      opts.quality = quality;
      auto result = embed_image_file(bundle, embed_in, message, embed_out, opts);
      std::cout << "wrote " << embed_out << " psnr=" << result.quality.psnr_quantized
                << "dB ssim=" << result.quality.ssim_quantized << "\n";
      return 0;
    }

    if (app.got_subcommand(verify)) {
      auto bundle = load_model_checkpoint(verify_ckpt);
      auto expected = resolve_message(verify_msg, static_cast<int>(bundle.arch.message_bits));
      auto result = verify_image_file(bundle, verify_in, expected, threshold);
      print_verify(result, verify_in);
      return result.authentic ? 0 : 1;
    }

    if (app.got_subcommand(mf_embed)) {
      auto bundle = load_model_checkpoint(mfe_ckpt);
      const int bits = static_cast<int>(bundle.arch.message_bits);
      auto boxes = load_boxes(mfe_boxes);
      std::vector<MessageBits> messages;
      if (!mfe_messages.empty())
        for (const auto& h : mfe_messages) messages.push_back(hex_to_bits(h, bits));
      else
        messages.push_back(resolve_message(mfe_msg, bits));
      auto image = load_image(mfe_in);
      auto out = multiface_embed(bundle, image, boxes, messages);
      save_image(out, mfe_out);
      std::cout << "wrote " << mfe_out << " (" << boxes.size() << " faces)\n";
      return 0;
    }

    if (app.got_subcommand(mf_verify)) {
      auto bundle = load_model_checkpoint(mfv_ckpt);
      const int bits = static_cast<int>(bundle.arch.message_bits);
      auto boxes = load_boxes(mfv_boxes);
      std::vector<MessageBits> expected;
      if (!mfv_messages.empty())
        for (const auto& h : mfv_messages) expected.push_back(hex_to_bits(h, bits));
      else
        expected.push_back(resolve_message(mfv_msg, bits));
      auto results = multiface_verify(bundle, load_image(mfv_in), boxes, expected, mfv_threshold);
      bool all_ok = true;
      for (std::size_t i = 0; i < results.size(); ++i) {
        print_verify(results[i], "face " + std::to_string(i));
        all_ok = all_ok && results[i].authentic;
      }
      std::cout << "overall: " << (all_ok ? "authentic" : "manipulated") << "\n";
      return all_ok ? 0 : 1;
    }

    if (app.got_subcommand(eval)) {
      auto bundle = load_model_checkpoint(eval_ckpt);
      auto manifest = Manifest::load(eval_data);
      SidecarPolygonProvider polygons;
      auto testset = FaceDataset::load(manifest, "test", polygons);
      EvalOptions opts;
      opts.max_images = max_images;
      opts.export_watermarked_dir = export_dir;
      for (const auto& spec : external_specs) {
        auto pos = spec.find('=');
        if (pos == std::string::npos) throw config_error("--external expects label=dir");
        opts.external_malicious_dirs.emplace_back(spec.substr(0, pos), spec.substr(pos + 1));
      }
      auto report = transform_benchmark(bundle, testset, opts);
      std::cout << "images=" << report.images << " bpp=" << report.bpp << " psnr=" << report.psnr_mean
                << "dB ssim=" << report.ssim_mean << "\n";
      for (const auto& t : report.transforms)
        std::cout << "  " << (t.malicious ? "[malicious] " : "[benign]    ") << t.name << ": " << t.bra_mean
                  << "% +- " << t.bra_std << "\n";
      std::cout << "detector AUC=" << report.roc.auc << "\n";
      if (!eval_out.empty()) {
        std::ofstream out(eval_out);
        if (!out) throw io_error("cannot write report: " + eval_out);
        out << report.to_json().dump(2) << "\n";
      }
      if (!plots_dir.empty()) {
        fs::create_directories(plots_dir);
        render_roc_plot(report.roc, (fs::path(plots_dir) / "roc.png").string());
        render_bra_bars(report, (fs::path(plots_dir) / "bra.png").string());
      }
      return 0;
    }

    if (app.got_subcommand(attack)) {
      auto bundle = load_model_checkpoint(atk_ckpt);
      auto manifest = Manifest::load(atk_data);
      SidecarPolygonProvider polygons;
      auto testset = FaceDataset::load(manifest, "test", polygons);
      if (testset.size() < 2 * pairs)
        throw config_error("need at least " + std::to_string(2 * pairs) + " test images for " +
                           std::to_string(pairs) + " pairs");
      auto src_idx = torch::arange(0, pairs, torch::kInt64);
      auto dst_idx = torch::arange(pairs, 2 * pairs, torch::kInt64);
      auto sources = testset.image_batch(src_idx);
      auto targets = testset.image_batch(dst_idx);
      auto messages = torch::empty({pairs, bundle.arch.message_bits}, torch::kFloat32);
      for (std::int64_t i = 0; i < pairs; ++i) {
        const std::string name = fs::path(testset.files[i]).filename().string();
        messages[i] = message_to_tensor(
            generate_message("faceseal-eval", name, static_cast<int>(bundle.arch.message_bits)));
      }
      double bra = perturbation_copy_attack(bundle, sources, targets, messages);
      std::cout << "transplant attack BRA over " << pairs << " pairs: " << bra << "% (chance 50%)\n";
      if (!atk_out.empty()) {
        std::ofstream out(atk_out);
        out << nlohmann::json{{"pairs", pairs}, {"attack_bra", bra}}.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return verify_chosen ? 2 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
