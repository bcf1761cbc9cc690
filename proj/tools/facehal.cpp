// facehal: data preparation, training, evaluation and serving front end.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fh/data_pipeline.hpp"
#include "fh/evaluation.hpp"
#include "fh/service.hpp"
#include "fh/synthetic_faces.hpp"
#include "fh/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fh::HttpServer* g_server = nullptr;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int prepare_data(const std::string& images, const std::string& attrs, const std::string& out,
                 std::optional<std::size_t> limit, std::uint64_t seed, std::optional<std::size_t> train_count) {
  auto records = fh::ingest_manifest(attrs, images, limit);
  const std::size_t k = train_count.value_or(records.size() * 9 / 10);
  auto [train, test] = fh::split_dataset(records, k, seed);
  std::vector<fh::SampleRecord> all = std::move(train);
  all.insert(all.end(), test.begin(), test.end());
  fh::write_manifest(out, all);
  std::cout << "wrote " << all.size() << " records (" << k << " train, " << all.size() - k << " test) to " << out
            << "\n";
  return 0;
}

int train(const std::string& config_path, const std::string& manifest, const std::string& resume,
          const std::string& output_dir) {
  fh::TrainConfig cfg = fh::load_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  std::optional<fs::path> resume_path;
  if (!resume.empty()) resume_path = resume;
  auto result = fh::run_training(cfg, fs::path(manifest), resume_path, [](const fh::StepLog& log) {
    std::cout << "step " << log.step << " epoch " << log.epoch << " stage " << log.stage;
    for (const auto& [name, v] : log.components) {
      if (name == "gen_l1" || name == "critic_total" || name == "gen_total") std::cout << ' ' << name << '=' << v;
    }
    std::cout << std::endl;
  });
  std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n";
  return 0;
}

int evaluate(const std::string& ckpt, const std::string& manifest, const std::string& source, const std::string& out,
             const std::string& csv, bool baseline) {
  fh::EvalReport report;
  if (baseline) {
    auto samples = fh::load_samples(fh::filter_split(fh::read_manifest(manifest), fh::Split::test));
    std::unique_ptr<fh::Model> model;
    if (!ckpt.empty()) model = fh::Model::load(ckpt);
    report = fh::bilinear_baseline(samples, model ? model->extractor.get() : nullptr);
  } else {
    if (ckpt.empty()) throw std::invalid_argument("--ckpt is required unless --baseline is given");
    report = fh::evaluate(ckpt, manifest, fh::attribute_source_from_string(source));
  }
  write_text(out, report.to_json().dump(2) + "\n");
  if (!csv.empty()) write_text(csv, report.to_csv());
  std::cout << report.method << " (" << report.attribute_source << ") over " << report.rows.size()
            << " images: PSNR " << report.mean.psnr_db << " dB, SSIM " << report.mean.ssim << "\n";
  return 0;
}

fh::Image load_lr(const fs::path& path) {
  fh::Image img = fh::load_image(path);
  if (img.height() == fh::kLrSize && img.width() == fh::kLrSize) return img;
  std::cerr << "note: " << path.string() << " is " << img.width() << "x" << img.height()
            << "; applying the crop/resize/downsample chain to obtain a 16x16 input\n";
  return fh::downsample(fh::prepare_hr(img), fh::kLrSize);
}

int infer(const std::string& ckpt, const std::string& in, const std::string& attrs_arg, bool stages,
          const std::string& out_dir) {
  auto svc = fh::Service::load(ckpt);
  const fh::Image lr = load_lr(in);
  json body = {{"return_stages", stages}, {"return_attribute_predictions", true}};
  const auto png = fh::encode_png(lr);
  body["lr_image"] = fh::base64_encode(png);
  if (!attrs_arg.empty()) {
    std::string text = attrs_arg;
    if (fs::exists(attrs_arg)) {
      std::ifstream f(attrs_arg);
      std::stringstream ss;
      ss << f.rdbuf();
      text = ss.str();
    }
    body["attributes"] = json::parse(text);
  }
  // Through the JSON entry point so the CLI and HTTP paths validate identically.
  const json resp = svc->handle_hallucinate(body);
  fs::create_directories(out_dir);
  for (const auto& [res, b64] : resp.at("outputs").items()) {
    const auto bytes = fh::base64_decode(b64.get<std::string>());
    const fs::path p = fs::path(out_dir) / ("sr_" + res + ".png");
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                             static_cast<std::streamsize>(bytes.size()));
    std::cout << "wrote " << p.string() << "\n";
  }
  json summary = resp;
  summary.erase("outputs");
  write_text(fs::path(out_dir) / "response.json", summary.dump(2) + "\n");
  return 0;
}

int serve(const std::string& ckpt, const std::string& host, int port) {
  auto svc = fh::Service::load(ckpt);
  fh::HttpServer server(*svc);
  if (!server.bind(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving on http://" << host << ":" << port << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-conditioned 16x16 -> 128x128 face hallucination"};
  app.require_subcommand(1);

  auto* prep = app.add_subcommand("prepare-data", "Ingest a CelebA-style corpus into a JSON-lines manifest");
  std::string images, attrs, manifest_out;
  std::optional<std::size_t> limit, train_count;
  std::uint64_t split_seed = 0;
  prep->add_option("--images", images, "Image directory")->required()->check(CLI::ExistingDirectory);
  prep->add_option("--attrs", attrs, "Attribute listing")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", manifest_out, "Output manifest")->required();
  prep->add_option("--limit", limit, "Only ingest the first N rows");
  prep->add_option("--seed", split_seed, "Split seed");
  prep->add_option("--train-count", train_count, "Training records (default 90%)");

  auto* tr = app.add_subcommand("train", "Progressive training");
  std::string config, manifest, resume, output_dir;
  tr->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--manifest", manifest, "Manifest")->required()->check(CLI::ExistingFile);
  tr->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  tr->add_option("--output-dir", output_dir, "Override output_dir");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  std::string ckpt, source = "classifier", report_out, csv_out;
  bool baseline = false;
  ev->add_option("--ckpt", ckpt, "Stage-3 checkpoint");
  ev->add_option("--manifest", manifest, "Manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--attr-source", source, "classifier or gt")->check(CLI::IsMember({"classifier", "gt"}));
  ev->add_option("--out", report_out, "JSON report")->required();
  ev->add_option("--csv", csv_out, "Optional per-image CSV");
  ev->add_flag("--baseline", baseline, "Score bilinear upsampling instead of the generator");

  auto* inf = app.add_subcommand("infer", "Hallucinate one image");
  std::string in_img, attrs_json, out_dir;
  bool stages = false;
  inf->add_option("--ckpt", ckpt, "Stage-3 checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--in", in_img, "Input image")->required()->check(CLI::ExistingFile);
  inf->add_option("--attrs", attrs_json, "JSON attribute array/object, or a file holding one");
  inf->add_flag("--stages", stages, "Also write the 32 and 64 outputs");
  inf->add_option("--out", out_dir, "Output directory")->required();

  auto* srv = app.add_subcommand("serve", "HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  srv->add_option("--ckpt", ckpt, "Stage-3 checkpoint")->required()->check(CLI::ExistingFile);
  srv->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  srv->add_option("--host", host, "Bind address");

  auto* syn = app.add_subcommand("synth-faces", "Write a procedural face corpus in the CelebA layout");
  std::string syn_out;
  int count = 64;
  std::uint64_t syn_seed = 1;
  syn->add_option("--out", syn_out, "Output directory")->required();
  syn->add_option("--count", count, "Number of faces")->check(CLI::NonNegativeNumber);
  syn->add_option("--seed", syn_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) return prepare_data(images, attrs, manifest_out, limit, split_seed, train_count);
    if (*tr) return train(config, manifest, resume, output_dir);
    if (*ev) return evaluate(ckpt, manifest, source, report_out, csv_out, baseline);
    if (*inf) return infer(ckpt, in_img, attrs_json, stages, out_dir);
    if (*srv) return serve(ckpt, host, port);
    if (*syn) {
      const auto file = fh::write_synthetic_corpus(syn_out, count, syn_seed);
      std::cout << "wrote " << count << " faces and " << file.string() << "\n";
      return 0;
    }
  } catch (const fh::ServiceError& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
