#include "fh/evaluation.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "fh/metrics.hpp"

namespace fh {
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

EvalRow score(const std::string& id, const Image& sr, const Image& lr, const Image& gt,
              const FeatureExtractor* extractor) {
  EvalRow r;
  r.id = id;
  const Image clamped = sr.clamped();
  r.psnr_db = psnr(clamped, gt);
  r.ssim = ssim(clamped, gt);
  if (extractor) {
    r.cos_lr_gt = feature_cosine(upsample_bilinear(lr, kHrSize), gt, *extractor);
    r.cos_sr_gt = feature_cosine(clamped, gt, *extractor);
  } else {
    r.cos_lr_gt = r.cos_sr_gt = kNan;
  }
  return r;
}

// Parallel over images; rows land in input order whatever the thread count.
template <typename Fn>
std::vector<EvalRow> score_all(const std::vector<TrainingSample>& samples, Fn&& fn) {
  std::vector<EvalRow> rows(samples.size());
  std::vector<std::exception_ptr> errors(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      rows[static_cast<std::size_t>(i)] = fn(samples[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json row_json(const EvalRow& r) {
  return {{"id", r.id},
          {"psnr_db", number_or_null(r.psnr_db)},
          {"ssim", number_or_null(r.ssim)},
          {"cos_lr_gt", number_or_null(r.cos_lr_gt)},
          {"cos_sr_gt", number_or_null(r.cos_sr_gt)}};
}

}  // namespace

std::string to_string(AttributeSource s) { return s == AttributeSource::classifier ? "classifier" : "gt"; }

AttributeSource attribute_source_from_string(const std::string& s) {
  if (s == "classifier") return AttributeSource::classifier;
  if (s == "gt" || s == "ground_truth") return AttributeSource::ground_truth;
  throw std::invalid_argument("attribute source must be 'classifier' or 'gt', got '" + s + "'");
}

void EvalReport::aggregate() {
  mean = EvalRow{};
  mean.id = "mean";
  if (rows.empty()) {
    mean.psnr_db = mean.ssim = mean.cos_lr_gt = mean.cos_sr_gt = kNan;
    return;
  }
  for (const auto& r : rows) {
    mean.psnr_db += r.psnr_db;
    mean.ssim += r.ssim;
    mean.cos_lr_gt += r.cos_lr_gt;
    mean.cos_sr_gt += r.cos_sr_gt;
  }
  const double n = static_cast<double>(rows.size());
  mean.psnr_db /= n;
  mean.ssim /= n;
  mean.cos_lr_gt /= n;
  mean.cos_sr_gt /= n;
}

json EvalReport::to_json() const {
  json j;
  j["method"] = method;
  j["attribute_source"] = attribute_source;
  j["conventions"] = {{"psnr", "RGB channels jointly, peak 1.0, capped at 100 dB"},
                      {"ssim", "ITU-R BT.601 luma, 11x11 Gaussian window sigma 1.5, valid positions only"},
                      {"feature_layer", feature_layer.empty() ? json(nullptr) : json(feature_layer)}};
  j["count"] = rows.size();
  json m = row_json(mean);
  m.erase("id");
  j["mean"] = m;
  json rs = json::array();
  for (const auto& r : rows) rs.push_back(row_json(r));
  j["rows"] = rs;
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "id,psnr_db,ssim,cos_lr_gt,cos_sr_gt\n";
  for (const auto& r : rows) {
    out << r.id << ',' << r.psnr_db << ',' << r.ssim << ',' << r.cos_lr_gt << ',' << r.cos_sr_gt << '\n';
  }
  return out.str();
}

EvalReport evaluate(const Model& model, const std::vector<TrainingSample>& samples, AttributeSource source) {
  if (model.stage != 3) {
    throw std::invalid_argument("evaluation needs a stage-3 checkpoint; this one is at stage " +
                                std::to_string(model.stage));
  }
  EvalReport report;
  report.method = "generator";
  report.attribute_source = to_string(source);
  report.feature_layer = model.extractor->layer();
  report.rows = score_all(samples, [&](const TrainingSample& s) {
    const AttributeVector attrs =
        source == AttributeSource::classifier ? model.nets.classifier.classify(s.lr) : s.attributes;
    const Image sr = model.nets.generator.generate(s.lr, attrs, 3).back();
    return score(s.id, sr, s.lr, s.targets.at(kHrSize), model.extractor.get());
  });
  report.aggregate();
  return report;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                    AttributeSource source) {
  auto model = Model::load(checkpoint);
  if (model->stage != 3) {
    throw std::invalid_argument("evaluation needs a stage-3 checkpoint; " + checkpoint.string() + " is at stage " +
                                std::to_string(model->stage));
  }
  return evaluate(*model, load_samples(filter_split(read_manifest(manifest), Split::test)), source);
}

EvalReport bilinear_baseline(const std::vector<TrainingSample>& samples, const FeatureExtractor* extractor) {
  EvalReport report;
  report.method = "bilinear";
  report.attribute_source = "none";
  report.feature_layer = extractor ? extractor->layer() : "";
  report.rows = score_all(samples, [&](const TrainingSample& s) {
    return score(s.id, upsample_bilinear(s.lr, kHrSize), s.lr, s.targets.at(kHrSize), extractor);
  });
  report.aggregate();
  return report;
}

}  // namespace fh
