#include "fh/data_pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "fh/kernels.hpp"

namespace fh {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Header column names accepted for each schema attribute.
std::vector<std::string> column_candidates(std::string_view schema_name) {
  std::string underscored(schema_name);
  std::replace(underscored.begin(), underscored.end(), ' ', '_');
  std::vector<std::string> out{underscored};
  if (schema_name == "Mouth Open") out.emplace_back("Mouth_Slightly_Open");
  if (schema_name == "Pale") out.emplace_back("Pale_Skin");
  return out;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_count_line(const std::vector<std::string>& toks) {
  return toks.size() == 1 && !toks[0].empty() &&
         std::all_of(toks[0].begin(), toks[0].end(), [](char c) { return c >= '0' && c <= '9'; });
}

Tensor image_tensor(const Image& img) { return img.to_tensor(); }

}  // namespace

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

std::vector<SampleRecord> ingest_manifest(const fs::path& attribute_file, const fs::path& image_dir,
                                          std::optional<std::size_t> limit) {
  std::ifstream in(attribute_file);
  if (!in) throw DataError("cannot open attribute file " + attribute_file.string());

  std::vector<SampleRecord> records;
  std::vector<int> column_of(kNumAttributes, -1);
  std::size_t header_columns = 0;
  bool have_header = false;
  bool first_content = true;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (first_content) {
      first_content = false;
      if (is_count_line(toks)) continue;
    }
    if (!have_header) {
      header_columns = toks.size();
      for (int a = 0; a < kNumAttributes; ++a) {
        for (const auto& cand : column_candidates(kAttributeNames[static_cast<std::size_t>(a)])) {
          auto it = std::find(toks.begin(), toks.end(), cand);
          if (it != toks.end()) {
            column_of[static_cast<std::size_t>(a)] = static_cast<int>(it - toks.begin());
            break;
          }
        }
        if (column_of[static_cast<std::size_t>(a)] < 0) {
          throw DataError("attribute header has no column for schema attribute '" +
                              std::string(kAttributeNames[static_cast<std::size_t>(a)]) + "'",
                          line_no);
        }
      }
      have_header = true;
      continue;
    }
    if (limit && records.size() >= *limit) break;

    if (toks.size() != header_columns + 1) {
      throw DataError("expected " + std::to_string(header_columns + 1) + " fields, found " +
                          std::to_string(toks.size()),
                      line_no);
    }
    SampleRecord rec;
    rec.id = toks[0];
    for (int a = 0; a < kNumAttributes; ++a) {
      const std::string& v = toks[static_cast<std::size_t>(column_of[static_cast<std::size_t>(a)]) + 1];
      if (v == "1" || v == "+1") {
        rec.attributes[a] = 1.0;
      } else if (v == "-1" || v == "0") {
        rec.attributes[a] = 0.0;
      } else {
        throw DataError("value '" + v + "' for '" + std::string(kAttributeNames[static_cast<std::size_t>(a)]) +
                            "' is not one of -1, 0, 1",
                        line_no);
      }
    }
    if (!seen.insert(rec.id).second) throw DataError("duplicate id " + rec.id, line_no);
    const fs::path image = image_dir / rec.id;
    if (!fs::exists(image)) throw DataError("missing image file for id " + rec.id + " (" + image.string() + ")");
    rec.image_path = image.string();
    records.push_back(std::move(rec));
  }
  return records;
}

Image prepare_hr(const Image& raw) {
  if (raw.height() < kCropSize || raw.width() < kCropSize) {
    throw std::invalid_argument("image is " + std::to_string(raw.width()) + "x" + std::to_string(raw.height()) +
                                "; at least " + std::to_string(kCropSize) + "x" + std::to_string(kCropSize) +
                                " is required");
  }
  const int y0 = (raw.height() - kCropSize) / 2;
  const int x0 = (raw.width() - kCropSize) / 2;
  Image crop(kCropSize, kCropSize);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < kCropSize; ++y)
      for (int x = 0; x < kCropSize; ++x) crop.at(y, x, c) = raw.at(y0 + y, x0 + x, c);
  Tensor resized = kernels::resize_bilinear(image_tensor(crop), kHrSize, kHrSize);
  return Image::from_tensor(resized).clamped();
}

Image downsample(const Image& image, int out_size) {
  if (image.height() != image.width()) throw std::invalid_argument("downsample expects a square image");
  if (out_size < 1 || image.height() % out_size != 0) {
    throw std::invalid_argument("output size " + std::to_string(out_size) + " does not divide input size " +
                                std::to_string(image.height()));
  }
  return Image::from_tensor(kernels::downsample_area(image_tensor(image), image.height() / out_size));
}

Image upsample_bilinear(const Image& image, int out_size) {
  return Image::from_tensor(kernels::resize_bilinear(image_tensor(image), out_size, out_size));
}

TrainingSample make_training_sample(const std::string& id, const Image& raw, const AttributeVector& attributes) {
  TrainingSample s;
  s.id = id;
  Image hr = prepare_hr(raw);
  s.lr = downsample(hr, kLrSize);
  s.targets[32] = downsample(hr, 32);
  s.targets[64] = downsample(hr, 64);
  s.targets[128] = std::move(hr);
  s.attributes = attributes;
  return s;
}

TrainingSample make_training_sample(const SampleRecord& record) {
  return make_training_sample(record.id, load_image(record.image_path), record.attributes);
}

std::vector<TrainingSample> load_samples(const std::vector<SampleRecord>& records) {
  std::vector<TrainingSample> out(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  const auto n = static_cast<std::ptrdiff_t>(records.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = make_training_sample(records[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_dataset(const std::vector<SampleRecord>& records,
                                                                              std::size_t train_count,
                                                                              std::uint64_t seed) {
  if (train_count > records.size()) {
    throw std::invalid_argument("train count " + std::to_string(train_count) + " exceeds record count " +
                                std::to_string(records.size()));
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> in_train(records.size(), 0);
  for (std::size_t i = 0; i < train_count; ++i) in_train[order[i]] = 1;

  std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    SampleRecord r = records[i];
    r.split = in_train[i] ? Split::train : Split::test;
    (in_train[i] ? out.first : out.second).push_back(std::move(r));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    fs::path image = fs::absolute(r.image_path).lexically_normal();
    fs::path rel = image.lexically_relative(base);
    json j = {{"id", r.id},
              {"image_path", rel.empty() ? image.string() : rel.string()},
              {"attributes", r.attributes.values},
              {"split", to_string(r.split)}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

std::vector<SampleRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<SampleRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      SampleRecord r;
      r.id = j.at("id").get<std::string>();
      fs::path p = j.at("image_path").get<std::string>();
      r.image_path = (p.is_absolute() ? p : base / p).string();
      r.attributes = AttributeVector::from_span(j.at("attributes").get<std::vector<double>>());
      r.attributes.validate();
      r.split = split_from_string(j.at("split").get<std::string>());
      if (!seen.insert(r.id).second) throw DataError("duplicate id " + r.id);
      records.push_back(std::move(r));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    } catch (const std::exception& e) {
      throw DataError(std::string("malformed manifest row: ") + e.what(), line_no);
    }
  }
  return records;
}

std::vector<SampleRecord> filter_split(const std::vector<SampleRecord>& records, Split split) {
  std::vector<SampleRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const SampleRecord& r) { return r.split == split; });
  return out;
}

}  // namespace fh
