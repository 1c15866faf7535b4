#include "tabcl/data/dataset.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/math.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace tabcl {

namespace {

using nlohmann::json;

std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(strip(std::string_view(line).substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

Scalar parse_double(const std::string& tok, const std::string& where) {
  Scalar v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v, std::chars_format::general);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v))
    throw FormatError("bad numeric value '" + tok + "' in " + where);
  return v;
}

int parse_int(const std::string& tok, const std::string& where) {
  int v = 0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw SchemaError("bad integer value '" + tok + "' in " + where);
  return v;
}

std::vector<std::string> default_class_names(int n_classes) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

void finalize(LabeledDataset& ds) {
  if (ds.class_names.empty()) {
    const int n_classes = ds.labels.size() > 0 ? ds.labels.maxCoeff() + 1 : 0;
    ds.class_names = default_class_names(n_classes);
  }
  ds.feature_kind = detect_feature_kind(ds.features);
  ds.validate();
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || strip(line).empty())
    throw FormatError(path + ": empty file");

  const auto header = split_csv_line(line);
  bool has_month = false;
  std::size_t d = 0;
  if (header.size() >= 2 && header.back() == "month" &&
      header[header.size() - 2] == "label") {
    has_month = true;
    d = header.size() - 2;
  } else if (!header.empty() && header.back() == "label") {
    d = header.size() - 1;
  } else {
    throw FormatError(path + ": header must end with 'label' or 'label,month'");
  }
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != "f" + std::to_string(j))
      throw FormatError(path + ": feature column " + std::to_string(j) +
                        " must be named f" + std::to_string(j));

  std::vector<Scalar> values;
  std::vector<int> labels;
  std::vector<int> months;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    const auto toks = split_csv_line(line);
    if (toks.size() != header.size())
      throw FormatError(path + ": row " + std::to_string(row) + " has " +
                        std::to_string(toks.size()) + " fields, expected " +
                        std::to_string(header.size()));
    const std::string where = path + " row " + std::to_string(row);
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(toks[j], where));
    labels.push_back(parse_int(toks[d], where));
    if (has_month) months.push_back(parse_int(toks[d + 1], where));
  }
  if (labels.empty()) throw FormatError(path + ": no data rows");

  LabeledDataset ds;
  const Index n = static_cast<Index>(labels.size());
  ds.features = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>(
      values.data(), n, static_cast<Index>(d));
  ds.labels = Eigen::Map<IntVec>(labels.data(), n);
  ds.month = std::move(months);
  finalize(ds);
  return ds;
}

LabeledDataset load_jsonlines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  // Optional sidecar fixes the class-name universe for string labels.
  std::vector<std::string> sidecar_names;
  std::unordered_map<std::string, int> name_to_id;
  const std::string sidecar = path + ".classes.json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream sc(sidecar);
    json doc = json::parse(sc, nullptr, true);
    if (!doc.is_array()) throw SchemaError(sidecar + ": expected a JSON array of class names");
    for (const auto& item : doc) {
      name_to_id.emplace(item.get<std::string>(), static_cast<int>(sidecar_names.size()));
      sidecar_names.push_back(item.get<std::string>());
    }
  }
  const bool strict_names = !sidecar_names.empty();

  std::vector<Scalar> values;
  std::vector<int> labels;
  std::vector<int> months;
  Index d = -1;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path + " line " + std::to_string(row) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("features") || !obj.contains("label"))
      throw SchemaError(path + " line " + std::to_string(row) +
                        ": object with 'features' and 'label' required");
    const auto& feats = obj["features"];
    if (!feats.is_array())
      throw SchemaError(path + " line " + std::to_string(row) + ": 'features' must be an array");
    if (d < 0) d = static_cast<Index>(feats.size());
    if (static_cast<Index>(feats.size()) != d)
      throw FormatError(path + " line " + std::to_string(row) + ": ragged feature vector");
    for (const auto& v : feats) values.push_back(v.get<Scalar>());

    const auto& lab = obj["label"];
    if (lab.is_number_integer()) {
      labels.push_back(lab.get<int>());
    } else if (lab.is_string()) {
      const std::string name = lab.get<std::string>();
      auto it = name_to_id.find(name);
      if (it == name_to_id.end()) {
        if (strict_names)
          throw SchemaError(path + " line " + std::to_string(row) +
                            ": unknown label string '" + name + "'");
        it = name_to_id.emplace(name, static_cast<int>(sidecar_names.size())).first;
        sidecar_names.push_back(name);
      }
      labels.push_back(it->second);
    } else {
      throw SchemaError(path + " line " + std::to_string(row) + ": label must be int or string");
    }

    if (obj.contains("month")) {
      months.push_back(obj["month"].get<int>());
    } else if (!months.empty()) {
      throw SchemaError(path + " line " + std::to_string(row) + ": month missing on some rows");
    }
  }
  if (labels.empty()) throw FormatError(path + ": empty file");
  if (!months.empty() && months.size() != labels.size())
    throw SchemaError(path + ": month missing on some rows");

  LabeledDataset ds;
  const Index n = static_cast<Index>(labels.size());
  ds.features = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>(values.data(), n, d);
  ds.labels = Eigen::Map<IntVec>(labels.data(), n);
  ds.month = std::move(months);
  ds.class_names = std::move(sidecar_names);
  if (!ds.class_names.empty()) {
    const int max_label = ds.labels.maxCoeff();
    if (max_label >= static_cast<int>(ds.class_names.size()))
      throw SchemaError(path + ": integer label exceeds sidecar class map");
  }
  finalize(ds);
  return ds;
}

constexpr char kCacheMagic[8] = {'T', 'A', 'B', 'C', 'L', 'D', 'S', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path + ": truncated cache file");
}

} // namespace

std::vector<Index> LabeledDataset::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(n_classes()), 0);
  for (Index i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c >= 0 && c < n_classes()) ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

void LabeledDataset::validate() const {
  if (labels.size() != features.rows())
    throw DimensionError("dataset: label count does not match sample count");
  if (!month.empty() && static_cast<Index>(month.size()) != features.rows())
    throw SchemaError("dataset: month defined for only part of the samples");
  if (!features.allFinite())
    throw SchemaError("dataset: non-finite feature values");
  const int k = n_classes();
  for (Index i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= k)
      throw SchemaError("dataset: label " + std::to_string(labels[i]) +
                        " outside [0, " + std::to_string(k) + ")");
  for (const int m : month)
    if (m < 0) throw SchemaError("dataset: negative month bucket");
}

FeatureKind detect_feature_kind(const Mat& features) {
  const bool boolean =
      ((features.array() == 0.0) || (features.array() == 1.0)).all();
  return boolean ? FeatureKind::boolean : FeatureKind::real;
}

std::uint64_t fnv1a_hash(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string cache_path_for(const std::string& source_path) {
  return source_path + ".tbc";
}

void write_binary_cache(const LabeledDataset& ds, const std::string& path,
                        std::uint64_t source_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_pod(out, std::uint32_t{1});
  write_pod(out, source_hash);
  write_pod(out, static_cast<std::uint64_t>(ds.n_samples()));
  write_pod(out, static_cast<std::uint64_t>(ds.n_features()));
  write_pod(out, static_cast<std::uint8_t>(ds.feature_kind == FeatureKind::boolean ? 1 : 0));
  write_pod(out, static_cast<std::uint8_t>(ds.has_month() ? 1 : 0));
  write_pod(out, static_cast<std::uint32_t>(ds.class_names.size()));
  for (const auto& name : ds.class_names) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  out.write(reinterpret_cast<const char*>(ds.features.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * ds.features.size()));
  out.write(reinterpret_cast<const char*>(ds.labels.data()),
            static_cast<std::streamsize>(sizeof(int) * ds.labels.size()));
  if (ds.has_month())
    out.write(reinterpret_cast<const char*>(ds.month.data()),
              static_cast<std::streamsize>(sizeof(int) * ds.month.size()));
  if (!out) throw IoError("write failed for " + path);
}

LabeledDataset read_binary_cache(const std::string& path, std::uint64_t* source_hash_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw FormatError(path + ": not a dataset cache file (bad magic)");
  std::uint32_t version = 0;
  read_pod(in, version, path);
  if (version != 1)
    throw FormatError(path + ": unsupported cache version " + std::to_string(version));
  std::uint64_t source_hash = 0, n = 0, d = 0;
  std::uint8_t boolean = 0, has_month = 0;
  std::uint32_t n_names = 0;
  read_pod(in, source_hash, path);
  read_pod(in, n, path);
  read_pod(in, d, path);
  read_pod(in, boolean, path);
  read_pod(in, has_month, path);
  read_pod(in, n_names, path);
  LabeledDataset ds;
  ds.class_names.reserve(n_names);
  for (std::uint32_t i = 0; i < n_names; ++i) {
    std::uint32_t len = 0;
    read_pod(in, len, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw FormatError(path + ": truncated cache file");
    ds.class_names.push_back(std::move(name));
  }
  ds.features.resize(static_cast<Index>(n), static_cast<Index>(d));
  in.read(reinterpret_cast<char*>(ds.features.data()),
          static_cast<std::streamsize>(sizeof(Scalar) * ds.features.size()));
  ds.labels.resize(static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(ds.labels.data()),
          static_cast<std::streamsize>(sizeof(int) * ds.labels.size()));
  if (has_month) {
    ds.month.resize(n);
    in.read(reinterpret_cast<char*>(ds.month.data()),
            static_cast<std::streamsize>(sizeof(int) * ds.month.size()));
  }
  if (!in) throw FormatError(path + ": truncated cache file");
  ds.feature_kind = boolean ? FeatureKind::boolean : FeatureKind::real;
  ds.validate();
  if (source_hash_out) *source_hash_out = source_hash;
  return ds;
}

LabeledDataset load_tabular(const std::string& path, TabularFormat format) {
  if (format == TabularFormat::binary_cache) return read_binary_cache(path);

  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
  const std::uint64_t source_hash = fnv1a_file_hash(path);
  const std::string cache = cache_path_for(path);
  if (std::filesystem::exists(cache)) {
    try {
      std::uint64_t cached_hash = 0;
      LabeledDataset ds = read_binary_cache(cache, &cached_hash);
      if (cached_hash == source_hash) return ds;
    } catch (const FormatError&) {
      // stale or damaged cache, fall through to a fresh parse
    }
  }
  LabeledDataset ds = format == TabularFormat::csv ? load_csv(path) : load_jsonlines(path);
  write_binary_cache(ds, cache, source_hash);
  return ds;
}

} // namespace tabcl
