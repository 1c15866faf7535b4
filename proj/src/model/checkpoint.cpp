#include "tabcl/model/checkpoint.hpp"

#include "tabcl/errors.hpp"
#include "../json_codecs.hpp"

#include <cstring>
#include <fstream>

namespace tabcl {

namespace {

constexpr char kMagic[8] = {'T', 'B', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path + ": truncated checkpoint");
}

void put_vec(std::ofstream& out, const Vec& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * v.size()));
}

Vec get_vec(std::ifstream& in, const std::string& path) {
  std::uint64_t n = 0;
  get(in, n, path);
  Vec v(static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(Scalar) * v.size()));
  if (!in) throw FormatError(path + ": truncated checkpoint");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in, const std::string& path) {
  std::uint64_t n = 0;
  get(in, n, path);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError(path + ": truncated checkpoint");
  return s;
}

void put_running_stats(std::ofstream& out, const std::vector<HiddenBlock>& blocks) {
  std::uint64_t count = 0;
  for (const auto& b : blocks)
    if (b.batch_norm) ++count;
  put(out, count);
  for (const auto& b : blocks)
    if (b.batch_norm) {
      put_vec(out, b.batch_norm->running_mean);
      put_vec(out, b.batch_norm->running_var);
    }
}

void get_running_stats(std::ifstream& in, std::vector<HiddenBlock>& blocks,
                       const std::string& path) {
  std::uint64_t count = 0;
  get(in, count, path);
  std::uint64_t seen = 0;
  for (auto& b : blocks)
    if (b.batch_norm) {
      if (seen++ >= count) throw FormatError(path + ": running-stat count mismatch");
      b.batch_norm->running_mean = get_vec(in, path);
      b.batch_norm->running_var = get_vec(in, path);
    }
  if (seen != count) throw FormatError(path + ": running-stat count mismatch");
}

void put_optimizer(std::ofstream& out, const Optimizer* opt) {
  put(out, static_cast<std::uint8_t>(opt ? 1 : 0));
  if (!opt) return;
  put_string(out, optimizer_spec_to_json(opt->spec()).dump());
  put(out, static_cast<std::int64_t>(opt->step_count()));
  for (int which = 0; which < 2; ++which) {
    const auto& slots = opt->slot(which);
    put(out, static_cast<std::uint64_t>(slots.size()));
    for (const auto& s : slots) put_vec(out, s);
  }
}

bool get_optimizer(std::ifstream& in, Optimizer* opt, const std::string& path) {
  std::uint8_t present = 0;
  get(in, present, path);
  if (!present) return false;
  const std::string spec_json = get_string(in, path);
  std::int64_t steps = 0;
  get(in, steps, path);
  std::vector<Vec> slot0, slot1;
  for (int which = 0; which < 2; ++which) {
    std::uint64_t n = 0;
    get(in, n, path);
    auto& dst = which == 0 ? slot0 : slot1;
    for (std::uint64_t i = 0; i < n; ++i) dst.push_back(get_vec(in, path));
  }
  if (opt) {
    *opt = Optimizer(optimizer_spec_from_json(nlohmann::json::parse(spec_json)));
    opt->restore(std::move(slot0), std::move(slot1), steps);
  }
  return true;
}

void open_and_check(std::ifstream& in, const std::string& path, std::uint8_t expect_kind) {
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  std::uint8_t kind = 0;
  get(in, kind, path);
  if (kind != expect_kind)
    throw FormatError(path + ": checkpoint holds a different model kind");
}

} // namespace

void save_checkpoint(const std::string& path, ClassifierModel& model, const Optimizer* opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, std::uint8_t{0});
  put_string(out, mlp_config_to_json(model.config()).dump());
  put_vec(out, model.flat_params());
  put_running_stats(out, model.blocks());
  put_optimizer(out, opt);
  if (!out) throw IoError("write failed for " + path);
}

ClassifierModel load_classifier_checkpoint(const std::string& path, Optimizer* opt) {
  std::ifstream in(path, std::ios::binary);
  open_and_check(in, path, 0);
  const MLPConfig cfg = mlp_config_from_json(nlohmann::json::parse(get_string(in, path)));
  ClassifierModel model(cfg, 0);
  model.set_flat_params(get_vec(in, path));
  get_running_stats(in, model.blocks(), path);
  get_optimizer(in, opt, path);
  return model;
}

void save_checkpoint(const std::string& path, MergedGenerativeClassifier& model,
                     const Optimizer* opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, std::uint8_t{1});
  put_string(out, merged_config_to_json(model.config()).dump());

  Vec flat(model.n_params());
  Index at = 0;
  for (const auto& blob : model.blobs()) {
    flat.segment(at, blob.size) = Eigen::Map<const Vec>(blob.param, blob.size);
    at += blob.size;
  }
  put_vec(out, flat);
  put_running_stats(out, model.classifier().blocks());
  put_running_stats(out, model.decoder_blocks());
  put(out, static_cast<std::uint8_t>(model.lower_frozen() ? 1 : 0));

  const auto& registry = model.gating_registry();
  put(out, static_cast<std::uint64_t>(registry.size()));
  for (const auto& [class_id, masks] : registry) {
    put(out, static_cast<std::int32_t>(class_id));
    put(out, static_cast<std::uint64_t>(masks.size()));
    for (const auto& m : masks) put_vec(out, m);
  }
  put_optimizer(out, opt);
  if (!out) throw IoError("write failed for " + path);
}

MergedGenerativeClassifier load_merged_checkpoint(const std::string& path, Optimizer* opt) {
  std::ifstream in(path, std::ios::binary);
  open_and_check(in, path, 1);
  const MergedConfig cfg = merged_config_from_json(nlohmann::json::parse(get_string(in, path)));
  MergedGenerativeClassifier model(cfg, 0);
  const Vec flat = get_vec(in, path);
  if (flat.size() != model.n_params())
    throw FormatError(path + ": parameter count mismatch");
  Index at = 0;
  for (const auto& blob : model.blobs()) {
    Eigen::Map<Vec>(blob.param, blob.size) = flat.segment(at, blob.size);
    at += blob.size;
  }
  get_running_stats(in, model.classifier().blocks(), path);
  get_running_stats(in, model.decoder_blocks(), path);
  std::uint8_t frozen = 0;
  get(in, frozen, path);
  model.set_lower_frozen(frozen != 0);

  std::uint64_t n_classes = 0;
  get(in, n_classes, path);
  for (std::uint64_t i = 0; i < n_classes; ++i) {
    std::int32_t class_id = 0;
    get(in, class_id, path);
    std::uint64_t n_masks = 0;
    get(in, n_masks, path);
    std::vector<Vec> masks;
    for (std::uint64_t k = 0; k < n_masks; ++k) masks.push_back(get_vec(in, path));
    model.gating_registry().emplace(class_id, std::move(masks));
  }
  get_optimizer(in, opt, path);
  return model;
}

} // namespace tabcl
