#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stgan/gan.hpp"
#include "stgan/skipthought.hpp"
#include "stgan/tensor.hpp"

namespace stgan::ckpt {

using nd::Tensor;
using KeyValues = std::map<std::string, std::string>;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr int kFormatVersion = 1;

// File layout: u64 LE manifest length, manifest (key=value lines), then the
// tensors as contiguous little-endian float32 in index order.
struct TensorInfo {
  std::string name;
  nd::Shape shape;
  std::uint64_t offset = 0;  // bytes into the payload
  std::string dtype = "f32le";
};

struct Checkpoint {
  int version = kFormatVersion;
  std::string kind;
  KeyValues config;
  std::vector<TensorInfo> index;
  NamedTensors tensors;  // 64-bit values widened from the stored floats

  const Tensor& at(const std::string& name) const;
};

void save(const std::filesystem::path& path, const std::string& kind, const KeyValues& config,
          const NamedTensors& tensors);
/// Throws std::runtime_error on a malformed file, version mismatch, or when
/// `expected_kind` is non-empty and differs.
Checkpoint load(const std::filesystem::path& path, const std::string& expected_kind = {});

/// Copies stored values into `params` by name; names and shapes must match exactly.
void assign(const Checkpoint& ckpt, const NamedTensors& params);

KeyValues to_kv(const st::SkipThoughtConfig& c);
st::SkipThoughtConfig st_config_from(const KeyValues& kv);
KeyValues to_kv(const gan::GanConfig& c);
gan::GanConfig gan_config_from(const KeyValues& kv);

void save_model(const std::filesystem::path& path, const st::SkipThoughtModel& model);
st::SkipThoughtModel load_model(const std::filesystem::path& path);
void save_decoder(const std::filesystem::path& path, const st::Decoder& decoder);
st::Decoder load_decoder(const std::filesystem::path& path);
void save_gan(const std::filesystem::path& path, const gan::GanModel& model);
gan::GanModel load_gan(const std::filesystem::path& path);
/// A row matrix stored as one tensor "rows".
void save_rows(const std::filesystem::path& path, const std::string& kind, const gan::Rows& rows,
               const KeyValues& config = {});
gan::Rows load_rows(const std::filesystem::path& path, const std::string& kind, KeyValues* config = nullptr);

}  // namespace stgan::ckpt
