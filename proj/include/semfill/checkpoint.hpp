#pragma once

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include "semfill/errors.hpp"

namespace semfill {

/// Binary container layout, little-endian:
///   "SEMFILL\0" | u32 version | u32 kind | u64 meta_len | meta JSON
///   | u64 n_blocks | blocks | 32-byte SHA-256 of everything before.
/// Block: u32 name_len | name | u8 dtype | u32 ndim | i64 dims[ndim]
///        | u64 n_bytes | raw bytes.
inline constexpr uint32_t kContainerVersion = 1;

enum class ContainerKind : uint32_t { Training = 1, Inference = 2 };

struct NamedTensor {
  std::string name;
  torch::Tensor value;
};

struct Container {
  ContainerKind kind = ContainerKind::Training;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> blocks;

  const torch::Tensor* find(const std::string& name) const;
  const torch::Tensor& at(const std::string& name) const;
};

std::string encode_container(const Container& c);
/// Throws CheckpointVersionError on a foreign version and
/// CheckpointIntegrityError on any truncation or digest mismatch.
Container decode_container(const std::string& bytes);

/// Atomic write (temp file + rename) of the container and a
/// `<path>.json` sidecar holding `sidecar` plus the digest.
void write_container(const std::filesystem::path& path, const Container& c,
                     nlohmann::json sidecar = nlohmann::json::object());
Container read_container(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

/// Appends every parameter and buffer of `module` as `<prefix>.<name>`.
void append_module(std::vector<NamedTensor>& blocks, const std::string& prefix,
                   const torch::nn::Module& module);
/// Copies `<prefix>.<name>` blocks into `module`; every parameter and buffer
/// must be present with a matching shape.
void restore_module(const Container& c, const std::string& prefix, torch::nn::Module& module);

/// Digest of the parameter and buffer bytes of `module`, as hex.
std::string module_hash(const torch::nn::Module& module);

}  // namespace semfill
