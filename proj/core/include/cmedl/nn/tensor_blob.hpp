#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cmedl::nn {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

// "CMW1" u32 count, then per tensor:
//   u16 name_len, name, u8 dtype (0 f32, 1 f64, 2 i64, 3 u8), u8 ndim, ndim x i64 dims, raw LE bytes
std::vector<char> encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const std::vector<char>& bytes, const std::string& context);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

/// FNV-1a over names, dtypes, shapes and raw bytes.
std::uint64_t hash_tensors(const NamedTensors& tensors);
std::string hex64(std::uint64_t v);

/// Parameters then buffers, each name prefixed with `prefix.`.
NamedTensors module_state(const torch::nn::Module& m, const std::string& prefix);
NamedTensors module_parameters(const torch::nn::Module& m, const std::string& prefix);

}  // namespace cmedl::nn
