#pragma once

#include <opencv2/core.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semfill/types.hpp"

namespace semfill {

// 8-bit <-> [-1, 1]: x / 127.5 - 1 and its inverse.
torch::Tensor normalize_u8(const torch::Tensor& u8);
torch::Tensor denormalize_to_u8(const torch::Tensor& normalized);

/// Reads an image as 8-bit RGB. Throws Error when unreadable.
cv::Mat read_rgb(const std::filesystem::path& path);
cv::Mat decode_rgb(const std::vector<uint8_t>& bytes);

/// 8-bit HxWx3 RGB -> 1×3×H×W normalized float.
torch::Tensor rgb_to_tensor(const cv::Mat& rgb);
/// 3×H×W or 1×3×H×W normalized -> 8-bit RGB.
cv::Mat tensor_to_rgb(const torch::Tensor& image);

cv::Mat resize_rgb(const cv::Mat& rgb, int size);

void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb);
std::vector<uint8_t> encode_rgb_png(const cv::Mat& rgb);

/// Single-channel mask PNG: 0 = known, 255 = missing. Pixels > 127 read as missing.
MaskBatch read_mask_png(const std::filesystem::path& path);
MaskBatch decode_mask_png(const std::vector<uint8_t>& bytes);
MaskBatch mask_from_gray(const cv::Mat& gray);
cv::Mat mask_to_gray(const MaskBatch& mask, int64_t index = 0);
void write_mask_png(const std::filesystem::path& path, const MaskBatch& mask,
                    int64_t index = 0);
MaskBatch resize_mask(const MaskBatch& mask, int64_t size);

/// Label PNG: pixel value = class index. Returns H×W int64.
torch::Tensor read_label_png(const std::filesystem::path& path, int size);

/// Keeps `input` bytes where mask is 0 and takes the quantized prediction in
/// the hole, so known pixels are byte-identical to the input.
cv::Mat composite_rgb(const cv::Mat& input, const torch::Tensor& prediction,
                      const MaskBatch& mask, int64_t index = 0);

}  // namespace semfill
