#include "semfill/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace semfill {

torch::Tensor normalize_u8(const torch::Tensor& u8) {
  return u8.to(torch::kFloat) / 127.5f - 1.0f;
}

torch::Tensor denormalize_to_u8(const torch::Tensor& normalized) {
  auto x = (normalized.detach().to(torch::kFloat) + 1.0f) * 127.5f;
  return x.round().clamp(0, 255).to(torch::kUInt8);
}

cv::Mat read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("cannot read image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat decode_rgb(const std::vector<uint8_t>& bytes) {
  if (bytes.empty()) throw Error("empty image payload");
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("cannot decode image payload");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

torch::Tensor rgb_to_tensor(const cv::Mat& rgb) {
  if (rgb.type() != CV_8UC3) throw Error("rgb_to_tensor expects 8-bit RGB");
  cv::Mat cont = rgb.isContinuous() ? rgb : rgb.clone();
  auto t = torch::from_blob(cont.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8);
  return normalize_u8(t.permute({2, 0, 1}).unsqueeze(0)).contiguous();
}

cv::Mat tensor_to_rgb(const torch::Tensor& image) {
  auto t = image.dim() == 4 ? image[0] : image;
  if (t.dim() != 3 || t.size(0) != 3) throw ShapeError("tensor_to_rgb expects 3×H×W");
  auto u8 = denormalize_to_u8(t).permute({1, 2, 0}).contiguous();
  cv::Mat out(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3);
  std::memcpy(out.data, u8.data_ptr<uint8_t>(), static_cast<size_t>(u8.numel()));
  return out;
}

cv::Mat resize_rgb(const cv::Mat& rgb, int size) {
  if (rgb.rows == size && rgb.cols == size) return rgb;
  cv::Mat out;
  const bool shrink = rgb.rows > size || rgb.cols > size;
  cv::resize(rgb, out, cv::Size(size, size), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw Error("cannot write " + path.string());
}

std::vector<uint8_t> encode_rgb_png(const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<uint8_t> buf;
  if (!cv::imencode(".png", bgr, buf)) throw Error("PNG encoding failed");
  return buf;
}

MaskBatch mask_from_gray(const cv::Mat& gray) {
  if (gray.type() != CV_8UC1) throw Error("mask must be single-channel 8-bit");
  cv::Mat cont = gray.isContinuous() ? gray : gray.clone();
  auto t = torch::from_blob(cont.data, {1, 1, gray.rows, gray.cols}, torch::kUInt8);
  return MaskBatch((t > 127).to(torch::kFloat));
}

MaskBatch read_mask_png(const std::filesystem::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("cannot read mask: " + path.string());
  return mask_from_gray(gray);
}

MaskBatch decode_mask_png(const std::vector<uint8_t>& bytes) {
  if (bytes.empty()) throw Error("empty mask payload");
  cv::Mat gray = cv::imdecode(bytes, cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("cannot decode mask payload");
  return mask_from_gray(gray);
}

cv::Mat mask_to_gray(const MaskBatch& mask, int64_t index) {
  auto m = (mask.data()[index][0] > 0.5).to(torch::kUInt8).mul(255).contiguous();
  cv::Mat out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), CV_8UC1);
  std::memcpy(out.data, m.data_ptr<uint8_t>(), static_cast<size_t>(m.numel()));
  return out;
}

void write_mask_png(const std::filesystem::path& path, const MaskBatch& mask,
                    int64_t index) {
  if (!cv::imwrite(path.string(), mask_to_gray(mask, index))) {
    throw Error("cannot write " + path.string());
  }
}

MaskBatch resize_mask(const MaskBatch& mask, int64_t size) {
  if (mask.height() == size && mask.width() == size) return mask;
  auto m = torch::nn::functional::interpolate(
      mask.data().to(torch::kFloat),
      torch::nn::functional::InterpolateFuncOptions()
          .size(std::vector<int64_t>{size, size})
          .mode(torch::kNearest));
  return MaskBatch(m);
}

torch::Tensor read_label_png(const std::filesystem::path& path, int size) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("cannot read label map: " + path.string());
  if (gray.rows != size || gray.cols != size) {
    cv::Mat resized;
    cv::resize(gray, resized, cv::Size(size, size), 0, 0, cv::INTER_NEAREST);
    gray = resized;
  }
  cv::Mat cont = gray.isContinuous() ? gray : gray.clone();
  return torch::from_blob(cont.data, {gray.rows, gray.cols}, torch::kUInt8)
      .to(torch::kLong)
      .clone();
}

cv::Mat composite_rgb(const cv::Mat& input, const torch::Tensor& prediction,
                      const MaskBatch& mask, int64_t index) {
  cv::Mat pred = tensor_to_rgb(prediction.dim() == 4 ? prediction[index] : prediction);
  if (pred.size() != input.size() || mask.height() != input.rows ||
      mask.width() != input.cols) {
    throw ShapeError("composite_rgb: size mismatch");
  }
  cv::Mat out = input.clone();
  cv::Mat hole = mask_to_gray(mask, index);
  pred.copyTo(out, hole);
  return out;
}

}  // namespace semfill
