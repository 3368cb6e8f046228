#include "sdgan/image.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace sdgan {

Rgb8 to_rgb8(const torch::Tensor& chw) {
  TORCH_CHECK(chw.dim() == 3 && chw.size(0) == 3, "expected a (3,H,W) image tensor");
  auto hwc = ((chw.detach().to(torch::kCPU, torch::kFloat).clamp(-1.0, 1.0) + 1.0) * 127.5)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  Rgb8 img;
  img.height = static_cast<int>(hwc.size(0));
  img.width = static_cast<int>(hwc.size(1));
  const auto* p = hwc.data_ptr<std::uint8_t>();
  img.data.assign(p, p + hwc.numel());
  return img;
}

torch::Tensor from_rgb8(const Rgb8& img) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(img.data.data()),
                            {img.height, img.width, 3}, torch::kUInt8);
  return t.permute({2, 0, 1}).to(torch::kFloat).div(127.5).sub(1.0).contiguous();
}

std::string content_hash(const Rgb8& img) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  unsigned int len = 0;
  EVP_Digest(img.data.data(), img.data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

namespace {

cv::Mat as_bgr(const Rgb8& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.data.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Rgb8 from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Rgb8 img;
  img.width = rgb.cols;
  img.height = rgb.rows;
  img.data.resize(static_cast<std::size_t>(rgb.total() * 3));
  for (int r = 0; r < rgb.rows; ++r) {
    std::copy_n(rgb.ptr<std::uint8_t>(r), rgb.cols * 3, img.data.data() + r * rgb.cols * 3);
  }
  return img;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Rgb8& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", as_bgr(img), out)) throw std::runtime_error("PNG encoding failed");
  return out;
}

std::optional<Rgb8> decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) return std::nullopt;
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) return std::nullopt;
  return from_bgr(bgr);
}

std::optional<Rgb8> read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void write_png(const std::filesystem::path& path, const Rgb8& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Rgb8 resize_square(const Rgb8& img, int size) {
  if (img.width == size && img.height == size) return img;
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.data.data()));
  cv::Mat out;
  const bool shrinking = img.width >= size && img.height >= size;
  cv::resize(rgb, out, cv::Size(size, size), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  Rgb8 r;
  r.width = r.height = size;
  r.data.resize(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) std::copy_n(out.ptr<std::uint8_t>(y), size * 3, r.data.data() + y * size * 3);
  return r;
}

Rgb8 tile(const torch::Tensor& grid) {
  TORCH_CHECK(grid.dim() == 5 && grid.size(2) == 3, "expected a (rows,cols,3,H,W) tensor");
  const auto rows = grid.size(0), cols = grid.size(1), h = grid.size(3), w = grid.size(4);
  // (rows, cols, 3, H, W) -> (3, rows*H, cols*W)
  auto sheet = grid.permute({2, 0, 3, 1, 4}).reshape({3, rows * h, cols * w});
  return to_rgb8(sheet);
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace sdgan
