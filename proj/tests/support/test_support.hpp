#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <torch/torch.h>

namespace avid::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("avid_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// FNV-1a over file bytes.
inline std::uint64_t checksum(const std::filesystem::path& p) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : read_file(p)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct GradCheck {
  double max_rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double worst_element = 0.0;  // max |a - n| / max(|a|, |n|, floor)
  std::int64_t checked = 0;
};

/// Compares autograd gradients of `loss` w.r.t. `params` (double tensors)
/// with central differences.
inline GradCheck check_gradients(const std::function<torch::Tensor()>& loss, std::vector<torch::Tensor> params,
                                 double h = 1e-6, double floor = 1e-6) {
  for (auto& p : params) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
  loss().backward();
  GradCheck out;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  torch::NoGradGuard no_grad;
  for (auto& p : params) {
    auto analytic = p.grad().clone();
    auto flat = p.view(-1);
    auto ga = analytic.view(-1);
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + h;
      const double up = loss().item<double>();
      flat[i] = orig - h;
      const double down = loss().item<double>();
      flat[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = ga[i].item<double>();
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      out.worst_element = std::max(out.worst_element, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
      ++out.checked;
    }
  }
  out.max_rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
  return out;
}

}  // namespace avid::test
