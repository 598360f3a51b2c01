/*
 * Copyright 2026 The scdepth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace scd {

// Status codes shared by the C++ exceptions and the C API.
enum class Status : int {
  ok = 0,
  generic_error = 1,
  config_error = 2,
  optimization_failure = 3,
  stale_artifact = 4,
  io_error = 5,
  input_error = 6,
  degenerate_input = 7,
};

class ScdError : public std::runtime_error {
 public:
  ScdError(Status status, const std::string& msg)
      : std::runtime_error(msg), status_(status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

struct InputError : ScdError {
  explicit InputError(const std::string& m) : ScdError(Status::input_error, m) {}
};
struct ConfigError : ScdError {
  explicit ConfigError(const std::string& m) : ScdError(Status::config_error, m) {}
};
struct DegenerateInputError : ScdError {
  explicit DegenerateInputError(const std::string& m)
      : ScdError(Status::degenerate_input, m) {}
};
struct OptimizationFailure : ScdError {
  explicit OptimizationFailure(const std::string& m)
      : ScdError(Status::optimization_failure, m) {}
  OptimizationFailure(const std::string& m, std::vector<double> loss_trace)
      : ScdError(Status::optimization_failure, m), trace(std::move(loss_trace)) {}
  // Per-step total loss up to the failure, for post-mortems.
  std::vector<double> trace;
};
struct StaleArtifactError : ScdError {
  explicit StaleArtifactError(const std::string& m)
      : ScdError(Status::stale_artifact, m) {}
};
struct IoError : ScdError {
  explicit IoError(const std::string& m) : ScdError(Status::io_error, m) {}
};

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3 operator*(Vec3 v, double s) { return s * v; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }

  static Mat3 identity() { return Mat3{}; }
  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }
};

inline Vec3 operator*(const Mat3& a, Vec3 v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw InputError("camera intrinsics: focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw InputError("camera intrinsics: principal point outside image");
  }

  // K^-1 * (u, v, 1): the camera-space ray with unit z.
  Vec3 unproject(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
  // K * p, no normalization.
  Vec3 project_h(Vec3 p) const {
    return {fx * p.x + cx * p.z, fy * p.y + cy * p.z, p.z};
  }
};

Mat3 axis_angle_to_matrix(Vec3 axis_angle);
Vec3 matrix_to_axis_angle(const Mat3& r);

// Rigid transform p -> R p + T, rotation stored as axis-angle.
struct PoseSE3 {
  Vec3 rotation;
  Vec3 translation;

  Mat3 rotation_matrix() const { return axis_angle_to_matrix(rotation); }
  Vec3 apply(Vec3 p) const { return rotation_matrix() * p + translation; }
  PoseSE3 inverse() const {
    Mat3 rt = rotation_matrix().transposed();
    Vec3 t = rt * translation;
    return {Vec3{-rotation.x, -rotation.y, -rotation.z}, {-t.x, -t.y, -t.z}};
  }
};

// a then b: (b . a)(p) = b(a(p)).
PoseSE3 compose(const PoseSE3& b, const PoseSE3& a);

// Dense H x W grids, row-major. Pixel (u, v) = (column, row).
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;  // H*W
  std::vector<uint8_t> valid;  // H*W

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(size_t(w) * h, 0.0),
                           valid(size_t(w) * h, 0) {}
  size_t idx(int u, int v) const { return size_t(v) * width + u; }
  double at(int u, int v) const { return values[idx(u, v)]; }
  bool is_valid(int u, int v) const { return valid[idx(u, v)] != 0; }
  size_t pixel_count() const { return values.size(); }
};

struct MotionField {
  int width = 0, height = 0;
  std::vector<double> values;  // H*W*3 interleaved (x, y, z)

  MotionField() = default;
  MotionField(int w, int h) : width(w), height(h), values(size_t(w) * h * 3, 0.0) {}
  size_t idx(int u, int v) const { return (size_t(v) * width + u) * 3; }
  Vec3 at(int u, int v) const {
    size_t i = idx(u, v);
    return {values[i], values[i + 1], values[i + 2]};
  }
  void set(int u, int v, Vec3 d) {
    size_t i = idx(u, v);
    values[i] = d.x;
    values[i + 1] = d.y;
    values[i + 2] = d.z;
  }
};

struct Correspondence {
  int width = 0, height = 0;
  std::vector<double> target_u, target_v;  // continuous pixel coords in the other frame
  std::vector<double> target_depth;
  std::vector<uint8_t> valid;

  Correspondence() = default;
  Correspondence(int w, int h)
      : width(w), height(h), target_u(size_t(w) * h, 0.0), target_v(size_t(w) * h, 0.0),
        target_depth(size_t(w) * h, 0.0), valid(size_t(w) * h, 0) {}
  size_t idx(int u, int v) const { return size_t(v) * width + u; }
};

struct ImageBuffer {
  int width = 0, height = 0;
  std::vector<double> values;  // H*W*3 interleaved RGB in [0,1]

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), values(size_t(w) * h * 3, 0.0) {}
  size_t idx(int u, int v) const { return (size_t(v) * width + u) * 3; }
  double at(int u, int v, int c) const { return values[idx(u, v) + c]; }
  void set(int u, int v, int c, double x) { values[idx(u, v) + c] = x; }
};

enum class MotionClass { unknown, static_object, moving_object };

struct InstanceMask {
  int width = 0, height = 0;
  int id = 0;
  MotionClass classification = MotionClass::unknown;
  std::vector<uint8_t> mask;  // H*W binary

  InstanceMask() = default;
  InstanceMask(int w, int h) : width(w), height(h), mask(size_t(w) * h, 0) {}
  size_t idx(int u, int v) const { return size_t(v) * width + u; }
  bool at(int u, int v) const { return mask[idx(u, v)] != 0; }
  size_t pixel_count() const {
    size_t n = 0;
    for (uint8_t m : mask) n += (m != 0);
    return n;
  }
};

struct BinaryMask {
  int width = 0, height = 0;
  std::vector<uint8_t> mask;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), mask(size_t(w) * h, 0) {}
  size_t idx(int u, int v) const { return size_t(v) * width + u; }
  bool at(int u, int v) const { return mask[idx(u, v)] != 0; }
  size_t count() const {
    size_t n = 0;
    for (uint8_t m : mask) n += (m != 0);
    return n;
  }
};

}  // namespace scd
