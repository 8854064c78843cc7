#pragma once
// File formats: scene/observation JSON, the .cf64 raw complex format and
// binary field grids with JSON sidecars.

#include <string>

#include "somandbd/types.hpp"

namespace soman {

// 16-byte ASCII magic followed by interleaved little-endian float64 (I then Q
// per sample).
inline constexpr char kCf64Magic[] = "SOMANDBD-CF64v1 ";  // exactly 16 chars

void write_cf64(const std::string& path, const VectorXcd& data);
VectorXcd read_cf64(const std::string& path);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

void save_scene(const std::string& path, const Scene& scene);
Scene load_scene(const std::string& path);

std::string observation_to_json(const Observation& obs);
Observation observation_from_json(const std::string& text);

void save_observation(const std::string& path, const Observation& obs);
// Reads .cf64 (dims supplied) or .json based on extension.
Observation load_observation(const std::string& path, const ProblemDims* dims_for_cf64 = nullptr);

// Flat row-major real64 grid + JSON metadata sidecar (<path>.json).
void write_field_grid(const std::string& path, const std::vector<double>& values,
                      const std::vector<int>& shape, const std::string& description);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace soman
