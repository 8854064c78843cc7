#include "somandbd/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "cf64 I/O assumes a little-endian host");

namespace soman {

using nlohmann::json;

void write_cf64(const std::string& path, const VectorXcd& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cf64: cannot open for writing: " + path);
  f.write(kCf64Magic, 16);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double re = data(i).real(), im = data(i).imag();
    f.write(reinterpret_cast<const char*>(&re), sizeof re);
    f.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
  if (!f) throw std::runtime_error("cf64: short write: " + path);
}

VectorXcd read_cf64(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cf64: cannot open: " + path);
  std::streamoff size = f.tellg();
  if (size < 16 || (size - 16) % 16 != 0)
    throw std::runtime_error("cf64: truncated file: " + path);
  f.seekg(0);
  char magic[16];
  f.read(magic, 16);
  if (std::memcmp(magic, kCf64Magic, 16) != 0)
    throw std::runtime_error("cf64: bad magic in " + path);
  Eigen::Index n = (size - 16) / 16;
  VectorXcd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double re, im;
    f.read(reinterpret_cast<char*>(&re), sizeof re);
    f.read(reinterpret_cast<char*>(&im), sizeof im);
    out(i) = cxd(re, im);
  }
  if (!f) throw std::runtime_error("cf64: short read: " + path);
  return out;
}

namespace {

json dims_to_json(const ProblemDims& d) {
  return json{{"M", d.M}, {"P", d.P}, {"N_r", d.N_r}, {"J", d.J}, {"L", d.L}, {"Q", d.Q}};
}

ProblemDims dims_from_json(const json& j) {
  ProblemDims d;
  d.M = j.at("M");
  d.P = j.at("P");
  d.N_r = j.at("N_r");
  d.J = j.at("J");
  d.L = j.value("L", 0);
  d.Q = j.value("Q", 0);
  d.validate();
  return d;
}

json atoms_to_json(const Channel3D& ch) {
  json arr = json::array();
  for (const auto& a : ch.atoms)
    arr.push_back({{"tau", a.tau},
                   {"nu", a.nu},
                   {"beta", a.beta},
                   {"alpha", {a.alpha.real(), a.alpha.imag()}}});
  return arr;
}

Channel3D atoms_from_json(const json& arr) {
  Channel3D ch;
  for (const auto& j : arr) {
    Atom3D a;
    a.tau = j.at("tau");
    a.nu = j.at("nu");
    a.beta = j.at("beta");
    if (j.contains("alpha")) a.alpha = cxd(j["alpha"][0], j["alpha"][1]);
    ch.atoms.push_back(a);
  }
  return ch;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["dims"] = dims_to_json(scene.dims);
  j["radar_atoms"] = atoms_to_json(scene.radar);
  j["comms_atoms"] = atoms_to_json(scene.comms);
  j["seed"] = scene.seed;
  j["error_model"] = {{"sigma_gainphase", scene.errors.sigma_gainphase},
                      {"sigma_noise", scene.errors.sigma_noise},
                      {"epsilon_e", scene.errors.epsilon_e}};
  return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
  json j = json::parse(text);
  Scene s;
  s.dims = dims_from_json(j.at("dims"));
  s.radar = atoms_from_json(j.value("radar_atoms", json::array()));
  s.comms = atoms_from_json(j.value("comms_atoms", json::array()));
  s.seed = j.value("seed", 0ULL);
  if (j.contains("error_model")) {
    const auto& e = j["error_model"];
    s.errors.sigma_gainphase = e.value("sigma_gainphase", 0.0);
    s.errors.sigma_noise = e.value("sigma_noise", 0.0);
    s.errors.epsilon_e = e.value("epsilon_e", 0.0);
  }
  s.validate();
  return s;
}

void save_scene(const std::string& path, const Scene& scene) {
  write_text_file(path, scene_to_json(scene));
}

Scene load_scene(const std::string& path) { return scene_from_json(read_text_file(path)); }

std::string observation_to_json(const Observation& obs) {
  json j;
  j["dims"] = dims_to_json(obs.dims);
  json y = json::array();
  for (Eigen::Index i = 0; i < obs.y.size(); ++i)
    y.push_back({obs.y(i).real(), obs.y(i).imag()});
  j["y"] = std::move(y);
  return j.dump();
}

Observation observation_from_json(const std::string& text) {
  json j = json::parse(text);
  Observation o;
  o.dims = dims_from_json(j.at("dims"));
  const auto& y = j.at("y");
  o.y.resize(y.size());
  for (size_t i = 0; i < y.size(); ++i) o.y(i) = cxd(y[i][0], y[i][1]);
  o.validate();
  return o;
}

void save_observation(const std::string& path, const Observation& obs) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".cf64")
    write_cf64(path, obs.y);
  else
    write_text_file(path, observation_to_json(obs));
}

Observation load_observation(const std::string& path, const ProblemDims* dims_for_cf64) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".cf64") {
    if (!dims_for_cf64) throw std::invalid_argument("cf64 observation needs dims");
    Observation o;
    o.dims = *dims_for_cf64;
    o.y = read_cf64(path);
    o.validate();
    return o;
  }
  return observation_from_json(read_text_file(path));
}

void write_field_grid(const std::string& path, const std::vector<double>& values,
                      const std::vector<int>& shape, const std::string& description) {
  size_t expect = 1;
  for (int s : shape) expect *= static_cast<size_t>(s);
  if (expect != values.size()) throw std::invalid_argument("field grid: shape/size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("field grid: cannot open " + path);
  f.write(reinterpret_cast<const char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  json meta;
  meta["dtype"] = "float64";
  meta["order"] = "row-major";
  meta["shape"] = shape;
  meta["description"] = description;
  write_text_file(path + ".json", meta.dump(2));
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace soman
