#include "gsyn/model_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

using nlohmann::json;

namespace gsyn {

namespace {

json mat_json(const Mat& m) {
  json j;
  j["rows"] = static_cast<long>(m.rows());
  j["cols"] = static_cast<long>(m.cols());
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Mat json_mat(const json& j) {
  const auto rows = j.at("rows").get<long>();
  const auto cols = j.at("cols").get<long>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols))
    throw DataError("matrix payload shape mismatch");
  Mat m(rows, cols);
  size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

json vec_json(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec json_vec(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json gaussian_json(const GaussianParams& g) {
  json j;
  j["mean"] = vec_json(g.mean);
  j["cov"] = mat_json(g.cov);
  return j;
}

GaussianParams json_gaussian(const json& j) {
  GaussianParams g;
  g.mean = json_vec(j.at("mean"));
  g.cov = json_mat(j.at("cov"));
  return g;
}

json states_json(const std::vector<GaussianState>& states) {
  json arr = json::array();
  for (const auto& s : states) {
    json e;
    e["speech"] = gaussian_json(s.speech);
    e["motion"] = gaussian_json(s.motion);
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<GaussianState> json_states(const json& arr) {
  std::vector<GaussianState> out;
  for (const auto& e : arr) {
    GaussianState s;
    s.speech = json_gaussian(e.at("speech"));
    s.motion = json_gaussian(e.at("motion"));
    out.push_back(std::move(s));
  }
  return out;
}

void write_model(const std::string& path, const char* format,
                 const json& payload) {
  json root;
  root["format"] = format;
  root["version"] = kModelFormatVersion;
  root["checksum"] = to_hex(fnv1a64(payload.dump()));
  root["model"] = payload;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write model file " + path);
  f << root.dump(2) << '\n';
  if (!f) throw DataError("failed writing model file " + path);
}

json read_root(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open model file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw DataError("model file " + path +
                    " is not valid JSON: " + std::string(e.what()));
  }
}

json read_model(const std::string& path, const char* format) {
  const json root = read_root(path);
  try {
    if (root.at("format").get<std::string>() != format)
      throw DataError("model file " + path + " holds format '" +
                      root.at("format").get<std::string>() + "', expected '" +
                      format + "'");
    const int version = root.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format version " +
                      std::to_string(version) + " (reader supports " +
                      std::to_string(kModelFormatVersion) + ")");
    const json payload = root.at("model");
    if (to_hex(fnv1a64(payload.dump())) !=
        root.at("checksum").get<std::string>())
      throw DataError("checksum mismatch in model file " + path);
    return payload;
  } catch (const json::exception& e) {
    throw DataError("model file " + path +
                    " is malformed: " + std::string(e.what()));
  }
}

}  // namespace

void save_dbn(const DbnModel& model, const std::string& path) {
  model.validate();
  json payload;
  payload["states"] = states_json(model.states);
  payload["trans"] = mat_json(model.trans);
  payload["prior"] = vec_json(model.prior);
  write_model(path, "gsyn-dbn", payload);
}

DbnModel load_dbn(const std::string& path) {
  const json payload = read_model(path, "gsyn-dbn");
  try {
    DbnModel m;
    m.states = json_states(payload.at("states"));
    m.trans = json_mat(payload.at("trans"));
    m.prior = json_vec(payload.at("prior"));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError("model file " + path +
                    " is malformed: " + std::string(e.what()));
  }
}

void save_cdbn(const CdbnModel& model, const std::string& path) {
  model.validate();
  json payload;
  payload["constraints"] = model.constraints.labels;
  payload["states"] = states_json(model.states);
  json trans = json::array();
  for (const auto& a : model.trans) trans.push_back(mat_json(a));
  payload["trans"] = std::move(trans);
  payload["priors"] = mat_json(model.priors);
  json mask;
  mask["support"] = model.mask.support;
  mask["global_state"] = model.mask.global_state;
  payload["mask"] = std::move(mask);
  payload["constraint_prior"] = vec_json(model.constraint_prior);
  write_model(path, "gsyn-cdbn", payload);
}

CdbnModel load_cdbn(const std::string& path) {
  const json payload = read_model(path, "gsyn-cdbn");
  try {
    CdbnModel m;
    m.constraints.labels =
        payload.at("constraints").get<std::vector<std::string>>();
    m.states = json_states(payload.at("states"));
    for (const auto& a : payload.at("trans")) m.trans.push_back(json_mat(a));
    m.priors = json_mat(payload.at("priors"));
    m.mask.support =
        payload.at("mask").at("support").get<std::vector<std::vector<int>>>();
    m.mask.global_state = payload.at("mask").at("global_state").get<int>();
    m.constraint_prior = json_vec(payload.at("constraint_prior"));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError("model file " + path +
                    " is malformed: " + std::string(e.what()));
  }
}

std::string model_format(const std::string& path) {
  const json root = read_root(path);
  try {
    return root.at("format").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError("model file " + path +
                    " is malformed: " + std::string(e.what()));
  }
}

}  // namespace gsyn
