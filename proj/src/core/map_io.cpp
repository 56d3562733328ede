#include "map_io.hpp"

namespace buqo {

json map_result_json(const MapResult &res) {
  return {{"residual", res.residual},       {"objective", res.objective},     {"epsilon", res.epsilon},
          {"iterations", res.iterations},   {"converged", res.converged},     {"phi_forward", res.phi_forward},
          {"phi_adjoint", res.phi_adjoint}, {"phi_norm", res.phi_norm},       {"psi", to_string(res.psi_kind)},
          {"height", res.x.height},         {"width", res.x.width}};
}

void save_map_result(const fs::path &path, const MapResult &res) {
  json meta = map_result_json(res);
  meta.erase("height");
  meta.erase("width");
  write_rawj(path, res.x, {{"map", meta}});
}

MapResult load_map_result(const fs::path &path) {
  json header;
  MapResult res;
  res.x = read_rawj_image(path, &header);
  if (!header.contains("map"))
    throw IoError(rawj_header_path(path).string() + " carries no MAP metadata");
  try {
    const json &m = header.at("map");
    res.residual = m.at("residual").get<double>();
    res.objective = m.at("objective").get<double>();
    res.epsilon = m.at("epsilon").get<double>();
    res.iterations = m.at("iterations").get<int>();
    res.converged = m.at("converged").get<bool>();
    res.phi_forward = m.at("phi_forward").get<std::uint64_t>();
    res.phi_adjoint = m.at("phi_adjoint").get<std::uint64_t>();
    res.phi_norm = m.at("phi_norm").get<double>();
    res.psi_kind = parse_sparsity(m.at("psi").get<std::string>());
  } catch (const json::exception &e) {
    throw IoError(rawj_header_path(path).string() + ": bad MAP metadata: " + e.what());
  }
  return res;
}

} // namespace buqo
