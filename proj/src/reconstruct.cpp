#include "sumvln/error.hpp"
#include "sumvln/http.hpp"
#include "sumvln/sum.hpp"

namespace sumvln {

std::string_view to_string(ReconstructionBackend b) {
  return b == ReconstructionBackend::external ? "external" : "posed_depth";
}

ReconstructionBackend reconstruction_backend_from_string(std::string_view s) {
  if (s == "posed_depth" || s == "posed-depth") return ReconstructionBackend::posed_depth;
  if (s == "external") return ReconstructionBackend::external;
  throw Error(ErrorCode::BadArgs, "unknown reconstruction backend '" + std::string(s) + "'");
}

void ReconstructorConfig::validate() const {
  if (pixel_stride < 1) throw Error(ErrorCode::InvalidConfig, "pixel_stride must be >= 1");
  const bool external = backend == ReconstructionBackend::external;
  if (external != external_endpoint.has_value()) {
    throw Error(ErrorCode::InvalidConfig, external ? "external backend requires an endpoint"
                                                   : "endpoint given for the posed_depth backend");
  }
  if (!hyper_params.is_object()) throw Error(ErrorCode::InvalidConfig, "hyper_params must be a JSON object");
}

nlohmann::json reconstruction_request(std::span<const Frame> frames, const nlohmann::json& params) {
  nlohmann::json body;
  auto& arr = body["frames"] = nlohmann::json::array();
  for (const Frame& f : frames) {
    nlohmann::json jf;
    jf["image"] = base64_encode(encode_png(f.image));
    if (f.pose) {
      jf["pose"] = {f.pose->position.x(), f.pose->position.y(), f.pose->position.z(), f.pose->yaw, f.pose->pitch};
    } else {
      jf["pose"] = nullptr;
    }
    arr.push_back(std::move(jf));
  }
  body["params"] = params;
  return body;
}

Reconstruction reconstruct(std::span<const Frame> sampled, const ReconstructorConfig& cfg) {
  if (sampled.empty()) throw Error(ErrorCode::EmptyInput, "no frames to reconstruct");
  cfg.validate();

  Reconstruction r;
  if (cfg.backend == ReconstructionBackend::posed_depth) {
    r.cloud = fuse_frames(sampled, cfg.pixel_stride);
  } else {
    const auto endpoint = HttpEndpoint::parse(*cfg.external_endpoint);
    const std::string body = reconstruction_request(sampled, cfg.hyper_params).dump();
    const auto res = http_post(endpoint, "/reconstruct", body, "application/json");
    if (!res) {
      throw Error(ErrorCode::BackendUnreachable, "no response from " + endpoint.url_for("/reconstruct"));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::BackendUnreachable, "reconstruction service returned HTTP " + std::to_string(res->status));
    }
    try {
      const auto* p = reinterpret_cast<const std::uint8_t*>(res->body.data());
      r.cloud = read_glb(std::span(p, res->body.size())).cloud;
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedGlb, e.what());
    }
  }

  for (const Frame& f : sampled) {
    r.source_frame_ids.push_back(f.step_index);
    // Unposed frames (learned backends) keep a default pose placeholder.
    r.frame_poses.push_back(f.pose.value_or(CameraPose{}));
  }
  r.intrinsics = sampled.front().intrinsics;
  r.empty = r.cloud.empty();
  return r;
}

}  // namespace sumvln
