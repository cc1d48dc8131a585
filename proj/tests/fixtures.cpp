#include "fixtures.hpp"

#include <fstream>

namespace fixture {

using namespace styleval;

CampaignConfig small_campaign() {
  CampaignConfig c;
  c.n_styles = 4;
  c.n_inputs = 6;
  c.repetitions = 2;
  c.session_generated = 6;
  c.session_real = 3;
  c.real_pool_size = 4;
  c.calibration_size = 4;
  c.calibration_pass_threshold = 0.75;
  c.rng_seed = 5;
  return c;
}

ImageManifest write_images(const CampaignConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ImageManifest m;
  const auto truth = GroundTruth::for_campaign(cfg);
  for (const auto& [canonical, id] : truth.images()) {
    std::string name = canonical;
    for (char& ch : name) {
      if (ch == ':') ch = '_';
    }
    const auto path = dir / (name + ".png");
    std::ofstream(path, std::ios::binary) << "bytes of " << canonical;
    m.files[canonical] = path;
  }
  return m;
}

std::map<std::string, ImageId> token_index(const EvalService& service, const std::string& campaign_id) {
  std::map<std::string, ImageId> out;
  const auto truth = service.ground_truth(campaign_id);
  for (const auto& [canonical, id] : truth.images()) {
    out[service.image_token(campaign_id, id)] = id;
  }
  return out;
}

}  // namespace fixture
