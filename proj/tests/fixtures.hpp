#pragma once

// Campaign fixtures shared by the service, HTTP and acceptance tests.

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "styleval/eval_service.hpp"

namespace fixture {

// Small campaign: 4 styles, 6 inputs, K = 2, 8 slots of 6 + 3 items after a
// 4-image tutorial.
styleval::CampaignConfig small_campaign();

// One file per ground-truth image under `dir`, named after its canonical token.
styleval::ImageManifest write_images(const styleval::CampaignConfig& cfg, const std::filesystem::path& dir);

// Opaque token -> image for every image of a campaign.
std::map<std::string, styleval::ImageId> token_index(const styleval::EvalService& service,
                                                    const std::string& campaign_id);

// Correct answer for an image: real -> 1, generated -> 0.
inline int truthful(const styleval::ImageId& id) { return id.kind == styleval::ImageKind::kReal ? 1 : 0; }

}  // namespace fixture
