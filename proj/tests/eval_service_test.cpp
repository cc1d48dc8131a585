#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "styleval/errors.hpp"
#include "styleval/eval_service.hpp"

using namespace styleval;

namespace {

const EvalService::Options kFast{.fsync = false, .snapshot_every = 0};

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int count_lines_with(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

struct Harness {
  std::filesystem::path root;
  CampaignConfig cfg;
  ImageManifest manifest;
  std::unique_ptr<EvalService> service;
  std::string id;
  std::map<std::string, ImageId> tokens;

  Harness(const std::string& name, CampaignConfig c, EvalService::Options opts = kFast)
      : root(oracle::temp_dir(name)), cfg(c) {
    manifest = fixture::write_images(cfg, root / "images");
    service = std::make_unique<EvalService>(root / "data", opts);
    id = service->create_campaign(cfg, manifest);
    tokens = fixture::token_index(*service, id);
  }

  void restart(EvalService::Options opts = kFast) {
    service.reset();
    service = std::make_unique<EvalService>(root / "data", opts);
  }

  // Answers `count` items; the first `correct` calibration answers are truthful,
  // the rest wrong, and measurement answers come from `judge`.
  SessionView answer(const std::string& session, int count, int correct,
                     const std::function<int(const ImageId&)>& judge = fixture::truthful) {
    SessionView v = service->next(session);
    for (int k = 0; k < count && v.next; ++k) {
      const ImageId& img = tokens.at(v.next->image_token);
      int j;
      if (v.phase == Phase::kCalibration) {
        j = v.answered < correct ? fixture::truthful(img) : 1 - fixture::truthful(img);
      } else {
        j = judge(img);
      }
      v = service->submit_label(session, v.next->image_token, j, 500 + k, UtcMillis{1'700'000'000'000 + k});
    }
    return v;
  }
};

std::string results_json(const CampaignResults& r) { return to_json(r).dump(); }

}  // namespace

TEST(CreateCampaign, Defaults) {
  Harness h("svc_defaults", CampaignConfig{});
  EXPECT_EQ(h.cfg.combos(), 500);
  const auto plan = h.service->plan(h.id);
  EXPECT_EQ(plan.evaluators.size(), 60u);
  EXPECT_EQ(plan, build_assignments(h.cfg));
  EXPECT_EQ(h.service->create_campaign(h.cfg, h.manifest), h.id);
  EXPECT_EQ(h.service->campaign_ids(), std::vector<std::string>{h.id});
}

TEST(CreateCampaign, SameConfigSameIdAcrossServices) {
  Harness a("svc_det_a", fixture::small_campaign());
  EvalService other(oracle::temp_dir("svc_det_b"), kFast);
  EXPECT_EQ(other.create_campaign(a.cfg, a.manifest), a.id);
  EXPECT_EQ(other.plan(a.id), a.service->plan(a.id));
  auto reseeded = a.cfg;
  reseeded.rng_seed += 1;
  EXPECT_NE(other.create_campaign(reseeded, a.manifest), a.id);
}

TEST(CreateCampaign, MissingGeneratedImageIsNamed) {
  const auto cfg = fixture::small_campaign();
  const auto dir = oracle::temp_dir("svc_gap");
  auto manifest = fixture::write_images(cfg, dir / "images");
  manifest.files.erase(generated_image(cfg, 3, 2).to_string());
  EvalService service(dir / "data", kFast);
  try {
    service.create_campaign(cfg, manifest);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kManifestIncomplete);
    EXPECT_NE(std::string(e.what()).find("(input 3, style 2)"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(service.campaign_ids().empty());
}

TEST(CreateCampaign, MissingFileOnDisk) {
  const auto cfg = fixture::small_campaign();
  const auto dir = oracle::temp_dir("svc_gap_file");
  const auto manifest = fixture::write_images(cfg, dir / "images");
  std::filesystem::remove(manifest.files.at("real:1"));
  EvalService service(dir / "data", kFast);
  EXPECT_EQ(code_of([&] { service.create_campaign(cfg, manifest); }), ErrorCode::kManifestIncomplete);
}

TEST(CreateCampaign, InfeasibleConfig) {
  auto cfg = fixture::small_campaign();
  const auto dir = oracle::temp_dir("svc_infeasible");
  const auto manifest = fixture::write_images(cfg, dir / "images");
  cfg.session_generated = 7;
  EvalService service(dir / "data", kFast);
  EXPECT_EQ(code_of([&] { service.create_campaign(cfg, manifest); }), ErrorCode::kConstraintInfeasible);
}

TEST(OpenSession, FirstClaimsSlotZero) {
  Harness h("svc_open", CampaignConfig{});
  const auto opened = h.service->open_session(h.id, "alice");
  EXPECT_EQ(opened.view.slot, 0);
  EXPECT_EQ(opened.view.state, SessionState::kCalibrating);
  EXPECT_EQ(opened.view.phase, Phase::kCalibration);
  EXPECT_EQ(opened.view.answered, 0);
  EXPECT_EQ(opened.view.calibration_total, 50);
  EXPECT_EQ(opened.view.total, 100);
  ASSERT_TRUE(opened.view.next);
  EXPECT_EQ(opened.calibration_tokens.size(), 50u);
  EXPECT_EQ(opened.view.next->image_token, opened.calibration_tokens.front());
}

TEST(OpenSession, FullAfterSixtyAndNoDuplicates) {
  Harness h("svc_full", CampaignConfig{});
  for (int e = 0; e < 60; ++e) EXPECT_EQ(h.service->open_session(h.id, "e" + std::to_string(e)).view.slot, e);
  EXPECT_EQ(code_of([&] { h.service->open_session(h.id, "late"); }), ErrorCode::kCampaignFull);
  EXPECT_EQ(code_of([&] { h.service->open_session(h.id, "e3"); }), ErrorCode::kAlreadyEnrolled);
  EXPECT_EQ(code_of([&] { h.service->open_session("camp_nope", "x"); }), ErrorCode::kNotFound);
}

TEST(OpenSession, ConcurrentOpensGetDistinctSlots) {
  Harness h("svc_concurrent", CampaignConfig{});
  std::vector<int> slots(64, -1);
  std::vector<ErrorCode> errors(64, ErrorCode::kIo);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 64; ++t) {
      threads.emplace_back([&, t] {
        try {
          slots[t] = h.service->open_session(h.id, "t" + std::to_string(t)).view.slot;
        } catch (const Error& e) {
          errors[t] = e.code();
        }
      });
    }
  }
  std::set<int> claimed;
  int full = 0;
  for (int t = 0; t < 64; ++t) {
    if (slots[t] >= 0) {
      EXPECT_TRUE(claimed.insert(slots[t]).second);
    } else {
      EXPECT_EQ(errors[t], ErrorCode::kCampaignFull);
      ++full;
    }
  }
  EXPECT_EQ(claimed.size(), 60u);
  EXPECT_EQ(full, 4);
}

TEST(SubmitLabel, CorrectOrderAdvances) {
  Harness h("svc_order", CampaignConfig{});
  const auto opened = h.service->open_session(h.id, "a");
  const auto ack = h.service->submit_label(opened.view.session_id, opened.calibration_tokens[0], 1, 900);
  EXPECT_EQ(ack.answered, 1);
  ASSERT_TRUE(ack.next);
  EXPECT_EQ(ack.next->image_token, opened.calibration_tokens[1]);
}

TEST(SubmitLabel, FortyOfFiftyPasses) {
  Harness h("svc_pass", CampaignConfig{});
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  const auto ack = h.answer(s, 50, 40);
  EXPECT_EQ(ack.state, SessionState::kPassed);
  EXPECT_EQ(ack.phase, Phase::kMeasurement);
  ASSERT_TRUE(ack.next);
  const auto first = h.service->plan(h.id).evaluators[0].items[0];
  EXPECT_EQ(h.tokens.at(ack.next->image_token), first);
  EXPECT_EQ(h.answer(s, 1, 0).state, SessionState::kInProgress);
  EXPECT_EQ(h.answer(s, 49, 0).state, SessionState::kComplete);
  EXPECT_FALSE(h.service->next(s).next);
  const int flipped = 1 - fixture::truthful(first);
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, ack.next->image_token, flipped, 0); }), ErrorCode::kOutOfOrder);
}

TEST(SubmitLabel, BelowThresholdFailsAndCloses) {
  Harness h("svc_fail", CampaignConfig{});
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  const auto ack = h.answer(s, 50, 32);  // 0.64
  EXPECT_EQ(ack.state, SessionState::kFailed);
  EXPECT_FALSE(ack.next);
  const auto first = h.service->plan(h.id).evaluators[0].items[0];
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, h.service->image_token(h.id, first), 0, 10); }),
            ErrorCode::kSessionClosed);
}

TEST(SubmitLabel, GateIsEvaluatedOnceAtTutorialEnd) {
  Harness h("svc_gate_once", CampaignConfig{});
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  // All wrong so far, but the gate has not run yet.
  EXPECT_EQ(h.answer(s, 49, 0).state, SessionState::kCalibrating);
}

TEST(SubmitLabel, DuplicateIsIdempotent) {
  Harness h("svc_dup", fixture::small_campaign());
  const auto opened = h.service->open_session(h.id, "a");
  const auto& s = opened.view.session_id;
  const auto& tok = opened.calibration_tokens[0];
  const auto first = h.service->submit_label(s, tok, 1, 10);
  const auto again = h.service->submit_label(s, tok, 1, 99);
  EXPECT_EQ(to_json(first), to_json(again));
  EXPECT_EQ(h.service->labels(h.id).size(), 1u);
  const auto log = slurp(h.root / "data" / h.id / "events.jsonl");
  EXPECT_EQ(count_lines_with(log, "\"type\":\"label\""), 1);
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, tok, 0, 10); }), ErrorCode::kOutOfOrder);
}

TEST(SubmitLabel, OutOfOrderAndBadInput) {
  Harness h("svc_ooo", fixture::small_campaign());
  const auto opened = h.service->open_session(h.id, "a");
  const auto& s = opened.view.session_id;
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, opened.calibration_tokens[1], 1, 10); }),
            ErrorCode::kOutOfOrder);
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, "img_0000", 1, 10); }), ErrorCode::kOutOfOrder);
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, opened.calibration_tokens[0], 2, 10); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { h.service->submit_label(s, opened.calibration_tokens[0], 1, -1); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { h.service->submit_label("sess_nope", opened.calibration_tokens[0], 1, 1); }),
            ErrorCode::kNotFound);
}

TEST(SubmitLabel, LoggedBeforeAck) {
  Harness h("svc_logged", fixture::small_campaign(), EvalService::Options{.fsync = true, .snapshot_every = 0});
  const auto opened = h.service->open_session(h.id, "a");
  h.service->submit_label(opened.view.session_id, opened.calibration_tokens[0], 1, 10);
  const auto log = slurp(h.root / "data" / h.id / "events.jsonl");
  EXPECT_EQ(count_lines_with(log, "\"type\":\"session_opened\""), 1);
  EXPECT_EQ(count_lines_with(log, "\"type\":\"label\""), 1);
}

TEST(Results, EmptyCampaign) {
  Harness h("svc_results_empty", CampaignConfig{});
  const auto r = h.service->get_results(h.id);
  EXPECT_TRUE(r.hype.scores.empty());
  EXPECT_EQ(r.hype.unscored.size(), 20u);
  EXPECT_EQ(r.completion.fraction_complete, 0.0);
  EXPECT_EQ(r.completion.slots, 60);
  EXPECT_EQ(r.completion.expected_measurement_labels, 60 * 50);
  EXPECT_EQ(code_of([&] { h.service->get_results("camp_nope"); }), ErrorCode::kNotFound);
}

TEST(Results, OneEvaluatorHalfReal) {
  Harness h("svc_results_one", fixture::small_campaign());
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  // Slot 0 gives input i style i mod 4: style 0 sees inputs 0 and 4.
  h.answer(s, 100, 4, [](const ImageId& id) { return id.is_generated() && *id.input_index == 0 ? 1 : 0; });
  const auto r = h.service->get_results(h.id);
  ASSERT_EQ(r.hype.scores.size(), 4u);
  EXPECT_EQ(r.hype.scores[0].style.index, 0);
  EXPECT_EQ(r.hype.scores[0].label_count, 2);
  EXPECT_DOUBLE_EQ(r.hype.scores[0].micro_average, 0.5);
  EXPECT_EQ(r.completion.sessions_complete, 1);
  EXPECT_EQ(r.completion.measurement_labels, 9);  // 6 generated + 3 real
  EXPECT_DOUBLE_EQ(r.image_error_rates.at(generated_image(h.cfg, 0, 0).to_string()), 1.0);
}

TEST(Results, FailedEvaluatorIsExcluded) {
  Harness h("svc_results_failed", fixture::small_campaign());
  const auto good = h.service->open_session(h.id, "good").view.session_id;
  const auto bad = h.service->open_session(h.id, "bad").view.session_id;
  h.answer(good, 100, 4, [](const ImageId&) { return 0; });
  EXPECT_EQ(h.answer(bad, 100, 1).state, SessionState::kFailed);
  const auto r = h.service->get_results(h.id);
  EXPECT_EQ(r.filter.retained, std::set<std::string>{"good"});
  EXPECT_EQ(r.filter.excluded.at("bad").reason, ExclusionReason::kCalibrationFail);
  EXPECT_EQ(r.completion.sessions_failed, 1);

  // Offline, a failed evaluator's measurement labels are dropped too.
  auto labels = h.service->labels(h.id);
  const auto item = h.service->plan(h.id).evaluators[1].items;
  int t = 0;
  for (const auto& id : item) {
    labels.push_back({"bad", id, 1, Phase::kMeasurement, 10, UtcMillis{++t}});
  }
  const auto with = aggregate_campaign(labels, h.service->ground_truth(h.id), h.cfg);
  const auto without = aggregate_campaign(h.service->labels(h.id), h.service->ground_truth(h.id), h.cfg);
  EXPECT_EQ(to_json(with)["styles"], to_json(without)["styles"]);
  EXPECT_EQ(with.image_error_rates, without.image_error_rates);
  for (const auto& s : r.hype.scores) EXPECT_EQ(s.label_sum, 0);
}

TEST(Results, MatchOfflineComputationFromExport) {
  Harness h("svc_results_offline", fixture::small_campaign());
  std::mt19937_64 gen(3);
  for (int e = 0; e < 8; ++e) {
    const auto s = h.service->open_session(h.id, "e" + std::to_string(e)).view.session_id;
    h.answer(s, static_cast<int>(4 + gen() % 10), e == 5 ? 2 : 4, [&](const ImageId&) { return int(gen() % 2); });
  }
  const auto truth = h.service->ground_truth(h.id);
  const auto offline = labels_from_csv(h.service->export_labels_csv(h.id), truth);
  const auto filter = filter_evaluators(offline, truth, h.cfg);
  const auto retained = retained_generated_labels(offline, filter);
  const auto expected = hype_style_scores(retained);
  const auto live = h.service->get_results(h.id);
  ASSERT_EQ(live.hype.scores.size(), expected.scores.size());
  for (std::size_t i = 0; i < expected.scores.size(); ++i) {
    EXPECT_EQ(live.hype.scores[i].style, expected.scores[i].style);
    EXPECT_EQ(live.hype.scores[i].label_sum, expected.scores[i].label_sum);
    EXPECT_EQ(live.hype.scores[i].label_count, expected.scores[i].label_count);
  }
  EXPECT_EQ(live.image_error_rates, per_image_error_rates(retained));
  EXPECT_EQ(live.filter.retained, filter.retained);
}

TEST(Leak, ViewsNeverRevealKind) {
  Harness h("svc_leak", fixture::small_campaign());
  const auto opened = h.service->open_session(h.id, "a");
  std::set<std::size_t> lengths;
  std::vector<std::string> dumps;
  SessionView v = opened.view;
  while (v.next) {
    const auto& tok = v.next->image_token;
    lengths.insert(tok.size());
    EXPECT_EQ(v.next->url, "/api/images/" + tok);
    EXPECT_EQ(tok.rfind("img_", 0), 0u);
    dumps.push_back(to_json(v).dump());
    v = h.service->submit_label(v.session_id, tok, fixture::truthful(h.tokens.at(tok)), 1);
  }
  EXPECT_EQ(lengths.size(), 1u);
  for (const auto& d : dumps) {
    for (const char* word : {"real", "gen", "generated", "kind", "style", "input"}) {
      EXPECT_EQ(d.find(word), std::string::npos) << word << " in " << d;
    }
  }
}

TEST(ServeImage, KnownAndUnknown) {
  Harness h("svc_images", fixture::small_campaign());
  const auto tok = h.service->image_token(h.id, ImageId::real(2));
  const auto blob = h.service->serve_image(tok);
  EXPECT_EQ(blob.bytes, "bytes of real:2");
  EXPECT_EQ(blob.content_type, "image/png");
  EXPECT_EQ(code_of([&] { h.service->serve_image("img_ffffffffffffffff"); }), ErrorCode::kNotFound);
}

TEST(Replay, RestartReconstructsState) {
  for (int every : {0, 3}) {
    const EvalService::Options opts{.fsync = false, .snapshot_every = every};
    Harness h("svc_replay_" + std::to_string(every), fixture::small_campaign(), opts);
    std::vector<std::string> ids;
    for (int e = 0; e < 5; ++e) ids.push_back(h.service->open_session(h.id, "e" + std::to_string(e)).view.session_id);
    h.answer(ids[0], 13, 4);
    h.answer(ids[1], 4, 0);
    h.answer(ids[2], 7, 4, [](const ImageId&) { return 1; });
    h.answer(ids[3], 2, 2);
    const auto before = results_json(h.service->get_results(h.id));
    std::vector<std::string> views;
    for (const auto& s : ids) views.push_back(to_json(h.service->next(s)).dump());
    const auto csv = h.service->export_labels_csv(h.id);

    h.restart(opts);
    EXPECT_EQ(results_json(h.service->get_results(h.id)), before);
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(to_json(h.service->next(ids[i])).dump(), views[i]);
    EXPECT_EQ(h.service->export_labels_csv(h.id), csv);
    EXPECT_EQ(code_of([&] { h.service->open_session(h.id, "e1"); }), ErrorCode::kAlreadyEnrolled);
    // Continues where it left off, and replayed duplicates still ack.
    EXPECT_EQ(h.answer(ids[3], 100, 2).state, SessionState::kFailed);
    EXPECT_EQ(h.answer(ids[4], 100, 4).state, SessionState::kComplete);
  }
}

TEST(Replay, SnapshotIsWritten) {
  Harness h("svc_snapshot", fixture::small_campaign(), EvalService::Options{.fsync = false, .snapshot_every = 2});
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  h.answer(s, 5, 4);
  EXPECT_TRUE(std::filesystem::exists(h.root / "data" / h.id / "snapshot.json"));
  const auto snap = nlohmann::json::parse(slurp(h.root / "data" / h.id / "snapshot.json"));
  EXPECT_EQ(snap["labels"].size(), 4u);
}

TEST(Replay, TornTailIsIgnored) {
  Harness h("svc_torn", fixture::small_campaign());
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  h.answer(s, 3, 4);
  const auto before = results_json(h.service->get_results(h.id));
  h.service.reset();
  std::ofstream(h.root / "data" / h.id / "events.jsonl", std::ios::app) << "{\"type\":\"label\",\"seq\":5";
  h.restart();
  EXPECT_EQ(results_json(h.service->get_results(h.id)), before);
  EXPECT_EQ(h.service->next(s).answered, 3);
}

TEST(Replay, CorruptLogRefusesToLoad) {
  Harness h("svc_corrupt", fixture::small_campaign());
  const auto s = h.service->open_session(h.id, "a").view.session_id;
  h.answer(s, 2, 4);
  h.service.reset();
  std::ofstream(h.root / "data" / h.id / "events.jsonl", std::ios::app) << "garbage\n";
  EXPECT_EQ(code_of([&] { h.restart(); }), ErrorCode::kParse);
}

TEST(Wire, LabelEventRoundtrip) {
  LabelEvent e;
  e.seq = 42;
  e.session_id = "sess_1";
  e.record = {"alice", ImageId::generated(7, 0, make_style(7)), 1, Phase::kMeasurement, 1234, UtcMillis{1'700'000'000'123}};
  const nlohmann::json j = e;
  EXPECT_EQ(j["type"], "label");
  EXPECT_EQ(j["image_id"], "gen:7:0:7");
  const auto back = j.get<LabelEvent>();
  EXPECT_EQ(back.seq, 42u);
  EXPECT_EQ(back.record, e.record);
}

TEST(Wire, ManifestAcceptsBareOrWrapped) {
  const auto base = std::filesystem::path("/srv/img");
  const auto a = ImageManifest::from_json({{"images", {{"real:0", "r0.png"}}}}, base);
  const auto b = ImageManifest::from_json({{"real:0", "/abs/r0.png"}}, base);
  EXPECT_EQ(a.files.at("real:0"), base / "r0.png");
  EXPECT_EQ(b.files.at("real:0"), "/abs/r0.png");
  EXPECT_EQ(a.to_json()["images"]["real:0"], (base / "r0.png").string());
}
