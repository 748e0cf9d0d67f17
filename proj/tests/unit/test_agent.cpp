#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stub_server.hpp"
#include "sumvln/agent.hpp"
#include "sumvln/error.hpp"
#include "sumvln/rng.hpp"
#include "temp_dir.hpp"

using namespace sumvln;

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::ParseFailure;
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Frame small_frame(int step, Rgb fill) {
  Frame f;
  f.step_index = step;
  f.image = Image(8, 6, fill);
  return f;
}

MemoryView view(Perspective p, Rgb fill) {
  MemoryView v;
  v.perspective = p;
  v.image = Image(16, 9, fill);
  return v;
}

Episode straight_episode(Eigen::Vector2d target) {
  Episode e;
  e.id = "farm-0:0";
  e.instruction = "Walk to the worker";
  e.start = {0, 0, 0};
  e.target = target;
  e.subtask_waypoints = {target};
  return e;
}

}  // namespace

TEST_CASE("decompose_instruction examples") {
  const auto two = decompose_instruction("Our mate is working in the farm. Go along the path to approach her");
  CHECK(two.subtasks ==
        std::vector<std::string>{"Our mate is working in the farm", "Go along the path to approach her"});
  CHECK(two.cursor == 0);
  CHECK(decompose_instruction("Move forward").subtasks == std::vector<std::string>{"Move forward"});
  CHECK(decompose_instruction("Go to the gate, then turn left, then stop at the shed").subtasks ==
        std::vector<std::string>{"Go to the gate", "turn left", "stop at the shed"});
  CHECK(decompose_instruction("Pass the barn and then wait; look right").subtasks.size() == 3);
  CHECK(decompose_instruction("Go to the ATHENS gate").subtasks.size() == 1);
  CHECK(decompose_instruction("Go to 3.5 metres").subtasks.size() == 1);
  CHECK(code_of([] { decompose_instruction(""); }) == ErrorCode::EmptyInstruction);
  CHECK(code_of([] { decompose_instruction("  ; . "); }) == ErrorCode::EmptyInstruction);
}

TEST_CASE("decompose keeps every content word") {
  const char* vocab[] = {"walk", "past", "the", "red", "tractor", "turn", "left", "stop", "near", "shed",
                         "follow", "path", "then", "and", "worker", "gate", "slowly", "Then"};
  const char* seps[] = {" ", " ", " ", ", then ", " and then ", "; ", ". ", "! ", "? "};
  Rng rng(21);
  for (int t = 0; t < 500; ++t) {
    std::string text;
    const int n = 1 + int(rng.below(12));
    for (int i = 0; i < n; ++i) {
      if (i) text += seps[rng.below(std::size(seps))];
      text += vocab[rng.below(std::size(vocab))];
    }
    INFO(text);
    SubtaskList s;
    try {
      s = decompose_instruction(text);
    } catch (const Error& e) {
      // Only a text made of separators may come out empty.
      CHECK(e.code() == ErrorCode::EmptyInstruction);
      for (auto& w : words_of(text)) CHECK((w == "then" || w == "and"));
      continue;
    }
    std::string joined;
    for (const auto& p : s.subtasks) {
      CHECK_FALSE(p.empty());
      joined += p + " ";
    }
    std::multiset<std::string> have;
    for (auto& w : words_of(joined)) have.insert(w);
    std::multiset<std::string> want;
    for (auto& w : words_of(text)) want.insert(w);
    for (const auto& w : want) {
      if (w == "then" || w == "and") continue;
      CHECK(have.count(w) == want.count(w));
    }
  }
}

TEST_CASE("generated instructions decompose into their subtask count") {
  for (auto c : kAllSceneClasses) {
    const auto g = generate_world(1, c);
    for (const auto& e : g.episodes) {
      INFO(e.instruction);
      CHECK(int(decompose_instruction(e.instruction).subtasks.size()) == e.subtask_count());
    }
  }
}

TEST_CASE("placeholders") {
  PromptValues v{"reach {{step}}", "a\nb", "FORWARD", "7"};
  CHECK(fill_placeholders("I={{instruction}} S={{step}}", v) == "I=reach {{step}} S=7");
  CHECK(fill_placeholders("{{subtasks}}|{{history}}", v) == "a\nb|FORWARD");
  CHECK(fill_placeholders("no placeholders {", v) == "no placeholders {");
  CHECK(code_of([&] { fill_placeholders("{{unknown}}", v); }) == ErrorCode::UnresolvedPlaceholder);
  CHECK(code_of([&] { fill_placeholders("{{step", v); }) == ErrorCode::UnresolvedPlaceholder);

  const PromptTemplate t = PromptTemplate::parse("sys line\n---\nuser {{step}}\n");
  CHECK(t.system_text == "sys line\n");
  CHECK(t.user_text == "user {{step}}\n");
  PromptTemplate::builtin().validate();
  CHECK(code_of([] { PromptTemplate::parse("a\n---\n{{nope}}").validate(); }) == ErrorCode::UnresolvedPlaceholder);

  testing::TempDir dir;
  write_text_file(dir / "p.txt", "S\n---\nU {{instruction}}");
  CHECK(PromptTemplate::load(dir / "p.txt").user_text == "U {{instruction}}");
}

TEST_CASE("build_request") {
  const SubtaskList subtasks = decompose_instruction("Go to the gate, then stop");
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(small_frame(i, {std::uint8_t(i * 10), 0, 0}));
  const std::vector<ActionType> history = {ActionType::FORWARD, ActionType::LEFT_ROTATE};
  const std::vector<MemoryView> hybrid = {view(Perspective::frontal, {1, 1, 1}), view(Perspective::oblique, {2, 2, 2})};

  RequestInputs in;
  in.instruction = "Go to the gate, then stop";
  in.subtasks = &subtasks;
  in.recent_frames = frames;
  in.history = history;
  in.step = 4;

  SUBCASE("no memory") {
    const ModelRequest r = build_request(PromptTemplate::builtin(), in);
    CHECK(r.memory_attachments == 0);
    CHECK(r.frame_attachments == 3);
    const auto j = r.to_json();
    CHECK(testing::request_images(j) == 3);
    CHECK(testing::request_step(j) == 4);
    CHECK(r.parts.back().kind == RequestPart::Kind::text);
    CHECK(r.parts.back().text.find("Go to the gate, then stop") != std::string::npos);
    CHECK(r.parts.back().text.find("FORWARD, LEFT_ROTATE") != std::string::npos);
  }

  SUBCASE("hybrid memory comes first, frontal then oblique") {
    in.memory = hybrid;
    const ModelRequest r = build_request(PromptTemplate::builtin(), in);
    CHECK(r.memory_attachments == 2);
    std::vector<const Image*> images;
    for (const auto& p : r.parts)
      if (p.kind == RequestPart::Kind::image) images.push_back(&p.image);
    REQUIRE(images.size() == 5);
    CHECK(*images[0] == hybrid[0].image);
    CHECK(*images[1] == hybrid[1].image);
    CHECK(*images[2] == frames[2].image);
    CHECK(*images[4] == frames[4].image);
    CHECK(r.serialize() == build_request(PromptTemplate::builtin(), in).serialize());
  }

  SUBCASE("attachment count is memory plus windowed frames") {
    for (std::size_t m = 0; m <= 2; ++m) {
      for (std::size_t n = 1; n <= 5; ++n) {
        for (std::size_t h = 1; h <= 4; ++h) {
          in.memory = std::span(hybrid).first(m);
          in.recent_frames = std::span(frames).first(n);
          in.history_window = h;
          const ModelRequest r = build_request(PromptTemplate::builtin(), in);
          CHECK(r.attachment_count() == m + std::min(h, n));
          CHECK(testing::request_images(r.to_json()) == int(m + std::min(h, n)));
        }
      }
    }
  }

  SUBCASE("errors") {
    in.recent_frames = {};
    CHECK(code_of([&] { build_request(PromptTemplate::builtin(), in); }) == ErrorCode::EmptyInput);
    in.recent_frames = frames;
    CHECK(code_of([&] { build_request(PromptTemplate::parse("x\n---\n{{bad}}"), in); }) ==
          ErrorCode::UnresolvedPlaceholder);
  }

  SUBCASE("images are base64 PNG") {
    const auto j = build_request(PromptTemplate::builtin(), in).to_json();
    for (const auto& p : j["parts"]) {
      if (p["type"] != "image") continue;
      const Image img = decode_png(base64_decode(p["data"].get<std::string>()));
      CHECK(img.width == 8);
    }
  }
}

TEST_CASE("parse_output") {
  const ModelOutput o = parse_output(
      "<recall>path ahead</recall><observe>person far</observe><decide>keep going</decide><action>FORWARD</action>");
  CHECK(o.action == ActionType::FORWARD);
  CHECK(o.memory_thought == "path ahead");
  CHECK(o.observation_thought == "person far");
  CHECK(o.decision_thought == "keep going");

  CHECK(parse_output("<recall>a</recall><observe>b</observe><decide>c</decide><action> left-rotate \n</action>").action ==
        ActionType::LEFT_ROTATE);
  CHECK(parse_output("<recall>a</recall><observe>b</observe><decide>c</decide><action>stop</action>"
                     "<action>FORWARD</action>")
            .action == ActionType::STOP);

  CHECK(code_of([] { parse_output("<recall>a</recall><observe>b</observe><decide>c</decide>"); }) ==
        ErrorCode::MissingActionTag);
  CHECK(code_of([] { parse_output("<action>FORWARD"); }) == ErrorCode::MissingActionTag);
  CHECK(code_of([] { parse_output("<recall>a</recall><observe>b</observe><decide>c</decide><action>JUMP</action>"); }) ==
        ErrorCode::InvalidAction);
  CHECK(code_of([] { parse_output("<action>FORWARD</action>"); }) == ErrorCode::MissingSection);
  const ModelOutput lenient = parse_output("<action>FORWARD</action>", ParseMode::lenient);
  CHECK(lenient.action == ActionType::FORWARD);
  CHECK(lenient.memory_thought.empty());
}

TEST_CASE("compose then parse is the identity") {
  Rng rng(5);
  const std::string alphabet = "abc XYZ 019 .,;:!?-_\n\t<>/'\"";
  auto random_text = [&] {
    std::string s;
    const std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
    return s;
  };
  for (int t = 0; t < 2000; ++t) {
    std::string a = random_text(), b = random_text(), c = random_text();
    for (std::string* s : {&a, &b, &c}) {
      // Section texts never contain tag literals.
      for (const char* tag : {"<recall>", "</recall>", "<observe>", "</observe>", "<decide>", "</decide>", "<action>",
                              "</action>"}) {
        for (auto pos = s->find(tag); pos != std::string::npos; pos = s->find(tag)) s->erase(pos, 1);
      }
    }
    const ActionType action = kAllActions[rng.below(4)];
    const ModelOutput o = parse_output(compose_output(action, a, b, c));
    CHECK(o.action == action);
    CHECK(o.memory_thought == a);
    CHECK(o.observation_thought == b);
    CHECK(o.decision_thought == c);
  }
}

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::scripted_oracle, PolicyKind::random, PolicyKind::fixed, PolicyKind::remote}) {
    CHECK(policy_kind_from_string(to_string(k)) == k);
  }
  CHECK(policy_kind_from_string("scripted-oracle") == PolicyKind::scripted_oracle);
  CHECK(code_of([] { policy_kind_from_string("human"); }) == ErrorCode::BadArgs);
}

TEST_CASE("scripted oracle") {
  const World w;
  SUBCASE("target 2 m ahead with a 3 m radius stops") {
    const Episode e = straight_episode({2.0, 0.0});
    PolicyContext ctx;
    ctx.world = &w;
    ctx.episode = &e;
    ctx.oracle.waypoint_radius = 3.0;
    auto p = make_policy(PolicyKind::scripted_oracle, ctx);
    CHECK(parse_output(p->decide({}, {0, e.start, {}})).action == ActionType::STOP);
  }

  SUBCASE("turns toward a target on the left, then drives") {
    const Episode e = straight_episode({0.0, 6.0});
    PolicyContext ctx;
    ctx.world = &w;
    ctx.episode = &e;
    auto p = make_policy(PolicyKind::scripted_oracle, ctx);
    CHECK(parse_output(p->decide({}, {0, {0, 0, 0}, {}})).action == ActionType::LEFT_ROTATE);
    CHECK(parse_output(p->decide({}, {1, {0, 0, kPi / 2}, {}})).action == ActionType::FORWARD);
  }

  SUBCASE("needs an episode") {
    PolicyContext ctx;
    CHECK(code_of([&] { make_policy(PolicyKind::scripted_oracle, ctx); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { make_policy(PolicyKind::remote, ctx); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("oracle distance never grows on a forward step in open ground") {
  const World w;
  const OracleParams params;
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    std::vector<Eigen::Vector2d> wps;
    const int n = 1 + int(rng.below(4));
    for (int i = 0; i < n; ++i) wps.emplace_back(rng.uniform(-10, 10), rng.uniform(-10, 10));
    RobotState s({rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)});
    std::size_t cursor = 0;
    for (int k = 0; k < 200; ++k) {
      const OracleDecision d = oracle_decide(s.pose(), wps, cursor, params);
      cursor = d.cursor;
      if (d.action == ActionType::STOP) break;
      const double before = (s.pose().position() - wps[cursor]).norm();
      s = step(w, s, d.action, {});
      if (d.action == ActionType::FORWARD && !s.collided()) {
        CHECK((s.pose().position() - wps[cursor]).norm() <= before + 1e-12);
      }
    }
  }
}

TEST_CASE("random and fixed policies") {
  const Episode e = straight_episode({5, 5});
  PolicyContext ctx;
  ctx.seed = 99;
  ctx.episode = &e;
  auto sequence = [&](const PolicyContext& c) {
    auto p = make_policy(PolicyKind::random, c);
    std::vector<ActionType> out;
    for (int i = 0; i < 60; ++i) out.push_back(parse_output(p->decide({}, {i, {}, {}})).action);
    return out;
  };
  const auto a = sequence(ctx);
  CHECK(a == sequence(ctx));
  CHECK(std::set<ActionType>(a.begin(), a.end()).size() == 4);
  PolicyContext other = ctx;
  other.seed = 100;
  CHECK(a != sequence(other));

  auto fixed = make_policy(PolicyKind::fixed, ctx);
  for (int i = 0; i < 50; ++i) CHECK(parse_output(fixed->decide({}, {i, {}, {}})).action == ActionType::FORWARD);
}

TEST_CASE("remote policy") {
  const std::vector<Frame> frames = {small_frame(0, {9, 9, 9})};
  const SubtaskList subtasks = decompose_instruction("Go");
  RequestInputs in;
  in.instruction = "Go";
  in.subtasks = &subtasks;
  in.recent_frames = frames;
  in.step = 0;
  const ModelRequest request = build_request(PromptTemplate::builtin(), in);

  SUBCASE("answers from the stub") {
    testing::StubServer stub;
    stub.serve_decisions({{0, compose_output(ActionType::RIGHT_ROTATE, "m", "o", "d")}}, "garbage");
    stub.start();
    PolicyContext ctx;
    ctx.endpoint = HttpEndpoint::parse(stub.url());
    auto p = make_policy(PolicyKind::remote, ctx);
    CHECK(parse_output(p->decide(request, {})).action == ActionType::RIGHT_ROTATE);
    CHECK(stub.bodies().at(0) == request.serialize());
  }

  SUBCASE("one retry after a failure") {
    testing::StubServer stub;
    stub.serve_decisions({}, compose_output(ActionType::STOP, "", "", ""));
    stub.fail_first(1);
    stub.start();
    PolicyContext ctx;
    ctx.endpoint = HttpEndpoint::parse(stub.url());
    auto p = make_policy(PolicyKind::remote, ctx);
    CHECK(parse_output(p->decide(request, {})).action == ActionType::STOP);
    CHECK(stub.calls() == 2);
  }

  SUBCASE("two failures are fatal") {
    testing::StubServer stub;
    stub.serve_decisions({}, "x");
    stub.fail_first(2);
    stub.start();
    PolicyContext ctx;
    ctx.endpoint = HttpEndpoint::parse(stub.url());
    auto p = make_policy(PolicyKind::remote, ctx);
    CHECK(code_of([&] { p->decide(request, {}); }) == ErrorCode::EndpointUnreachable);
    CHECK(stub.calls() == 2);
  }

  SUBCASE("unreachable endpoint") {
    PolicyContext ctx;
    ctx.endpoint = HttpEndpoint::parse("http://127.0.0.1:" + std::to_string(testing::unused_port()));
    auto p = make_policy(PolicyKind::remote, ctx);
    CHECK(code_of([&] { p->decide(request, {}); }) == ErrorCode::EndpointUnreachable);
  }

  SUBCASE("empty text is a refusal") {
    testing::StubServer stub;
    stub.serve_fixed("/decide", 200, R"({"text": ""})", "application/json");
    stub.start();
    PolicyContext ctx;
    ctx.endpoint = HttpEndpoint::parse(stub.url());
    auto p = make_policy(PolicyKind::remote, ctx);
    CHECK(code_of([&] { p->decide(request, {}); }) == ErrorCode::ModelRefusal);
  }
}

TEST_CASE("rate limiter spaces calls") {
  RateLimiter limiter(50.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limiter.acquire();
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(95));
  RateLimiter unlimited;
  unlimited.acquire();
}

TEST_CASE("memory target hint") {
  PointCloud cloud;
  const Eigen::Vector2d worker(4.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    const double a = 2 * kPi * i / 400;
    for (int j = 0; j <= 200; ++j) {
      cloud.push_back({worker.x() + 0.2 * std::cos(a), worker.y() + 0.2 * std::sin(a), 1.7 * j / 200}, kWorkerColor);
    }
  }
  for (int x = -20; x <= 120; ++x)
    for (int y = -60; y <= 60; ++y) cloud.push_back({x * 0.1, y * 0.1, 0.0}, {110, 90, 60});
  Reconstruction r;
  r.cloud = cloud;
  MemoryRenderConfig cfg;
  cfg.created_at = "t";
  const SpatialMemory m = render_memory(r, cfg);
  const std::vector<MemoryView> views = {{Perspective::frontal, m.frontal, m.frontal_camera, m.intrinsics},
                                         {Perspective::oblique, m.oblique, m.oblique_camera, m.intrinsics}};
  const auto hint = memory_target_hint(views);
  REQUIRE(hint.has_value());
  CHECK((*hint - worker).norm() < 0.5);
  const auto frontal_only = memory_target_hint(std::span(views).first(1));
  REQUIRE(frontal_only.has_value());
  CHECK((*frontal_only - worker).norm() < 0.5);

  const std::vector<MemoryView> blank = {{Perspective::oblique, Image(640, 360), m.oblique_camera, m.intrinsics}};
  CHECK_FALSE(memory_target_hint(blank).has_value());
  CHECK_FALSE(memory_target_hint({}).has_value());
}
