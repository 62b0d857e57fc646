#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "fatigue/live_server.hpp"
#include "fatigue/live_session.hpp"

using namespace fatigue;
using namespace fatigue::live;

namespace {

Json profile_spec(double tl = 50.0) {
  return {{"kind", "profile"}, {"params", {{"F", 1.0}, {"R", 0.2}, {"r", 1.0}}}, {"tl", tl}};
}

Json task_spec() {
  return {{"kind", "task"}, {"model", "arm4"}, {"task", "shoulder_hold"}, {"params", {{"F", 1.0}, {"R", 0.2}}}};
}

Session profile_session(double tl = 50.0) { return Session("s1", parse_scenario(profile_spec(tl))); }

bool is_ack(const Json& j) { return j.at("type") == "ack"; }

std::vector<Frame> run(Session& s, int n) {
  std::vector<Frame> out;
  for (int k = 0; k < n; ++k) {
    if (auto f = s.step()) out.push_back(*f);
  }
  return out;
}

}  // namespace

TEST_CASE("first frame is rested") {
  const Session s = profile_session();
  const Frame f = s.frame();
  CHECK(f.index == 0);
  CHECK(f.t == 0.0);
  REQUIRE(f.dofs.size() == 1);
  CHECK(f.dofs[0].mf == 0.0);
  CHECK(f.dofs[0].rc == 1.0);
  CHECK(f.dofs[0].mr == 100.0);

  Session task("t", parse_scenario(task_spec()));
  CHECK(task.is_task());
  CHECK(task.frame().dofs.size() == 4);
  CHECK(task.frame().pose.has_value());
  CHECK(task.frame().mean_rc == 1.0);
}

TEST_CASE("sessions are independent") {
  Session a = profile_session();
  Session b = profile_session();
  a.handle({{"type", "set_params"}, {"F", 3.0}});
  run(a, 30);
  run(b, 30);
  CHECK(a.frame().dofs[0].mf > b.frame().dofs[0].mf);
  CHECK(b.params().fatigue == 1.0);
}

TEST_CASE("malformed scenarios are rejected") {
  for (const Json& bad : {Json(), Json{{"kind", "swim"}}, Json{{"kind", "profile"}, {"tl", 50.0}},
                          Json{{"kind", "profile"}, {"params", {{"F", -1.0}, {"R", 0.2}}}, {"tl", 50.0}},
                          Json{{"kind", "profile"}, {"params", {{"F", 1.0}, {"R", 0.2}}}, {"tl", 150.0}},
                          Json{{"kind", "task"}, {"model", "octopus"}, {"task", "hop"}}}) {
    CAPTURE(bad.dump());
    try {
      parse_scenario(bad);
      FAIL("accepted");
    } catch (const ProtocolError& e) {
      CHECK(e.code() == "invalid_scenario");
    }
  }
}

TEST_CASE("set_params is acknowledged and governs the next frame") {
  Session s = profile_session();
  run(s, 10);
  const Json ack = s.handle({{"type", "set_params"}, {"F", 2.0}, {"r", 5.0}});
  REQUIRE(is_ack(ack));
  CHECK(ack["applies_at"] == 11);
  CHECK(s.params().fatigue == 1.0);  // not before the next step
  const Frame f = *s.step();
  CHECK(f.index == 11);
  CHECK(f.params.fatigue == 2.0);
  CHECK(f.params.rest_multiplier == 5.0);
  CHECK(f.params.recovery == 0.2);  // untouched fields keep their values

  // two updates before one step coalesce
  s.handle({{"type", "set_params"}, {"F", 0.5}});
  s.handle({{"type", "set_params"}, {"R", 0.4}});
  const Frame g = *s.step();
  CHECK(g.params.fatigue == 0.5);
  CHECK(g.params.recovery == 0.4);
}

TEST_CASE("invalid updates change nothing") {
  Session s = profile_session();
  run(s, 5);
  const Frame before = s.frame();
  const Json err = s.handle({{"type", "set_params"}, {"F", -1.0}});
  CHECK(err["type"] == "error");
  CHECK(err["code"] == "invalid_params");
  // a rejected message does not leak half of its fields
  CHECK(s.handle({{"type", "set_params"}, {"F", 3.0}, {"R", "x"}})["code"] == "bad_message");
  CHECK(s.handle({{"type", "set_params"}})["code"] == "invalid_params");
  CHECK(s.handle({{"type", "set_load"}, {"tl", 101.0}})["code"] == "invalid_load");
  CHECK(s.handle({{"type", "dance"}})["code"] == "unknown_type");
  CHECK(s.handle(Json::array())["code"] == "bad_message");
  CHECK(s.handle({{"type", "reset"}, {"mode", "random"}})["code"] == "bad_message");
  CHECK(s.frame() == before);
  CHECK(s.step()->params == before.params);

  Session task("t", parse_scenario(task_spec()));
  CHECK(task.handle({{"type", "set_load"}, {"tl", 10.0}})["code"] == "unsupported");
}

TEST_CASE("zero coefficients freeze capacity") {
  Session s = profile_session(80.0);
  run(s, 20);
  s.handle({{"type", "set_params"}, {"F", 0.0}, {"R", 0.0}, {"r", 0.0}});
  s.step();
  const double rc = s.frame().dofs[0].rc;
  const double mf = s.frame().dofs[0].mf;
  for (const Frame& f : run(s, 60)) {
    CHECK(f.dofs[0].rc == rc);
    CHECK(f.dofs[0].mf == doctest::Approx(mf).epsilon(1e-12));
  }
}

TEST_CASE("raising F speeds up fatigue") {
  Session slow = profile_session();
  Session fast = profile_session();
  run(slow, 15);
  run(fast, 15);
  fast.handle({{"type", "set_params"}, {"F", 3.0}});
  const double base = slow.frame().dofs[0].mf;
  const double d_slow = slow.step()->dofs[0].mf - base;
  const double d_fast = fast.step()->dofs[0].mf - base;
  CHECK(d_fast > d_slow);
}

TEST_CASE("pause holds the frame counter") {
  Session s = profile_session();
  run(s, 5);
  s.handle({{"type", "pause"}});
  CHECK(s.paused());
  CHECK_FALSE(s.step());
  CHECK_FALSE(s.step());
  CHECK(s.frame_index() == 5);
  s.handle({{"type", "resume"}});
  CHECK(s.step()->index == 6);
}

TEST_CASE("reset") {
  Session s = profile_session();
  run(s, 40);
  REQUIRE(s.frame().dofs[0].mf > 0.0);
  s.handle({{"type", "reset"}});
  const Frame f = *s.step();
  CHECK(f.index == 41);
  CHECK(f.t == 0.0);
  CHECK(f.dofs[0].mf == 0.0);
  CHECK(f.dofs[0].rc == 1.0);

  Session a = profile_session();
  Session b = profile_session();
  run(a, 12);
  for (Session* x : {&a, &b}) x->handle({{"type", "reset"}, {"mode", "random"}, {"seed", 7}});
  const Frame fa = *a.step();
  const Frame fb = *b.step();
  CHECK(fa.dofs == fb.dofs);
  CHECK(fa.dofs[0].mf > 0.0);
  CHECK(run(a, 10).back().dofs == run(b, 10).back().dofs);
}

TEST_CASE("frame json round trip") {
  Session s("t", parse_scenario(task_spec()));
  run(s, 3);
  Frame f = *s.step(0.25);
  const Json j = to_json(f);
  CHECK(j["type"] == "frame");
  CHECK(j["i"] == 4);
  CHECK(j["lag"] == 0.25);
  CHECK(frame_from_json(j) == f);
  CHECK(frame_from_json(Json::parse(j.dump())) == f);
  double sum = 0.0;
  for (const auto& d : f.dofs) sum += d.rc;
  CHECK(f.mean_rc == doctest::Approx(sum / static_cast<double>(f.dofs.size())));

  Json broken = j;
  broken.erase("dofs");
  CHECK_THROWS_AS(frame_from_json(broken), ProtocolError);
}

TEST_CASE("streamed frames equal the offline replay") {
  SUBCASE("profile") {
    Session s = profile_session();
    std::vector<Frame> frames{s.frame()};
    for (int k = 1; k <= 150; ++k) {
      if (k == 40) s.handle({{"type", "set_params"}, {"F", 2.0}, {"R", 0.05}});
      if (k == 60) s.handle({{"type", "set_load"}, {"tl", 20.0}});
      if (k == 90) s.handle({{"type", "set_params"}, {"r", 15.0}});
      frames.push_back(*s.step());
    }
    const Trace t = replay(s.scenario(), s.history(), frames.back().index);
    REQUIRE(t.rows.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      CHECK(t.rows[i].dofs[0].state.fatigued == frames[i].dofs[0].mf);
      CHECK(t.rows[i].dofs[0].state.active == frames[i].dofs[0].ma);
      CHECK(t.rows[i].dofs[0].target_load == frames[i].dofs[0].tl);
    }
  }
  SUBCASE("task") {
    Session s("t", parse_scenario(task_spec()));
    std::vector<Frame> frames{s.frame()};
    for (int k = 1; k <= 120; ++k) {
      if (k == 30) s.handle({{"type", "set_params"}, {"F", 3.0}});
      if (k == 70) s.handle({{"type", "set_params"}, {"F", 0.2}, {"R", 0.5}});
      frames.push_back(*s.step());
    }
    const Trace t = replay(s.scenario(), s.history(), frames.back().index);
    REQUIRE(t.rows.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      for (std::size_t d = 0; d < 4; ++d) {
        CHECK(t.rows[i].dofs[d].state.fatigued == frames[i].dofs[d].mf);
        CHECK(t.rows[i].dofs[d].applied == frames[i].dofs[d].torque);
      }
    }
  }
  SUBCASE("reset history cannot be replayed") {
    Session s = profile_session();
    run(s, 3);
    s.handle({{"type", "reset"}});
    run(s, 3);
    CHECK_THROWS_AS(replay(s.scenario(), s.history(), s.frame_index()), ConfigError);
  }
}

TEST_CASE("bind address from the environment") {
  ::setenv("FATIGUE_LIVE_HOST", "0.0.0.0", 1);
  ::setenv("FATIGUE_LIVE_PORT", "9100", 1);
  const ServerOptions o = options_from_env();
  CHECK(o.host == "0.0.0.0");
  CHECK(o.port == 9100);
  ::unsetenv("FATIGUE_LIVE_HOST");
  ::unsetenv("FATIGUE_LIVE_PORT");
  CHECK(options_from_env().port == 8765);
}

TEST_CASE("websocket round trip") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  ServerOptions opts;
  opts.port = 0;
  opts.frame_rate = 120.0;  // keeps the test short
  Server server(opts);
  std::thread th([&] { server.run(); });

  boost::asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  tcp::resolver resolver(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/");

  auto send = [&](const Json& j) { ws.write(boost::asio::buffer(j.dump())); };
  auto recv = [&] {
    beast::flat_buffer buf;
    ws.read(buf);
    return Json::parse(beast::buffers_to_string(buf.data()));
  };

  send({{"type", "set_params"}, {"F", 2.0}});
  CHECK(recv()["code"] == "unknown_session");
  ws.write(boost::asio::buffer(std::string("{not json")));
  CHECK(recv()["code"] == "bad_json");

  send({{"type", "start"}, {"scenario", profile_spec()}});
  const Json ack = recv();
  REQUIRE(is_ack(ack));
  CHECK(ack["applies_at"] == 0);
  const std::string id = ack["session"];
  const Json first = recv();
  CHECK(first["type"] == "frame");
  CHECK(first["i"] == 0);

  send({{"type", "start"}, {"scenario", profile_spec()}});
  std::uint64_t expect = 1;
  bool saw_exists = false;
  bool sent = false;
  std::uint64_t applies_at = 0;
  bool checked = false;
  while (expect < 60) {
    const Json m = recv();
    if (m["type"] == "frame") {
      CHECK(m["i"].get<std::uint64_t>() == expect);  // in order, no gaps
      if (applies_at > 0 && expect >= applies_at) {
        CHECK(m["params"]["F"] == 2.0);
        checked = true;
      } else {
        CHECK(m["params"]["F"] == 1.0);
      }
      ++expect;
      if (expect == 20 && !sent) {
        send({{"type", "set_params"}, {"session", id}, {"F", 2.0}});
        sent = true;
      }
    } else if (m["type"] == "ack") {
      applies_at = m["applies_at"];
      CHECK(applies_at >= expect);
    } else {
      CHECK(m["code"] == "session_exists");
      saw_exists = true;
    }
  }
  CHECK(saw_exists);
  CHECK(checked);

  ws.close(websocket::close_code::normal);
  server.stop();
  th.join();
}
