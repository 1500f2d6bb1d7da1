#include "tmkit/backend.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <mutex>

#include "test_util.hpp"

using namespace tmkit::backend;
using tmkit::templates::PromptRequest;

namespace {

PromptRequest request_with(const std::string& prompt, const std::string& query,
                           std::vector<tmkit::templates::Demonstration> demos = {},
                           int query_id = 0) {
  PromptRequest req;
  req.rendered = prompt;
  req.query = query;
  req.query_id = query_id;
  req.template_id = 17;
  req.demos = std::move(demos);
  return req;
}

// Scripted transport: records every call, pops canned responses in order,
// repeats the last response when the script runs out.
struct FakeTransport {
  struct Call {
    std::string host_port, path, body, bearer;
    double timeout = 0;
  };
  std::vector<HttpResponse> script;
  std::vector<Call> calls;
  std::mutex mu;

  HttpPostFn fn() {
    return [this](const std::string& host_port, const std::string& path,
                  const std::string& body, const std::string& bearer, double timeout) {
      std::lock_guard<std::mutex> lock(mu);
      calls.push_back({host_port, path, body, bearer, timeout});
      size_t i = std::min(calls.size() - 1, script.size() - 1);
      return script[i];
    };
  }
};

HttpResponse ok_response(const std::string& text) {
  HttpResponse r;
  r.transport_ok = true;
  r.status = 200;
  tmkit::jsonl::ordered_json body;
  body["choices"] = {{{"text", text}}};
  r.body = body.dump();
  return r;
}

HttpResponse status_response(int status) {
  HttpResponse r;
  r.transport_ok = true;
  r.status = status;
  r.body = "{}";
  return r;
}

HttpResponse transport_failure(const std::string& why) {
  HttpResponse r;
  r.transport_ok = false;
  r.transport_error = why;
  return r;
}

BackendConfig http_config() {
  BackendConfig c;
  c.kind = "http";
  c.endpoint = "http://localhost:9/v1/completions";
  c.model = "test-model";
  c.retry_initial_delay_ms = 1;
  c.retry_max_delay_ms = 4;
  return c;
}

}  // namespace

TEST(Stubs, CopyStubReturnsAdjacentDemoTarget) {
  CopyStubBackend stub;
  auto req = request_with("p", "q",
                          {{"s1", "t1", tmkit::templates::Provenance::kTm, std::nullopt},
                           {"s2", "t2", tmkit::templates::Provenance::kTm, std::nullopt}});
  Completion c = stub.complete(req, {});
  EXPECT_TRUE(c.ok);
  EXPECT_EQ(c.text, "t2");  // last demo sits next to the query
  EXPECT_EQ(c.attempts, 1);

  Completion none = stub.complete(request_with("p", "q"), {});
  EXPECT_FALSE(none.ok);
  EXPECT_EQ(none.error, "no-demonstration");
}

TEST(Stubs, EchoStubReturnsQuery) {
  EchoStubBackend stub;
  Completion c = stub.complete(request_with("p", "die Quelle"), {});
  EXPECT_TRUE(c.ok);
  EXPECT_EQ(c.text, "die Quelle");
}

TEST(Factory, DispatchesOnKind) {
  BackendConfig c;
  c.kind = "copy-stub";
  EXPECT_EQ(make_backend(c)->name(), "copy-stub");
  c.kind = "echo-stub";
  EXPECT_EQ(make_backend(c)->name(), "echo-stub");
  c.kind = "teleport";
  EXPECT_THROW(make_backend(c), std::invalid_argument);
}

TEST(HttpClient, RequiresEndpointAndTransport) {
  FakeTransport fake;
  fake.script = {ok_response("x")};
  BackendConfig c = http_config();
  c.endpoint = "";
  EXPECT_THROW(HttpBackend(c, fake.fn()), std::invalid_argument);
  c.endpoint = "localhost:8080";  // missing scheme
  EXPECT_THROW(HttpBackend(c, fake.fn()), std::invalid_argument);
  c = http_config();
  EXPECT_THROW(HttpBackend(c, nullptr), std::invalid_argument);
}

TEST(HttpClient, CredentialComesFromNamedEnvVar) {
  FakeTransport fake;
  fake.script = {ok_response("x")};
  BackendConfig c = http_config();
  c.api_key_env = "TMKIT_TEST_KEY";

  ::unsetenv("TMKIT_TEST_KEY");
  EXPECT_THROW(HttpBackend(c, fake.fn()), std::runtime_error);
  ::setenv("TMKIT_TEST_KEY", "", 1);
  EXPECT_THROW(HttpBackend(c, fake.fn()), std::runtime_error);

  ::setenv("TMKIT_TEST_KEY", "sk-test-abc", 1);
  HttpBackend be(c, fake.fn());
  be.complete(request_with("p", "q"), {});
  ASSERT_EQ(fake.calls.size(), 1u);
  EXPECT_EQ(fake.calls[0].bearer, "sk-test-abc");
  ::unsetenv("TMKIT_TEST_KEY");

  // Without api_key_env no bearer token is sent.
  FakeTransport anon;
  anon.script = {ok_response("x")};
  HttpBackend open(http_config(), anon.fn());
  open.complete(request_with("p", "q"), {});
  EXPECT_EQ(anon.calls[0].bearer, "");
}

TEST(HttpClient, BuildsTheWireRequest) {
  FakeTransport fake;
  fake.script = {ok_response("hallo")};
  BackendConfig c = http_config();
  c.extra_request_fields["user"] = "tester";
  c.timeout_seconds = 12.5;
  HttpBackend be(c, fake.fn());

  DecodingParams params;
  params.temperature = 0.25;
  Completion done = be.complete(request_with("PROMPT TEXT", "three word query"), params);
  EXPECT_TRUE(done.ok);
  EXPECT_EQ(done.text, "hallo");
  EXPECT_EQ(done.http_status, 200);

  ASSERT_EQ(fake.calls.size(), 1u);
  EXPECT_EQ(fake.calls[0].host_port, "http://localhost:9");
  EXPECT_EQ(fake.calls[0].path, "/v1/completions");
  EXPECT_DOUBLE_EQ(fake.calls[0].timeout, 12.5);

  auto body = tmkit::jsonl::ordered_json::parse(fake.calls[0].body);
  EXPECT_EQ(body.at("model"), "test-model");
  EXPECT_EQ(body.at("prompt"), "PROMPT TEXT");
  EXPECT_DOUBLE_EQ(body.at("temperature").get<double>(), 0.25);
  // Derived cap: 4 tokens per query token plus 16 slack.
  EXPECT_EQ(body.at("max_tokens").get<int>(), 4 * 3 + 16);
  ASSERT_TRUE(body.at("stop").is_array());
  EXPECT_EQ(body.at("stop")[0], "\n");
  EXPECT_EQ(body.at("user"), "tester");
}

TEST(HttpClient, CustomWireFieldNamesAndPath) {
  FakeTransport fake;
  HttpResponse r;
  r.transport_ok = true;
  r.status = 200;
  r.body = "{\"result\":{\"outputs\":[{\"content\":\"first\"},{\"content\":\"second\"}]}}";
  fake.script = {r};

  BackendConfig c = http_config();
  c.wire.model_field = "engine";
  c.wire.prompt_field = "input";
  c.wire.max_tokens_field = "limit";
  c.wire.completion_path = "result.outputs.1.content";
  HttpBackend be(c, fake.fn());
  DecodingParams params;
  params.max_output_tokens = 99;

  Completion done = be.complete(request_with("p", "q"), params);
  EXPECT_TRUE(done.ok);
  EXPECT_EQ(done.text, "second");
  auto body = tmkit::jsonl::ordered_json::parse(fake.calls[0].body);
  EXPECT_EQ(body.at("engine"), "test-model");
  EXPECT_EQ(body.at("input"), "p");
  EXPECT_EQ(body.at("limit").get<int>(), 99);
}

TEST(HttpClient, BadResponseBodiesFailWithoutRetry) {
  FakeTransport fake;
  HttpResponse not_json;
  not_json.transport_ok = true;
  not_json.status = 200;
  not_json.body = "plain text";
  fake.script = {not_json};
  HttpBackend be(http_config(), fake.fn());
  Completion c = be.complete(request_with("p", "q"), {});
  EXPECT_FALSE(c.ok);
  EXPECT_EQ(c.attempts, 1);
  EXPECT_NE(c.error.find("not JSON"), std::string::npos);

  FakeTransport fake2;
  HttpResponse wrong_shape;
  wrong_shape.transport_ok = true;
  wrong_shape.status = 200;
  wrong_shape.body = "{\"choices\":[{\"text\":42}]}";
  fake2.script = {wrong_shape};
  HttpBackend be2(http_config(), fake2.fn());
  Completion c2 = be2.complete(request_with("p", "q"), {});
  EXPECT_FALSE(c2.ok);
  EXPECT_NE(c2.error.find("choices.0.text"), std::string::npos);
}

TEST(HttpClient, RetriesTransportFailuresAndRetryableStatuses) {
  FakeTransport fake;
  fake.script = {transport_failure("connect refused"), status_response(503),
                 status_response(429), ok_response("done")};
  BackendConfig c = http_config();
  c.max_retries = 3;
  HttpBackend be(c, fake.fn());
  Completion done = be.complete(request_with("p", "q"), {});
  EXPECT_TRUE(done.ok);
  EXPECT_EQ(done.text, "done");
  EXPECT_EQ(done.attempts, 4);
  EXPECT_EQ(fake.calls.size(), 4u);
}

TEST(HttpClient, ClientErrorsOtherThan429DoNotRetry) {
  for (int status : {400, 401, 403, 404}) {
    FakeTransport fake;
    fake.script = {status_response(status)};
    HttpBackend be(http_config(), fake.fn());
    Completion c = be.complete(request_with("p", "q"), {});
    EXPECT_FALSE(c.ok) << status;
    EXPECT_EQ(c.attempts, 1) << status;
    EXPECT_EQ(c.http_status, status);
    EXPECT_EQ(fake.calls.size(), 1u) << status;
  }
}

TEST(HttpClient, GivesUpAfterMaxRetries) {
  FakeTransport fake;
  fake.script = {status_response(500)};
  BackendConfig c = http_config();
  c.max_retries = 2;
  HttpBackend be(c, fake.fn());
  Completion done = be.complete(request_with("p", "q"), {});
  EXPECT_FALSE(done.ok);
  EXPECT_EQ(done.attempts, 3);  // first try plus two retries
  EXPECT_EQ(done.error, "http status 500");
  EXPECT_EQ(fake.calls.size(), 3u);
}

TEST(HttpClient, RetryAfterHeaderOverridesBackoff) {
  FakeTransport fake;
  HttpResponse throttled = status_response(429);
  throttled.retry_after_seconds = 0;  // "retry immediately"
  fake.script = {throttled, ok_response("x")};
  BackendConfig c = http_config();
  c.retry_initial_delay_ms = 5000;  // would dominate the test if used
  HttpBackend be(c, fake.fn());

  auto start = std::chrono::steady_clock::now();
  Completion done = be.complete(request_with("p", "q"), {});
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_TRUE(done.ok);
  EXPECT_EQ(done.attempts, 2);
  EXPECT_LT(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count(), 2000);
}

TEST(Decoding, DerivedTokenCapScalesWithQuery) {
  EXPECT_EQ(default_max_output_tokens(""), 16);
  EXPECT_EQ(default_max_output_tokens("one"), 20);
  EXPECT_EQ(default_max_output_tokens("a b c d e"), 36);
}

TEST(Batch, PreservesInputOrder) {
  EchoStubBackend stub;
  std::vector<PromptRequest> requests;
  for (int i = 0; i < 24; ++i)
    requests.push_back(request_with("p", "query-" + std::to_string(i), {}, i));
  auto results = translate_batch(stub, requests, {}, 4);
  ASSERT_EQ(results.size(), 24u);
  for (int i = 0; i < 24; ++i) {
    EXPECT_TRUE(results[i].ok);
    EXPECT_EQ(results[i].text, "query-" + std::to_string(i));
  }
}

TEST(Batch, ConcurrencyStaysUnderTheCap) {
  struct CountingBackend : Backend {
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    std::string name() const override { return "counting"; }
    Completion complete(const PromptRequest&, const DecodingParams&) override {
      int now = ++in_flight;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --in_flight;
      Completion c;
      c.ok = true;
      c.attempts = 1;
      return c;
    }
  } backend;

  std::vector<PromptRequest> requests(12, request_with("p", "q"));
  auto results = translate_batch(backend, requests, {}, 3);
  EXPECT_EQ(results.size(), 12u);
  EXPECT_LE(backend.peak.load(), 3);
  EXPECT_GE(backend.peak.load(), 1);
}

TEST(Batch, FailFastCancelsTheRest) {
  CopyStubBackend stub;  // fails on demo-less requests
  std::vector<PromptRequest> requests;
  requests.push_back(request_with("p", "q0"));  // no demos: fails
  for (int i = 1; i < 6; ++i)
    requests.push_back(request_with(
        "p", "q" + std::to_string(i),
        {{"s", "t", tmkit::templates::Provenance::kTm, std::nullopt}}, i));

  // Serial execution makes the cancellation set deterministic.
  auto results = translate_batch(stub, requests, {}, 1, /*fail_fast=*/true);
  EXPECT_FALSE(results[0].ok);
  EXPECT_EQ(results[0].error, "no-demonstration");
  for (size_t i = 1; i < results.size(); ++i) {
    EXPECT_FALSE(results[i].ok);
    EXPECT_EQ(results[i].error, "canceled");
  }

  // Without fail_fast everything still runs.
  auto all = translate_batch(stub, requests, {}, 1, /*fail_fast=*/false);
  EXPECT_FALSE(all[0].ok);
  for (size_t i = 1; i < all.size(); ++i) EXPECT_TRUE(all[i].ok);
}

TEST(Batch, RejectsNonPositiveCap) {
  EchoStubBackend stub;
  EXPECT_THROW(translate_batch(stub, {}, {}, 0), std::invalid_argument);
}

TEST(Transcript, AppendsOneLinePerCompletion) {
  testutil::TempDir tmp;
  std::string path = (tmp / "transcript.jsonl").string();
  EchoStubBackend stub;
  std::vector<PromptRequest> requests = {request_with("p0", "a", {}, 0),
                                         request_with("p1", "b", {}, 1)};
  auto results = translate_batch(stub, requests, {}, 2);
  append_transcript(path, requests, results);
  append_transcript(path, requests, results);  // append, not truncate

  auto lines = testutil::read_lines(path);
  ASSERT_EQ(lines.size(), 4u);
  auto rec = tmkit::jsonl::ordered_json::parse(lines[0]);
  EXPECT_EQ(rec.at("query_id").get<int>(), 0);
  EXPECT_EQ(rec.at("prompt"), "p0");
  EXPECT_EQ(rec.at("text"), "a");
  EXPECT_TRUE(rec.at("ok").get<bool>());
  EXPECT_EQ(rec.at("attempts").get<int>(), 1);

  // Empty path: disabled, no file created.
  append_transcript("", requests, results);
  EXPECT_THROW(append_transcript(path, requests, {}), std::invalid_argument);
}
