#include <gtest/gtest.h>

#include "balancelab/http.hpp"

using namespace balancelab;
using namespace balancelab::http;

TEST(ParseHead, CompleteGet) {
  const auto r = parse_request_head("GET /blog/?p=2 HTTP/1.1\r\nHost: x\r\nCookie: a=1; mstshash=bob\r\n\r\n");
  ASSERT_EQ(r.status, ParseStatus::kComplete);
  EXPECT_EQ(r.head.method, "GET");
  EXPECT_EQ(r.head.target, "/blog/?p=2");
  EXPECT_EQ(r.head.headers.size(), 2u);
  const auto req = to_request(r.head, 0x7f000001, 5, 1.5);
  ASSERT_TRUE(req);
  EXPECT_EQ(req->path, "/blog/");
  EXPECT_EQ(req->query, "p=2");
  EXPECT_EQ(req->rdp_cookie, "bob");
  EXPECT_EQ(req->request_id, 5u);
}

TEST(ParseHead, IncompleteUntilBlankLine) {
  EXPECT_EQ(parse_request_head("GET / HTTP/1.1\r\nHost: x\r\n").status, ParseStatus::kIncomplete);
}

TEST(ParseHead, ContentLengthRecorded) {
  const auto r = parse_request_head("POST /c HTTP/1.1\r\nContent-Length: 5\r\n\r\nhello");
  ASSERT_EQ(r.status, ParseStatus::kComplete);
  EXPECT_EQ(r.head.content_length, 5u);
  EXPECT_EQ(r.head.head_bytes, std::string("POST /c HTTP/1.1\r\nContent-Length: 5\r\n\r\n").size());
}

TEST(ParseHead, RejectsMalformedInput) {
  for (const char* text : {
           "GET\r\n\r\n",
           "GET / HTTP/1.1 extra\r\n\r\n",
           "GET http://x/ HTTP/1.1\r\n\r\n",
           "GET / HTTP/2\r\n\r\n",
           "GET / HTTP/1.1\r\nNoColon\r\n\r\n",
           "GET / HTTP/1.1\r\n folded: x\r\n\r\n",
           "POST / HTTP/1.1\r\nContent-Length: x\r\n\r\n",
           "POST / HTTP/1.1\r\nContent-Length: 1\r\nContent-Length: 2\r\n\r\n",
           "POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n",
       }) {
    EXPECT_EQ(parse_request_head(text).status, ParseStatus::kBad) << text;
  }
}

TEST(ParseHead, OversizedHeadIsBad) {
  const std::string big = "GET / HTTP/1.1\r\nX: " + std::string(kMaxHeadBytes, 'a');
  EXPECT_EQ(parse_request_head(big).status, ParseStatus::kBad);
}

TEST(ToRequest, OnlyGetAndPost) {
  const auto r = parse_request_head("DELETE / HTTP/1.1\r\n\r\n");
  ASSERT_EQ(r.status, ParseStatus::kComplete);
  EXPECT_FALSE(to_request(r.head, 0, 0, 0));
}

TEST(Cookie, FindsNamedValue) {
  EXPECT_EQ(cookie_value("a=1; b = 2", "b"), "2");
  EXPECT_FALSE(cookie_value("a=1", "c"));
}

TEST(Upstream, ForcesConnectionClose) {
  const auto r = parse_request_head("GET / HTTP/1.1\r\nHost: x\r\nConnection: keep-alive\r\nKeep-Alive: 5\r\n\r\n");
  EXPECT_EQ(upstream_head(r.head), "GET / HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
}

TEST(Response, StatusAndHeaderInjection) {
  std::string resp = "HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok";
  EXPECT_EQ(response_status(resp), 200);
  ASSERT_TRUE(inject_header(resp, "X-Balancelab-Server", "srv1"));
  EXPECT_EQ(resp, "HTTP/1.1 200 OK\r\nX-Balancelab-Server: srv1\r\nContent-Length: 2\r\n\r\nok");
  EXPECT_FALSE(response_status("garbage"));
}

TEST(Response, SimpleResponseIsWellFormed) {
  const std::string r = simple_response(503, "busy");
  EXPECT_EQ(response_status(r), 503);
  EXPECT_NE(r.find("Content-Length: 4\r\n"), std::string::npos);
  EXPECT_EQ(r.substr(r.size() - 4), "busy");
}
