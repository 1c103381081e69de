#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "balancelab/core.hpp"
#include "balancelab/error.hpp"

// Minimal HTTP/1.1 message handling for the proxy: request heads in, response
// heads patched, nothing else.
namespace balancelab::http {

inline constexpr std::size_t kMaxHeadBytes = 64 * 1024;

struct RequestHead {
  std::string method;
  std::string target;  // origin-form: path[?query]
  std::string version;
  Headers headers;
  std::size_t content_length = 0;
  std::size_t head_bytes = 0;  // including the blank line
};

enum class ParseStatus { kIncomplete, kComplete, kBad };

struct ParseResult {
  ParseStatus status = ParseStatus::kIncomplete;
  RequestHead head;
  std::string error;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline ParseResult bad(std::string why) {
  ParseResult r;
  r.status = ParseStatus::kBad;
  r.error = std::move(why);
  return r;
}

// Parses the request line and headers out of `buffer`. kIncomplete means more
// bytes are needed.
inline ParseResult parse_request_head(std::string_view buffer) {
  const std::size_t end = buffer.find("\r\n\r\n");
  if (end == std::string_view::npos) {
    if (buffer.size() > kMaxHeadBytes) return bad("request head too large");
    return {};
  }
  ParseResult result;
  RequestHead& head = result.head;
  head.head_bytes = end + 4;
  std::string_view rest = buffer.substr(0, end + 2);

  const std::size_t line_end = rest.find("\r\n");
  const std::string_view line = rest.substr(0, line_end);
  rest.remove_prefix(line_end + 2);
  const std::size_t sp1 = line.find(' ');
  const std::size_t sp2 = sp1 == std::string_view::npos ? sp1 : line.find(' ', sp1 + 1);
  if (sp1 == std::string_view::npos || sp2 == std::string_view::npos ||
      line.find(' ', sp2 + 1) != std::string_view::npos) {
    return bad("malformed request line");
  }
  head.method = std::string(line.substr(0, sp1));
  head.target = std::string(line.substr(sp1 + 1, sp2 - sp1 - 1));
  head.version = std::string(line.substr(sp2 + 1));
  if (head.method.empty() || head.target.empty() || head.target.front() != '/') {
    return bad("request target must be origin-form");
  }
  if (head.version != "HTTP/1.1" && head.version != "HTTP/1.0") {
    return bad("unsupported HTTP version");
  }

  bool have_length = false;
  while (!rest.empty()) {
    const std::size_t eol = rest.find("\r\n");
    const std::string_view field = rest.substr(0, eol);
    rest.remove_prefix(eol + 2);
    const std::size_t colon = field.find(':');
    if (colon == std::string_view::npos || colon == 0 || field.front() == ' ' ||
        field.front() == '\t') {
      return bad("malformed header line");
    }
    const std::string_view name = field.substr(0, colon);
    const std::string_view value = trim(field.substr(colon + 1));
    if (iequals(name, "Transfer-Encoding")) return bad("chunked request bodies are not supported");
    if (iequals(name, "Content-Length")) {
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        return bad("invalid Content-Length");
      }
      if (have_length && n != head.content_length) return bad("conflicting Content-Length");
      have_length = true;
      head.content_length = n;
    }
    head.headers.add(std::string(name), std::string(value));
  }
  result.status = ParseStatus::kComplete;
  return result;
}

// Value of cookie `name` inside a Cookie header value ("a=1; b=2").
inline std::optional<std::string> cookie_value(std::string_view header, std::string_view name) {
  while (!header.empty()) {
    const std::size_t semi = header.find(';');
    const std::string_view pair = trim(header.substr(0, semi));
    const std::size_t eq = pair.find('=');
    if (eq != std::string_view::npos && trim(pair.substr(0, eq)) == name) {
      return std::string(trim(pair.substr(eq + 1)));
    }
    if (semi == std::string_view::npos) break;
    header.remove_prefix(semi + 1);
  }
  return std::nullopt;
}

// Engine view of a parsed request. The RDP cookie is the `mstshash` cookie.
inline std::optional<Request> to_request(const RequestHead& head, std::uint32_t client_ip,
                                         std::uint64_t id, double now) {
  const auto method = parse_method(head.method);
  if (!method) return std::nullopt;
  Request r;
  r.request_id = id;
  r.arrival_time = now;
  r.method = *method;
  const std::size_t q = head.target.find('?');
  r.path = head.target.substr(0, q);
  if (q != std::string::npos) r.query = head.target.substr(q + 1);
  r.headers = head.headers;
  r.client_ip = client_ip;
  if (const std::string* cookie = head.headers.find("Cookie")) {
    r.rdp_cookie = cookie_value(*cookie, "mstshash");
  }
  return r;
}

// Request head as sent upstream: request line and headers kept in order,
// any Connection header replaced by `Connection: close`.
inline std::string upstream_head(const RequestHead& head) {
  std::string out;
  out.reserve(head.head_bytes + 32);
  out.append(head.method).append(" ").append(head.target).append(" ").append(head.version);
  out.append("\r\n");
  for (const auto& [name, value] : head.headers) {
    if (iequals(name, "Connection") || iequals(name, "Keep-Alive")) continue;
    out.append(name).append(": ").append(value).append("\r\n");
  }
  out.append("Connection: close\r\n\r\n");
  return out;
}

// Status code from a response status line, if the buffer holds one.
inline std::optional<int> response_status(std::string_view response) {
  const std::size_t eol = response.find("\r\n");
  if (eol == std::string_view::npos || !response.starts_with("HTTP/1.")) return std::nullopt;
  const std::size_t sp = response.find(' ');
  if (sp == std::string_view::npos || sp + 4 > eol) return std::nullopt;
  int code = 0;
  auto [ptr, ec] = std::from_chars(response.data() + sp + 1, response.data() + sp + 4, code);
  if (ec != std::errc{}) return std::nullopt;
  return code;
}

// Inserts one header line right after the status line.
inline bool inject_header(std::string& response, std::string_view name, std::string_view value) {
  const std::size_t eol = response.find("\r\n");
  if (eol == std::string::npos) return false;
  std::string line;
  line.append(name).append(": ").append(value).append("\r\n");
  response.insert(eol + 2, line);
  return true;
}

inline std::string_view reason_phrase(int status) {
  switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 501: return "Not Implemented";
    case 502: return "Bad Gateway";
    case 503: return "Service Unavailable";
    case 504: return "Gateway Timeout";
    default: return "Error";
  }
}

inline std::string simple_response(int status, std::string_view body) {
  std::string out = "HTTP/1.1 " + std::to_string(status) + " " + std::string(reason_phrase(status)) +
                    "\r\nContent-Type: text/plain\r\nContent-Length: " +
                    std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
  out.append(body);
  return out;
}

}  // namespace balancelab::http
