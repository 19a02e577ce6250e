#pragma once

// HTTP front end: expression validation, raw/WAV rendering, analyses and
// the preset list. Sample data is served as raw bytes, structured results
// as JSON.

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bytebeat/analysis.hpp"
#include "bytebeat/api.hpp"
#include "bytebeat/audio.hpp"
#include "bytebeat/program_cache.hpp"

namespace bytebeat {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8008;
  std::uint64_t max_samples = std::uint64_t{1} << 24;
  std::size_t max_expr_bytes = 64 * 1024;
  std::size_t cache_capacity = 64;
  std::size_t chunk_samples = 8192;

  /// Defaults overridden by BB_PORT and BB_MAX_SAMPLES when set.
  static ServiceConfig from_env() {
    ServiceConfig c;
    if (const char* p = std::getenv("BB_PORT")) c.port = std::atoi(p);
    if (const char* m = std::getenv("BB_MAX_SAMPLES")) c.max_samples = std::strtoull(m, nullptr, 10);
    return c;
  }
};

namespace detail {

// Thrown for oversized requests; mapped to 413.
struct TooLarge : ApiError {
  using ApiError::ApiError;
};

inline std::uint64_t parse_count(const httplib::Request& req, const char* name,
                                 std::optional<std::uint64_t> fallback) {
  if (!req.has_param(name)) {
    if (fallback) return *fallback;
    throw ApiError(ApiErrorKind::Range, std::string("missing parameter '") + name + "'");
  }
  const std::string s = req.get_param_value(name);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc::result_out_of_range)
    throw TooLarge(ApiErrorKind::Range, std::string("parameter '") + name + "' too large");
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ApiError(ApiErrorKind::Range, std::string("parameter '") + name + "' is not a count");
  return v;
}

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace detail

struct RenderRequest {
  std::string expr;
  Mode mode = Mode::C32;
  std::uint64_t t0 = 0;
  std::uint64_t n = 0;
  std::uint32_t rate = kDefaultRate;
};

class Service {
public:
  explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)), cache_(cfg_.cache_capacity) {
    mount(server_);
  }

  const ServiceConfig& config() const noexcept { return cfg_; }
  ProgramCache& cache() noexcept { return cache_; }
  httplib::Server& server() noexcept { return server_; }

  /// Blocks serving on the configured host and port.
  bool listen() { return server_.listen(cfg_.host, cfg_.port); }

  /// Binds an ephemeral port on the configured host; pair with listen_after_bind().
  int bind_any_port() { return server_.bind_to_any_port(cfg_.host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  RenderRequest render_request(const httplib::Request& req, bool needs_n = true) const {
    RenderRequest r;
    if (!req.has_param("expr")) throw ApiError(ApiErrorKind::Range, "missing parameter 'expr'");
    r.expr = req.get_param_value("expr");
    if (r.expr.size() > cfg_.max_expr_bytes)
      throw detail::TooLarge(ApiErrorKind::Range, "expression exceeds size limit");
    if (req.has_param("mode")) {
      auto m = mode_from_string(req.get_param_value("mode"));
      if (!m) throw ApiError(ApiErrorKind::Range, "mode must be c32, c64 or js");
      r.mode = *m;
    }
    r.t0 = detail::parse_count(req, "t0", 0);
    r.n = detail::parse_count(req, "n", needs_n ? std::nullopt : std::optional<std::uint64_t>(0));
    if (r.n > cfg_.max_samples)
      throw detail::TooLarge(ApiErrorKind::Range,
                             "n exceeds limit of " + std::to_string(cfg_.max_samples));
    const std::uint64_t rate = detail::parse_count(req, "rate", kDefaultRate);
    if (rate == 0 || rate > 0xFFFFFFFFull)
      throw ApiError(ApiErrorKind::Range, "rate must be between 1 and 2^32-1");
    r.rate = static_cast<std::uint32_t>(rate);
    return r;
  }

private:
  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const detail::TooLarge& e) {
      detail::send_json(res, 413, to_json(e));
    } catch (const ApiError& e) {
      detail::send_json(res, e.kind() == ApiErrorKind::Internal ? 500 : 400, to_json(e));
    } catch (const std::exception& e) {
      detail::send_json(res, 500, to_json(ApiError(ApiErrorKind::Internal, e.what())));
    }
  }

  void mount(httplib::Server& s) {
    s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });

    s.Post("/expr/parse", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_parse(req, res); });
    });

    s.Get("/render", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_render(req, res); });
    });

    s.Get("/render.wav", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_render_wav(req, res); });
    });

    s.Get("/analyze/pitch", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_pitch(req, res); });
    });

    s.Get("/analyze/bits", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_bits(req, res); });
    });

    s.Get("/presets", [](const httplib::Request&, httplib::Response& res) {
      detail::send_json(res, 200, presets_json());
    });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr) {
      detail::send_json(res, 500,
                        to_json(ApiError(ApiErrorKind::Internal, "unhandled server error")));
    });
  }

  void handle_parse(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      throw ApiError(ApiErrorKind::Parse, "request body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("expr") || !body["expr"].is_string())
      throw ApiError(ApiErrorKind::Range, "body must be an object with a string 'expr'");
    const std::string expr = body["expr"];
    if (expr.size() > cfg_.max_expr_bytes)
      throw detail::TooLarge(ApiErrorKind::Range, "expression exceeds size limit");
    Mode mode = Mode::C32;
    if (body.contains("mode")) {
      auto m = body["mode"].is_string() ? mode_from_string(body["mode"].get<std::string>())
                                        : std::nullopt;
      if (!m) throw ApiError(ApiErrorKind::Range, "mode must be c32, c64 or js");
      mode = *m;
    }
    try {
      const TypedExpr typed = check_expression(expr, mode);
      detail::send_json(res, 200, {{"ok", true}, {"canonical", format(typed.expr())}});
    } catch (const ApiError& e) {
      detail::send_json(res, 200, {{"ok", false}, {"error", to_json(e)}});
    }
  }

  void handle_render(const httplib::Request& req, httplib::Response& res) {
    const RenderRequest r = render_request(req);
    auto program = cache_.get(r.expr, r.mode);
    const std::size_t chunk = cfg_.chunk_samples;
    res.status = 200;
    res.set_chunked_content_provider(
        "application/octet-stream",
        [program, r, chunk](std::size_t offset, httplib::DataSink& sink) {
          if (offset >= r.n) {
            sink.done();
            return true;
          }
          const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, r.n - offset));
          std::vector<std::uint8_t> buf(len);
          render_into(*program, r.t0 + offset, buf);
          if (!sink.write(reinterpret_cast<const char*>(buf.data()), buf.size())) return false;
          if (offset + len >= r.n) sink.done();
          return true;
        });
  }

  void handle_render_wav(const httplib::Request& req, httplib::Response& res) {
    const RenderRequest r = render_request(req);
    if (r.n > kMaxWavSamples) throw detail::TooLarge(ApiErrorKind::Range, "too many samples for WAV");
    auto program = cache_.get(r.expr, r.mode);
    const auto header = wav_header(r.n, r.rate);
    const std::size_t chunk = cfg_.chunk_samples;
    res.status = 200;
    res.set_content_provider(
        static_cast<std::size_t>(kWavHeaderSize + r.n), "audio/wav",
        [program, r, header, chunk](std::size_t offset, std::size_t length,
                                    httplib::DataSink& sink) {
          if (offset < kWavHeaderSize) {
            const std::size_t len = std::min(length, kWavHeaderSize - offset);
            return sink.write(reinterpret_cast<const char*>(header.data() + offset), len);
          }
          const std::size_t len = std::min(length, chunk);
          std::vector<std::uint8_t> buf(len);
          render_into(*program, r.t0 + (offset - kWavHeaderSize), buf);
          return sink.write(reinterpret_cast<const char*>(buf.data()), buf.size());
        });
  }

  void handle_pitch(const httplib::Request& req, httplib::Response& res) {
    const RenderRequest r = render_request(req);
    PitchOptions opt;
    opt.window_len = static_cast<std::size_t>(detail::parse_count(req, "window", 1024));
    if (opt.window_len < 128) throw ApiError(ApiErrorKind::Range, "window must be at least 128");
    if (req.has_param("ref")) {
      auto ref = reference_from_string(req.get_param_value("ref"));
      if (!ref) throw ApiError(ApiErrorKind::Range, "ref must be a440 or c256");
      opt.ref = *ref;
    }
    auto program = cache_.get(r.expr, r.mode);
    const SampleChunk chunk = render_range(*program, r.t0, static_cast<std::size_t>(r.n), r.rate);
    json out = json::array();
    for (const auto& ev : estimate_pitch(chunk, opt)) out.push_back(to_json(ev));
    detail::send_json(res, 200, out);
  }

  void handle_bits(const httplib::Request& req, httplib::Response& res) {
    const RenderRequest r = render_request(req);
    if (r.n == 0) throw ApiError(ApiErrorKind::Range, "n must be positive");
    const auto window = static_cast<std::size_t>(detail::parse_count(req, "window", 256));
    if (window < 2) throw ApiError(ApiErrorKind::Range, "window must be at least 2");
    auto program = cache_.get(r.expr, r.mode);
    detail::send_json(res, 200, to_json(bit_bands(*program, r.t0, static_cast<std::size_t>(r.n), window)));
  }

  ServiceConfig cfg_;
  ProgramCache cache_;
  httplib::Server server_;
};

}  // namespace bytebeat
