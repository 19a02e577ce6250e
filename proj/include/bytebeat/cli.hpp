#pragma once

// Command-line front end. Subcommands:
//   render EXPR [-m MODE] [-n N] [-t T0] [-r RATE] (-o FILE.wav | --raw)
//   analyze pitch|bits|series EXPR ...
//   plot EXPR -n N -o FILE.ppm
//   presets [--json]
//   serve [--port P]
//   bench EXPR [-n N]
// EXPR may also be "@id" to name a preset.
// Exit status: 0 success, 1 expression/IO error, 2 usage error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bytebeat/analysis.hpp"
#include "bytebeat/api.hpp"
#include "bytebeat/audio.hpp"
#include "bytebeat/corpus.hpp"
#include "bytebeat/service.hpp"

namespace bytebeat {

namespace detail {

inline const std::vector<std::string> kModeNames = {"c32", "c64", "js"};
inline const std::vector<std::string> kRefNames = {"a440", "c256"};

inline std::string resolve_expr(const std::string& arg) {
  if (arg.size() > 1 && arg[0] == '@') {
    if (const Preset* p = find_preset(std::string_view(arg).substr(1))) return std::string(p->source);
    throw ApiError(ApiErrorKind::Range, "unknown preset '" + arg.substr(1) + "'");
  }
  return arg;
}

/// Streams samples in fixed-size blocks so memory stays bounded for long renders.
inline void stream_samples(const Program& p, std::uint64_t t0, std::uint64_t n, Sink& sink) {
  constexpr std::size_t kBlock = 8192;
  std::vector<std::uint8_t> buf;
  for (std::uint64_t done = 0; done < n;) {
    const auto len = static_cast<std::size_t>(std::min<std::uint64_t>(kBlock, n - done));
    buf.resize(len);
    render_into(p, t0 + done, buf);
    sink.write(buf);
    done += len;
  }
  sink.flush();
}

struct CommonOpts {
  std::string expr;
  std::string mode_name = "c32";
  std::uint64_t t0 = 0;
  std::uint64_t n = 80000;
  std::uint32_t rate = kDefaultRate;

  Mode mode() const { return *mode_from_string(mode_name); }
};

inline void add_common(CLI::App* cmd, CommonOpts& o, bool with_rate = true) {
  cmd->add_option("expr", o.expr, "Expression, or @preset-id")->required();
  cmd->add_option("-m,--mode", o.mode_name, "Numeric semantics: c32, c64 or js")
      ->check(CLI::IsMember(kModeNames, CLI::ignore_case));
  cmd->add_option("-t,--t0", o.t0, "First value of t");
  cmd->add_option("-n", o.n, "Number of samples");
  if (with_rate) cmd->add_option("-r,--rate", o.rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"bytebeat workbench: render, analyze and serve one-liner music"};
  app.require_subcommand(1);

  detail::CommonOpts render_opts;
  std::string wav_path;
  bool raw = false;
  auto* render = app.add_subcommand("render", "Render samples as WAV or raw unsigned 8-bit PCM");
  detail::add_common(render, render_opts);
  auto* out_opt = render->add_option("-o,--output", wav_path, "WAV file to write");
  auto* raw_opt = render->add_flag("--raw", raw, "Write raw bytes to standard output");
  out_opt->excludes(raw_opt);
  raw_opt->excludes(out_opt);

  auto* analyze = app.add_subcommand("analyze", "Analyze an expression (JSON output)");
  analyze->require_subcommand(1);

  detail::CommonOpts pitch_opts;
  pitch_opts.n = 8192;
  std::size_t pitch_window = 1024;
  std::string pitch_ref = "a440";
  auto* pitch = analyze->add_subcommand("pitch", "Autocorrelation pitch track");
  detail::add_common(pitch, pitch_opts);
  pitch->add_option("--window", pitch_window, "Analysis window in samples")->check(CLI::Range(128, 1 << 24));
  pitch->add_option("--ref", pitch_ref, "Pitch reference: a440 or c256")
      ->check(CLI::IsMember(detail::kRefNames, CLI::ignore_case));

  detail::CommonOpts bits_opts;
  bits_opts.n = 65536;
  std::size_t bits_window = 256;
  auto* bits = analyze->add_subcommand("bits", "Per-bit square-wave activity");
  detail::add_common(bits, bits_opts, false);
  bits->add_option("--window", bits_window, "Window in samples")->check(CLI::Range(2, 1 << 24));

  std::string series_expr;
  std::string series_mode = "c32";
  std::uint64_t stride = 1024;
  std::size_t count = 16;
  auto* series_cmd = analyze->add_subcommand("series", "Sample the expression's value every STRIDE");
  series_cmd->add_option("expr", series_expr, "Expression, or @preset-id")->required();
  series_cmd->add_option("-m,--mode", series_mode, "Numeric semantics")
      ->check(CLI::IsMember(detail::kModeNames, CLI::ignore_case));
  series_cmd->add_option("--stride", stride, "Distance in t between values")->check(CLI::PositiveNumber);
  series_cmd->add_option("--count", count, "Number of values");

  detail::CommonOpts plot_opts;
  plot_opts.n = 1024;
  std::string ppm_path;
  auto* plot = app.add_subcommand("plot", "Amplitude plot as a binary PPM image");
  detail::add_common(plot, plot_opts, false);
  plot->add_option("-o,--output", ppm_path, "PPM file to write")->required();

  bool presets_as_json = false;
  auto* presets_cmd = app.add_subcommand("presets", "List the formula collection");
  presets_cmd->add_flag("--json", presets_as_json, "Print JSON instead of a table");

  ServiceConfig serve_cfg = ServiceConfig::from_env();
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", serve_cfg.port, "Port (env BB_PORT)");
  serve->add_option("--host", serve_cfg.host, "Bind address");
  serve->add_option("--max-samples", serve_cfg.max_samples, "Largest n per request (env BB_MAX_SAMPLES)");
  serve->add_option("--max-expr-bytes", serve_cfg.max_expr_bytes, "Largest expression");
  serve->add_option("--cache-capacity", serve_cfg.cache_capacity, "Compiled program cache size");

  detail::CommonOpts bench_opts;
  bench_opts.n = 1'000'000;
  auto* bench = app.add_subcommand("bench", "Compare VM and tree-walking throughput");
  detail::add_common(bench, bench_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  std::string current_expr;
  try {
    if (*render) {
      if (wav_path.empty() && !raw) {
        err << "render: one of -o FILE.wav or --raw is required\n";
        return 2;
      }
      current_expr = detail::resolve_expr(render_opts.expr);
      const Program p = compile(check_expression(current_expr, render_opts.mode()));
      if (raw) {
        Sink sink = Sink::stream(out);
        detail::stream_samples(p, render_opts.t0, render_opts.n, sink);
      } else {
        Sink sink = Sink::file(wav_path);
        sink.write(wav_header(render_opts.n, render_opts.rate));
        detail::stream_samples(p, render_opts.t0, render_opts.n, sink);
      }
      return 0;
    }

    if (*pitch) {
      current_expr = detail::resolve_expr(pitch_opts.expr);
      const Program p = compile(check_expression(current_expr, pitch_opts.mode()));
      PitchOptions opt;
      opt.window_len = pitch_window;
      opt.ref = *reference_from_string(pitch_ref);
      const auto events = estimate_pitch(render_range(p, pitch_opts.t0, pitch_opts.n, pitch_opts.rate), opt);
      json j = json::array();
      for (const auto& ev : events) j.push_back(to_json(ev));
      out << j.dump() << '\n';
      return 0;
    }

    if (*bits) {
      current_expr = detail::resolve_expr(bits_opts.expr);
      if (bits_opts.n == 0) throw ApiError(ApiErrorKind::Range, "n must be positive");
      const Program p = compile(check_expression(current_expr, bits_opts.mode()));
      out << to_json(bit_bands(p, bits_opts.t0, bits_opts.n, bits_window)).dump() << '\n';
      return 0;
    }

    if (*series_cmd) {
      current_expr = detail::resolve_expr(series_expr);
      const TypedExpr e = check_expression(current_expr, *mode_from_string(series_mode));
      json j = json::array();
      for (const Value& v : series(e, stride, count)) j.push_back(to_json(v));
      out << j.dump() << '\n';
      return 0;
    }

    if (*plot) {
      current_expr = detail::resolve_expr(plot_opts.expr);
      if (plot_opts.n == 0) throw ApiError(ApiErrorKind::Range, "n must be positive");
      const Program p = compile(check_expression(current_expr, plot_opts.mode()));
      Sink sink = Sink::file(ppm_path);
      write_ppm(render_bitmap(p, plot_opts.t0, plot_opts.n), sink);
      return 0;
    }

    if (*presets_cmd) {
      if (presets_as_json) {
        out << presets_json().dump(2) << '\n';
        return 0;
      }
      for (const auto& pr : presets()) {
        out << std::left << std::setw(20) << pr.id << std::setw(15) << to_string(pr.status)
            << std::setw(20) << pr.section << pr.source;
        if (pr.credit) out << "  (" << *pr.credit << ")";
        out << '\n';
      }
      return 0;
    }

    if (*serve) {
      Service service(serve_cfg);
      err << "listening on http://" << serve_cfg.host << ':' << serve_cfg.port << '\n';
      if (!service.listen()) {
        err << "error: cannot listen on " << serve_cfg.host << ':' << serve_cfg.port << '\n';
        return 1;
      }
      return 0;
    }

    if (*bench) {
      current_expr = detail::resolve_expr(bench_opts.expr);
      const TypedExpr e = check_expression(current_expr, bench_opts.mode());
      const Program p = compile(e);
      using clock = std::chrono::steady_clock;
      std::vector<std::uint8_t> buf(bench_opts.n);

      auto start = clock::now();
      render_into(p, bench_opts.t0, buf);
      const double vm_s = std::chrono::duration<double>(clock::now() - start).count();

      unsigned checksum = 0;
      start = clock::now();
      for (std::uint64_t i = 0; i < bench_opts.n; ++i) checksum += quantize(eval_ast(e, bench_opts.t0 + i));
      const double ast_s = std::chrono::duration<double>(clock::now() - start).count();

      const double n = static_cast<double>(bench_opts.n);
      out << "samples: " << bench_opts.n << '\n'
          << "vm:      " << std::fixed << std::setprecision(0) << n / vm_s << " samples/s\n"
          << "oracle:  " << n / ast_s << " samples/s\n"
          << "speedup: " << std::setprecision(2) << ast_s / vm_s << "x\n";
      static_cast<void>(checksum);
      return 0;
    }
  } catch (const ApiError& e) {
    err << describe(e, current_expr);
    return 1;
  } catch (const WriteError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace bytebeat
