#include "spitgate/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "spitgate/error.h"
#include "spitgate/rtp_media.h"

namespace spitgate {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<Verdict> try_analyze(const CallCapture& call, const db::PatternStore& store,
                                   const PrototypeTable& table, const AnalysisConfig& config) {
  const auto layer1_start = Clock::now();
  const auto invite = first_invite(call);
  if (!invite) return std::nullopt;

  Verdict verdict;
  verdict.call_id = call.call_id;
  verdict.layer1 = classify_signaling(invite->record, store, config.combination);
  verdict.layer1.elapsed_seconds = seconds_since(layer1_start);
  if (verdict.layer1.is_spam()) {
    verdict.final_class = CallClass::kSpam;
    return verdict;
  }

  const auto layer2_start = Clock::now();
  const CallerMedia media = caller_media(call, *invite);
  verdict.decoded_rtp_packets = media.decoded_packets;
  LayerVerdict layer2 = media.stream
                            ? classify_media(*media.stream, table, config.media, config.frames)
                            : insufficient_media(config.media, media.problem);
  layer2.elapsed_seconds = seconds_since(layer2_start);
  verdict.final_class = layer2.is_spam() ? CallClass::kSpam : CallClass::kGenuine;
  verdict.layer2 = std::move(layer2);
  return verdict;
}

// Runs `work(i)` for i in [0, count) on up to `jobs` threads; rethrows the
// first failure.
template <typename Work>
void parallel_for(std::size_t count, unsigned jobs, Work work) {
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          work(i);
        } catch (...) {
          std::scoped_lock lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

// Media sessions among orphaned datagrams: distinct (source, SSRC) of
// anything that parses as RTP.
std::size_t orphan_media_sessions(std::span<const Datagram> orphans, std::uint16_t sip_port) {
  std::set<std::tuple<std::uint32_t, std::uint16_t, std::uint32_t>> sessions;
  for (const auto& d : orphans) {
    if (d.source.port == sip_port || d.destination.port == sip_port) continue;
    try {
      const auto packet = rtp::parse(d.payload);
      sessions.emplace(d.source.address, d.source.port, packet.ssrc);
    } catch (const FormatError&) {
    }
  }
  return sessions.size();
}

TimingStats summarize(std::span<const double> samples) {
  TimingStats stats;
  stats.samples = samples.size();
  if (samples.empty()) return stats;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean_seconds = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double sq = 0.0;
    for (double s : samples) sq += (s - stats.mean_seconds) * (s - stats.mean_seconds);
    stats.stddev_seconds = std::sqrt(sq / static_cast<double>(samples.size() - 1));
  }
  return stats;
}

std::string join_reasons(const Verdict& v) {
  std::string out;
  auto append = [&out](const std::vector<std::string>& reasons) {
    for (const auto& r : reasons) {
      if (!out.empty()) out += ';';
      out += r;
    }
  };
  append(v.layer1.reasons);
  if (v.layer2) append(v.layer2->reasons);
  return out.empty() ? "-" : out;
}

}  // namespace

bool Verdict::consistent() const {
  if (layer1.is_spam()) return !layer2 && final_class == CallClass::kSpam;
  if (!layer2) return false;
  return (final_class == CallClass::kSpam) == layer2->is_spam();
}

std::optional<InviteInfo> first_invite(const CallCapture& call) {
  for (const auto& d : call.sip_messages) {
    try {
      const auto message = sip::parse_message(d.payload);
      if (!message.is_invite()) continue;
      return InviteInfo{sip::extract_invite(message, format_ipv4(d.source.address)), d.source};
    } catch (const FormatError&) {
    }
  }
  return std::nullopt;
}

CallerMedia caller_media(const CallCapture& call, const InviteInfo& invite) {
  std::vector<rtp::Packet> from_caller;
  std::vector<rtp::Packet> everything;
  for (const auto& d : call.rtp_packets) {
    rtp::Packet packet;
    try {
      packet = rtp::parse(d.payload);
    } catch (const FormatError&) {
      continue;
    }
    const bool caller_sent =
        d.source.address == invite.source.address &&
        (!invite.record.media_port || d.source.port == *invite.record.media_port);
    if (caller_sent) from_caller.push_back(packet);
    everything.push_back(std::move(packet));
  }

  CallerMedia media;
  auto streams = rtp::reassemble(from_caller.empty() ? std::move(everything) : std::move(from_caller));
  if (streams.empty()) {
    media.problem = "no RTP packets";
    return media;
  }
  const auto largest = std::ranges::max_element(
      streams, {}, [](const rtp::OrderedStream& s) { return s.packets.size(); });
  try {
    media.stream = rtp::stream_from(*largest);
    media.decoded_packets = largest->packets.size();
  } catch (const InvalidArgument& e) {
    media.problem = e.what();
  }
  return media;
}

Verdict analyze_call(const CallCapture& call, const db::PatternStore& store,
                     const PrototypeTable& table, const AnalysisConfig& config) {
  auto verdict = try_analyze(call, store, table, config);
  if (!verdict) throw InvalidArgument(fmt::format("call '{}' has no INVITE", call.call_id));
  return std::move(*verdict);
}

std::size_t RunReport::spam_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(verdicts, &Verdict::is_spam));
}

std::size_t RunReport::genuine_count() const { return verdicts.size() - spam_count(); }

double RunReport::mean_layer1_seconds() const {
  if (verdicts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : verdicts) sum += v.layer1.elapsed_seconds;
  return sum / static_cast<double>(verdicts.size());
}

std::optional<double> RunReport::mean_layer2_seconds() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : verdicts) {
    if (!v.layer2) continue;
    sum += v.layer2->elapsed_seconds;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

RunReport analyze_calls(const GroupedCalls& grouped, const db::PatternStore& store,
                        const PrototypeTable& table, const AnalysisConfig& config) {
  std::vector<std::optional<Verdict>> results(grouped.calls.size());
  parallel_for(grouped.calls.size(), config.jobs, [&](std::size_t i) {
    results[i] = try_analyze(grouped.calls[i], store, table, config);
  });

  RunReport report;
  for (auto& r : results) {
    if (r) {
      report.verdicts.push_back(std::move(*r));
    } else {
      ++report.skipped;
    }
  }
  report.skipped += orphan_media_sessions(grouped.orphans, config.sip_port);
  report.orphan_datagrams = grouped.orphans.size();
  std::ranges::stable_sort(report.verdicts, {}, &Verdict::call_id);
  return report;
}

RunReport analyze_capture(const std::filesystem::path& capture, const std::filesystem::path& store,
                          const std::filesystem::path& prototypes, const AnalysisConfig& config) {
  const auto patterns = db::load(store);
  const auto table = load_prototypes(prototypes);
  const auto contents = read_capture(capture);
  const auto grouped = group_calls(contents.datagrams, config.sip_port);
  RunReport report = analyze_calls(grouped, patterns, table, config);
  report.skipped_frames = contents.skipped_frames;
  return report;
}

void write_report(const RunReport& report, std::ostream& out) {
  out << "call_id\tfinal\tlayer1\tlayer1_ms\tlayer2\tlayer2_ms\treasons\n";
  for (const auto& v : report.verdicts) {
    fmt::print(out, "{}\t{}\t{}\t{:.3f}\t{}\t{}\t{}\n", v.call_id, to_string(v.final_class),
               to_string(v.layer1.decision), v.layer1.elapsed_seconds * 1e3,
               v.layer2 ? std::string(to_string(v.layer2->decision)) : "-",
               v.layer2 ? fmt::format("{:.3f}", v.layer2->elapsed_seconds * 1e3) : "-",
               join_reasons(v));
  }
  fmt::print(out, "# calls\t{}\n# spam\t{}\n# genuine\t{}\n# skipped\t{}\n", report.verdicts.size(),
             report.spam_count(), report.genuine_count(), report.skipped);
  fmt::print(out, "# mean_layer1_ms\t{:.3f}\n", report.mean_layer1_seconds() * 1e3);
  const auto layer2 = report.mean_layer2_seconds();
  fmt::print(out, "# mean_layer2_ms\t{}\n", layer2 ? fmt::format("{:.3f}", *layer2 * 1e3) : "-");
}

int exit_code(const RunReport& report) { return report.spam_count() > 0 ? 3 : 0; }

BenchmarkResult benchmark(std::span<const std::filesystem::path> corpus,
                          const db::PatternStore& store, const PrototypeTable& table,
                          const AnalysisConfig& config, std::size_t repetitions) {
  if (repetitions < 3) {
    throw InvalidArgument(fmt::format("benchmark needs at least 3 repetitions, got {}", repetitions));
  }
  std::vector<CallCapture> calls;
  for (const auto& path : corpus) {
    auto grouped = group_calls(read_capture(path).datagrams, config.sip_port);
    for (auto& call : grouped.calls) {
      if (first_invite(call)) calls.push_back(std::move(call));
    }
  }
  if (calls.empty()) throw InvalidArgument("benchmark corpus holds no analysable calls");

  std::vector<double> layer1;
  std::vector<double> layer2;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (const auto& call : calls) {
      const Verdict v = analyze_call(call, store, table, config);
      layer1.push_back(v.layer1.elapsed_seconds);
      if (v.layer2) layer2.push_back(v.layer2->elapsed_seconds);
    }
  }
  BenchmarkResult result;
  result.calls = calls.size();
  result.repetitions = repetitions;
  result.layer1 = summarize(layer1);
  if (!layer2.empty()) result.layer2 = summarize(layer2);
  return result;
}

void write_benchmark(const BenchmarkResult& result, std::ostream& out) {
  auto ms = [](double s) { return fmt::format("{:.6f}", s * 1e3); };
  fmt::print(out, "calls\t{}\nrepetitions\t{}\n", result.calls, result.repetitions);
  fmt::print(out, "layer1_mean_ms\t{}\nlayer1_stddev_ms\t{}\n", ms(result.layer1.mean_seconds),
             ms(result.layer1.stddev_seconds));
  fmt::print(out, "layer2_mean_ms\t{}\nlayer2_stddev_ms\t{}\n",
             result.layer2 ? ms(result.layer2->mean_seconds) : "-",
             result.layer2 ? ms(result.layer2->stddev_seconds) : "-");
}

std::vector<CallFeatures> capture_features(const GroupedCalls& grouped,
                                           const AnalysisConfig& config, double scale) {
  std::vector<CallFeatures> rows;
  for (const auto& call : grouped.calls) {
    const auto invite = first_invite(call);
    if (!invite) continue;
    const auto media = caller_media(call, *invite);
    if (!media.stream || media.stream->samples.size() < config.frames.frame_length) continue;
    rows.push_back({call.call_id, features::extract(media.stream->samples, config.frames, scale),
                    features::silence_stats(media.stream->samples, config.frames)});
  }
  std::ranges::stable_sort(rows, {}, &CallFeatures::call_id);
  return rows;
}

void write_features(std::span<const CallFeatures> rows, std::ostream& out) {
  for (const auto& r : rows) {
    fmt::print(out, "{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\t{}\n", r.call_id,
               r.vector.zero_crossing_rate, r.vector.absolute_mean, r.vector.energy,
               r.vector.entropy, r.silence.silence_fraction, r.silence.longest_silent_run,
               r.silence.longest_voiced_run);
  }
}

}  // namespace spitgate
