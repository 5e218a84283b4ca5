#include <benchmark/benchmark.h>

#include "spitgate/classify_media.h"
#include "spitgate/classify_signaling.h"
#include "spitgate/features.h"
#include "spitgate/pipeline.h"
#include "spitgate/rtp_media.h"
#include "spitgate/traffic_synth.h"

namespace spitgate {
namespace {

const std::string kDataDir = SPITGATE_DATA_DIR;

synth::CallProfile genuine_profile() {
  synth::CallProfile p;
  p.seed = 7;
  return p;
}

void BM_SignalingLayer(benchmark::State& state) {
  const auto store = db::load(kDataDir + "/patterns.txt");
  const auto call = synth::synth_call(genuine_profile());
  const auto invite = first_invite(call);
  for (auto _ : state) {
    benchmark::DoNotOptimize(classify_signaling(invite->record, store));
  }
}
BENCHMARK(BM_SignalingLayer);

void BM_MediaLayer(benchmark::State& state) {
  const auto table = load_prototypes(kDataDir + "/prototypes_calibrated.txt");
  const auto call = synth::synth_call(genuine_profile());
  const auto invite = first_invite(call);
  const AnalysisConfig config;
  for (auto _ : state) {
    const auto media = caller_media(call, *invite);
    benchmark::DoNotOptimize(classify_media(*media.stream, table, config.media, config.frames));
  }
}
BENCHMARK(BM_MediaLayer)->Unit(benchmark::kMillisecond);

void BM_FullCall(benchmark::State& state) {
  const auto store = db::load(kDataDir + "/patterns.txt");
  const auto table = load_prototypes(kDataDir + "/prototypes_calibrated.txt");
  const auto call = synth::synth_call(genuine_profile());
  for (auto _ : state) {
    benchmark::DoNotOptimize(analyze_call(call, store, table, AnalysisConfig{}));
  }
}
BENCHMARK(BM_FullCall)->Unit(benchmark::kMillisecond);

void BM_UlawDecode(benchmark::State& state) {
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i * 37);
  for (auto _ : state) benchmark::DoNotOptimize(rtp::decode_ulaw(payload));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UlawDecode)->Arg(160)->Arg(80000);

void BM_FeatureExtract(benchmark::State& state) {
  const auto audio = synth::synth_audio(genuine_profile());
  const features::FrameSpec spec;
  for (auto _ : state) {
    benchmark::DoNotOptimize(features::extract(audio, spec));
    benchmark::DoNotOptimize(features::silence_stats(audio, spec));
  }
}
BENCHMARK(BM_FeatureExtract)->Unit(benchmark::kMicrosecond);

void BM_Normalize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(db::normalize("T E S T C O M P A N Y dot C O M"));
}
BENCHMARK(BM_Normalize);

}  // namespace
}  // namespace spitgate

BENCHMARK_MAIN();
