// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/objectid.hpp"
#include "maskpipe/postprocess.hpp"
#include "maskpipe/synthetic.hpp"
#include "maskpipe/tracking.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace maskpipe;

namespace {

BinaryMask blob(int w, int h, int x0, int y0, int x1, int y1)
{
    BinaryMask m(w, h, 0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            m.at(x, y) = 1;
        }
    }
    return m;
}

void BM_SimAsym(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto a = blob(n, n, 0, 0, n / 2, n);
    const auto b = blob(n, n, n / 4, 0, n, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim_asym(a, b));
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_SimAsym)->Arg(256)->Arg(1024);

void BM_Postprocess(benchmark::State& state)
{
    const int layers = static_cast<int>(state.range(0));
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> pos(0, 400);
    FrameLayers frame{0, {}};
    for (int i = 0; i < layers; ++i) {
        const int x = pos(rng);
        const int y = pos(rng);
        frame.layers.push_back(Layer{static_cast<LayerKey>(i), blob(512, 512, x, y, x + 100, y + 100), "person"});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(postprocess_frame(frame));
    }
}
BENCHMARK(BM_Postprocess)->Arg(4)->Arg(16);

void BM_MergePrediction(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    LayerRegistry reg;
    TrackerPrediction pred{0, {}};
    for (int i = 0; i < 4; ++i) {
        const LayerId id = reg.allocate("person", 0);
        ProbMask pm(n, n, 0.0f);
        for (int y = 0; y < n; ++y) {
            for (int x = i * n / 4; x < (i + 1) * n / 4; ++x) {
                pm.at(x, y) = 0.9f;
            }
        }
        pred.per_layer.emplace(id, std::move(pm));
    }
    CacheFrame cache(n, n);
    cache.ids.at(0, 0) = 1;
    cache.probs.at(0, 0) = 0.5f;
    for (auto _ : state) {
        benchmark::DoNotOptimize(merge_prediction(cache, pred, reg, 0.1));
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_MergePrediction)->Arg(256)->Arg(1024);

ObjectIdFrame codec_frame(int n)
{
    ObjectIdFrame f(n, n);
    f.manifest = {{1, "person:1"}, {2, "person:2"}};
    for (std::size_t i = 0; i < f.pixels.size(); ++i) {
        if (i % 3 == 0) {
            f.pixels[i] = {{1, 0.6f}, {2, 0.4f}};
        } else if (i % 3 == 1) {
            f.pixels[i] = {{2, 1.0f}};
        }
    }
    return f;
}

void BM_ObjectIdEncode(benchmark::State& state)
{
    const auto f = codec_frame(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode(f));
    }
}
BENCHMARK(BM_ObjectIdEncode)->Arg(512);

void BM_ObjectIdDecode(benchmark::State& state)
{
    const auto bytes = encode(codec_frame(static_cast<int>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(decode(bytes));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ObjectIdDecode)->Arg(512);

void BM_SyntheticTrack(benchmark::State& state)
{
    SceneSpec spec;
    spec.width = 256;
    spec.height = 192;
    spec.frame_count = 21;
    SceneObject o;
    o.keys = {{0, 60, 96, 40, 100}, {20, 190, 96, 40, 100}};
    spec.objects.push_back(o);
    const SyntheticScene scene(spec);
    std::map<LayerId, BinaryMask> prompt{{1, scene.object_mask(0, 0)}};
    std::vector<int> frames(21);
    for (int i = 0; i < 21; ++i) {
        frames[static_cast<std::size_t>(i)] = i;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(scene.track(frames, prompt));
    }
}
BENCHMARK(BM_SyntheticTrack);

}  // namespace

BENCHMARK_MAIN();
