#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "triage/classifier.h"
#include "triage/corpus.h"
#include "triage/embed.h"
#include "triage/metrics.h"
#include "triage/rng.h"
#include "triage/sampler.h"
#include "triage/synth.h"
#include "triage/topics.h"

namespace triage {
namespace {

std::vector<std::string> corpus_texts(size_t n) {
  CorpusSpec spec;
  spec.n_focused = n;
  spec.n_deployment = 10;
  std::vector<std::string> out;
  for (const auto& r : generate(spec).focused) out.push_back(preprocess(r, {}).clean_text);
  return out;
}

Examples embedded_examples(size_t n, size_t dim) {
  const auto texts = corpus_texts(n);
  EmbedderSpec spec;
  spec.dim = dim;
  HashedNgramEmbedder embedder(spec);
  Examples e;
  Rng rng(3);
  for (size_t i = 0; i < texts.size(); ++i) {
    e.ids.push_back("r" + std::to_string(i));
    e.features.push_back(embedder.embed(texts[i]).values);
    e.labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  e.labels[0] = 1;
  e.labels[1] = 0;
  return e;
}

void BM_HashedEmbed(benchmark::State& state) {
  const auto texts = corpus_texts(500);
  EmbedderSpec spec;
  spec.dim = static_cast<size_t>(state.range(0));
  HashedNgramEmbedder embedder(spec);
  for (auto _ : state) {
    for (const auto& t : texts) benchmark::DoNotOptimize(embedder.embed(t));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(texts.size()));
}
BENCHMARK(BM_HashedEmbed)->Arg(512)->Arg(4096);

void BM_TrainEpochs(benchmark::State& state) {
  const auto data = embedded_examples(static_cast<size_t>(state.range(0)), 512);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.checkpoint_every = 50;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, data, c, {}));
}
BENCHMARK(BM_TrainEpochs)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_PredictExamples(benchmark::State& state) {
  const auto data = embedded_examples(2000, 512);
  TrainConfig c;
  c.epochs = 1;
  c.checkpoint_every = 10;
  const auto ck = train(data, data, c, {}).back();
  for (auto _ : state) benchmark::DoNotOptimize(predict_examples(ck, data));
}
BENCHMARK(BM_PredictExamples)->Unit(benchmark::kMillisecond);

void BM_Cluster(benchmark::State& state) {
  const auto texts = corpus_texts(1000);
  EmbedderSpec spec;
  HashedNgramEmbedder embedder(spec);
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;
  for (size_t i = 0; i < texts.size(); ++i) {
    ids.push_back("r" + std::to_string(i));
    vectors.push_back(embedder.embed(texts[i]));
  }
  for (auto _ : state) benchmark::DoNotOptimize(cluster(ids, vectors, static_cast<size_t>(state.range(0)), 3));
}
BENCHMARK(BM_Cluster)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  Rng rng(9);
  const size_t n = static_cast<size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(0.1) ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(compute_auc(s, y));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

void BM_IntervalSample(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(interval_indices(100000, static_cast<size_t>(state.range(0))));
}
BENCHMARK(BM_IntervalSample)->Arg(10)->Arg(1000);

}  // namespace
}  // namespace triage

BENCHMARK_MAIN();
