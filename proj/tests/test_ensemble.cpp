#include <algorithm>

#include "doctest.h"
#include "model_fixture.hpp"
#include "pens/ensemble.hpp"
#include "pens/error.hpp"
#include "pens/rng.hpp"
#include "test_support.hpp"

using namespace pens;
using namespace pens::testing;

namespace {

ProbabilityVector random_distribution(Rng& rng, std::size_t n) {
  ProbabilityVector p(n);
  double total = 0;
  for (auto& v : p) total += (v = uniform(rng, 0.01, 1.0));
  for (auto& v : p) v /= total;
  return p;
}

std::shared_ptr<const ClassifierModel> trained_member(Architecture a, PoolKind pool,
                                                      std::span<const PatentDocument> docs) {
  auto c = tiny_config(a);
  c.pool = pool;
  auto model = tiny_model(c, docs);
  const auto ex = encode_examples(docs, pool, c.feature, model.vocabulary(), model.labels());
  train(model, ex, {});
  return std::make_shared<const ClassifierModel>(std::move(model));
}

}  // namespace

TEST_CASE("combine examples") {
  const ProbabilityVector p = {0.2, 0.5, 0.3};
  CHECK(combine(p, p, p) == p);
  const ProbabilityVector a = {1, 0}, b = {0, 1};
  const auto out = combine(a, b, b);
  CHECK(out[0] == doctest::Approx(1.0 / 3));
  CHECK(out[1] == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(combine(a, b, p), ShapeError);
}

TEST_CASE("averaged ranking and tie rule") {
  const ProbabilityVector p1 = {0.6, 0.4}, p2 = {0.1, 0.9}, p3 = {0.2, 0.8};
  const auto avg = combine(p1, p2, p3);
  CHECK(avg[0] == doctest::Approx(0.3));
  CHECK(avg[1] == doctest::Approx(0.7));
  CHECK(rank_labels("d", avg).top() == 1);
  const ProbabilityVector tie = {0.5, 0.5};
  CHECK(rank_labels("d", combine(tie, tie, tie)).top() == 0);
  CHECK(rank_labels("d", ProbabilityVector{0.2, 0.4, 0.4}).labels == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("combine properties on random distributions") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 10);
    const auto p1 = random_distribution(rng, n), p2 = random_distribution(rng, n),
               p3 = random_distribution(rng, n);
    const auto out = combine(p1, p2, p3);
    CHECK(combine(p1, p1, p1) == p1);
    double total = 0;
    for (double v : out) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const double alpha = uniform(rng, 0.1, 10.0);
    ProbabilityVector s1 = p1, s2 = p2, s3 = p3;
    for (auto* v : {&s1, &s2, &s3}) {
      for (auto& x : *v) x *= alpha;
    }
    const auto scaled = combine(s1, s2, s3);
    for (std::size_t i = 0; i < n; ++i) CHECK(scaled[i] == doctest::Approx(alpha * out[i]));
    CHECK(rank_labels("d", scaled).labels == rank_labels("d", out).labels);

    const std::size_t c = uniform_index(rng, n);
    ProbabilityVector certain(n, 0.0), flat(n, 1.0 / static_cast<double>(n));
    certain[c] = 1.0;
    const auto mixed = combine(certain, flat, flat);
    const double nn = static_cast<double>(n);
    CHECK(mixed[c] == doctest::Approx(1.0 / 3 + 2.0 / (3 * nn)));
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c) CHECK(mixed[j] == doctest::Approx(2.0 / (3 * nn)));
    }
    CHECK(rank_labels("d", mixed).top() == c);

    const auto ranking = rank_labels("d", out);
    auto sorted = ranking.labels;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
    CHECK(std::is_sorted(ranking.probabilities.rbegin(), ranking.probabilities.rend()));
  }
}

TEST_CASE("ensemble of one member three times equals the member") {
  const auto docs = tiny_corpus(30);
  const auto member = trained_member(Architecture::gru, PoolKind::title_abstract, docs);
  const EnsembleModel ensemble({EnsembleMember{Section::title_abstract, member},
                                EnsembleMember{Section::title_abstract, member},
                                EnsembleMember{Section::title_abstract, member}});
  const auto standalone = rank_documents(*member, docs);
  const auto combined = ensemble.predict_batch(docs);
  REQUIRE(combined.size() == standalone.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(combined[i].doc_id == standalone[i].doc_id);
    CHECK(combined[i].labels == standalone[i].labels);
  }
}

TEST_CASE("ensemble batch behaviour") {
  const auto docs = tiny_corpus(24);
  const auto ta = trained_member(Architecture::cnn, PoolKind::title_abstract, docs);
  const auto de = trained_member(Architecture::cnn, PoolKind::description, docs);
  const auto cl = trained_member(Architecture::cnn, PoolKind::claims, docs);
  const EnsembleModel ensemble({EnsembleMember{Section::title_abstract, ta},
                                EnsembleMember{Section::description, de},
                                EnsembleMember{Section::claims, cl}});
  CHECK(ensemble.predict_batch({}).empty());

  const auto all = ensemble.predict_batch(docs);
  const auto one = ensemble.predict(docs[5]);
  CHECK(ensemble.predict_batch(std::span(docs).subspan(5, 1))[0].labels == one.labels);
  CHECK(all[5].labels == one.labels);

  auto permuted = docs;
  std::reverse(permuted.begin(), permuted.end());
  const auto reversed = ensemble.predict_batch(permuted);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(reversed[docs.size() - 1 - i].doc_id == all[i].doc_id);
    CHECK(reversed[docs.size() - 1 - i].labels == all[i].labels);
    CHECK(reversed[docs.size() - 1 - i].probabilities == all[i].probabilities);
  }

  const auto probs = ensemble.predict_proba(std::span(docs).first(3));
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<PatentDocument> d = {docs[i]};
    const auto p1 = ta->predict_proba(std::vector<TokenSequence>{encode(
        model_input_tokens(docs[i], PoolKind::title_abstract, ta->config().feature), ta->vocabulary(),
        ta->sequence_length(), docs[i].doc_id)});
    const auto p2 = de->predict_proba(std::vector<TokenSequence>{encode(
        model_input_tokens(docs[i], PoolKind::description, de->config().feature), de->vocabulary(),
        de->sequence_length(), docs[i].doc_id)});
    const auto p3 = cl->predict_proba(std::vector<TokenSequence>{encode(
        model_input_tokens(docs[i], PoolKind::claims, cl->config().feature), cl->vocabulary(),
        cl->sequence_length(), docs[i].doc_id)});
    CHECK(probs[i] == combine(p1[0], p2[0], p3[0]));
  }

  auto broken = docs[2];
  broken.claims.clear();
  try {
    ensemble.predict(broken);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(broken.doc_id) != std::string::npos);
    CHECK(std::string(e.what()).find("claims") != std::string::npos);
  }
}

TEST_CASE("ensemble members must agree on labels") {
  const auto docs = tiny_corpus(24);
  const auto a = trained_member(Architecture::cnn, PoolKind::title_abstract, docs);
  auto other_docs = docs;
  other_docs[0].main_label = IpcSubclass::of("H99Z");
  const auto b = trained_member(Architecture::cnn, PoolKind::title_abstract, other_docs);
  CHECK_THROWS_AS(EnsembleModel({EnsembleMember{Section::title_abstract, a},
                                 EnsembleMember{Section::description, b},
                                 EnsembleMember{Section::claims, a}}),
                  Error);
  CHECK_THROWS_AS(EnsembleModel({EnsembleMember{Section::title_abstract, a},
                                 EnsembleMember{Section::description, nullptr},
                                 EnsembleMember{Section::claims, a}}),
                  Error);
}

TEST_CASE("ensemble manifest round-trips and loads") {
  const auto docs = tiny_corpus(24);
  TempDir dir;
  const std::array<Section, 3> sections = {Section::title_abstract, Section::description,
                                           Section::claims};
  const std::array<PoolKind, 3> pools = {PoolKind::title_abstract, PoolKind::description,
                                         PoolKind::claims};
  EnsembleManifest manifest;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto m = trained_member(Architecture::cnn, pools[i], docs);
    const std::string name = "member" + std::to_string(i) + ".ckpt";
    save_checkpoint(*m, dir / name);
    manifest.members[i] = {sections[i], name, m->config().feature};
  }
  CHECK(ensemble_manifest_from_json(ensemble_manifest_to_json(manifest)) == manifest);
  write_ensemble_manifest(dir / "ensemble.json", manifest);
  CHECK(read_ensemble_manifest(dir / "ensemble.json") == manifest);
  const auto loaded = load_ensemble(dir / "ensemble.json");
  CHECK(loaded.members()[2].section == Section::claims);
  CHECK(loaded.predict_batch(docs).size() == docs.size());

  auto mismatched = manifest;
  mismatched.members[1].feature.words = 99;
  write_ensemble_manifest(dir / "bad.json", mismatched);
  CHECK_THROWS_AS(load_ensemble(dir / "bad.json"), Error);
  CHECK_THROWS_AS(ensemble_manifest_from_json(R"({"members": []})"), FormatError);
}
