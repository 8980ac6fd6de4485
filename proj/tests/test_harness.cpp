#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pens/commands.hpp"
#include "pens/config.hpp"
#include "pens/error.hpp"
#include "pens/experiment.hpp"
#include "pens/synthetic.hpp"
#include "test_support.hpp"

using namespace pens;
using pens::testing::read_file;
using pens::testing::TempDir;

namespace {

Config config_of(std::initializer_list<std::pair<std::string, std::string>> entries) {
  Config c;
  for (const auto& [k, v] : entries) c.set(k, v);
  return c;
}

void add_small_model(Config& c) {
  for (const auto& [k, v] : std::initializer_list<std::pair<std::string, std::string>>{
           {"embedding_dim", "4"}, {"conv_filters", "4"}, {"kernel_size", "2"},
           {"dense_units", "8"}, {"hidden_units", "4"}, {"batch_size", "16"},
           {"epochs", "1"}, {"learning_rate", "0.01"}}) {
    c.set(k, v);
  }
}

/// Synthetic corpus prepared into `dir`/data.
std::filesystem::path prepared_corpus(const TempDir& dir, std::size_t docs = 60) {
  std::ostringstream log;
  cmd_synth(config_of({{"num_docs", std::to_string(docs)}, {"num_labels", "3"},
                       {"vocabulary_size", "20"}, {"min_filler_words", "4"},
                       {"max_filler_words", "10"}, {"seed", "3"}, {"out", (dir / "synth").string()}}),
            log);
  cmd_prep(config_of({{"corpus", (dir / "synth" / "corpus.jsonl").string()}, {"seed", "5"},
                      {"out", (dir / "data").string()}}),
           log);
  return dir / "data";
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse("# comment\n a = 1 \n\nname = two words # trailing\na = 3\n");
  CHECK(c.find("a") == "3");
  CHECK(c.find("name") == "two words");
  CHECK_FALSE(c.has("missing"));
  try {
    Config::parse("ok = 1\nbroken line\n = 2\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    REQUIRE(e.problems().size() == 2);
    CHECK(e.problems()[0] == "line 2: expected key = value");
    CHECK(e.problems()[1] == "line 3: empty key");
  }
  Config o = c;
  o.apply_override("a=9");
  CHECK(o.find("a") == "9");
  CHECK_THROWS_AS(o.apply_override("novalue"), ConfigError);
  CHECK(Config::parse(o.to_text()).entries() == o.entries());
}

TEST_CASE("config reader collects every problem") {
  const auto c = Config::parse("n = 12\nx = 0.5\nflag = yes\nitems = a, b ,, c\nnums = 1,2\nbad = -3\nextra = 1\n");
  ConfigReader r(c);
  CHECK(r.unsigned_int("n") == 12);
  CHECK(r.real("x") == 0.5);
  CHECK(r.boolean("flag"));
  CHECK(r.list("items") == std::vector<std::string>{"a", "b", "c"});
  CHECK(r.unsigned_list("nums") == std::vector<std::uint64_t>{1, 2});
  CHECK(r.string("fallback", std::string("d")) == "d");
  r.unsigned_int("bad");
  r.string("required");
  try {
    r.finish();
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("key 'bad'") != std::string::npos);
    CHECK(what.find("missing required key 'required'") != std::string::npos);
    CHECK(what.find("unknown key 'extra'") != std::string::npos);
    CHECK(e.problems().size() == 3);
  }
}

TEST_CASE("synthetic labels and tokens") {
  CHECK(synthetic_label(0) == "A01A");
  CHECK(synthetic_label(1) == "B01A");
  CHECK(synthetic_label(8) == "A02A");
  CHECK(signal_token(IpcSubclass::of("C01A")) == "sigtok_C01A");
  SyntheticCorpusSpec bad;
  bad.num_labels = 1;
  bad.p_signal = 2;
  try {
    bad.validate();
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() == 2);
  }
}

TEST_CASE("synthetic corpus signal and balance") {
  for (double p : {1.0, 0.0, 0.6}) {
    SyntheticCorpusSpec spec;
    spec.num_docs = 203;
    spec.num_labels = 6;
    spec.p_signal = p;
    spec.seed = 4;
    const auto docs = generate_synthetic(spec);
    REQUIRE(docs.size() == 203);
    std::map<std::string, int> counts;
    std::size_t with_signal = 0;
    for (const auto& d : docs) {
      ++counts[d.main_label.code()];
      for (auto s : kSections) {
        const auto& text = d.section(s);
        const bool has_own = text.find(signal_token(d.main_label)) != std::string::npos;
        const bool has_any = text.find("sigtok_") != std::string::npos;
        if (p == 1.0) CHECK(has_own);
        if (p == 0.0) CHECK_FALSE(has_any);
        CHECK(has_own == has_any);
        with_signal += has_own;
      }
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end(),
                                              [](const auto& a, const auto& b) { return a.second < b.second; });
    CHECK(counts.size() == 6);
    CHECK(hi->second - lo->second <= 1);
    if (p == 0.6) {
      const double rate = static_cast<double>(with_signal) / (3.0 * 203);
      CHECK(rate == doctest::Approx(0.6).epsilon(0.1));
    }
    CHECK(generate_synthetic(spec) == docs);
  }
}

TEST_CASE("experiment config defaults and errors") {
  TempDir dir;
  const auto data = prepared_corpus(dir, 30);
  const auto exp1 = ExperimentConfig::from_config(
      config_of({{"experiment", "exp1"}, {"data_dir", data.string()}}));
  CHECK(exp1.words == std::vector<std::size_t>{20, 40, 60, 80, 100, 200, 300, 400});
  CHECK(exp1.pools.size() == 5);
  CHECK(exp1.architectures == std::vector<Architecture>{Architecture::cnn});
  const auto exp3 = ExperimentConfig::from_config(
      config_of({{"experiment", "exp3"}, {"data_dir", data.string()}}));
  CHECK(exp3.architectures.size() == 5);
  CHECK(exp3.words == std::vector<std::size_t>{60});

  const auto problems = error_of([&] {
    ExperimentConfig::from_config(config_of({{"experiment", "exp9"}, {"data_dir", "/nonexistent"},
                                             {"architectures", "cnn,rnn"}, {"colour", "red"}}));
  });
  CHECK(problems.find("exp9") != std::string::npos);
  CHECK(problems.find("/nonexistent") != std::string::npos);
  CHECK(problems.find("rnn") != std::string::npos);
  CHECK(problems.find("unknown key 'colour'") != std::string::npos);

  CHECK(EmbeddingSpec::parse("pretrained:/x/glove.6B.vec").name == "glove.6B");
  CHECK(EmbeddingSpec::parse("skipgram").source == EmbeddingSource::skipgram);
  CHECK_THROWS_AS(EmbeddingSpec::parse("fasttext"), Error);
}

TEST_CASE("exp1 emits one row per word count and pool") {
  TempDir dir;
  const auto data = prepared_corpus(dir);
  Config c = config_of({{"experiment", "exp1"}, {"data_dir", data.string()}, {"words", "4,8"},
                        {"out", (dir / "exp1").string()}});
  add_small_model(c);
  std::ostringstream log;
  CHECK(cmd_experiment(c, log) == 0);
  const auto csv = read_file(dir / "exp1" / "results.csv");
  CHECK(csv.rfind("experiment,pool,words,architecture,embedding,seed,accuracy,r_at_3,r_at_5,r_at_10\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 5);
  CHECK(std::filesystem::exists(dir / "exp1" / "history.csv"));
  CHECK(std::filesystem::exists(dir / "exp1" / "checks.txt"));
}

TEST_CASE("exp4 writes the improvement table") {
  TempDir dir;
  const auto data = prepared_corpus(dir);
  Config c = config_of({{"experiment", "exp4"}, {"data_dir", data.string()}, {"words", "8"},
                        {"architectures", "cnn"}, {"seeds", "1,2"}, {"out", (dir / "exp4").string()}});
  add_small_model(c);
  std::ostringstream log;
  cmd_experiment(c, log);
  const auto results = read_file(dir / "exp4" / "results.csv");
  CHECK(std::count(results.begin(), results.end(), '\n') == 1 + 2 * 4);
  CHECK(results.find(",ensemble,") != std::string::npos);
  const auto improvement = read_file(dir / "exp4" / "improvement.csv");
  CHECK(improvement.rfind("words,embedding,seed,architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct\n", 0) == 0);
  CHECK(std::count(improvement.begin(), improvement.end(), '\n') == 3);
  const auto checks = read_file(dir / "exp4" / "checks.txt");
  CHECK(checks.find("identity") != std::string::npos);
  CHECK(checks.find("FAILED") == std::string::npos);
}

TEST_CASE("prep on the five-document fixture") {
  TempDir dir;
  std::ostringstream log;
  const auto fixture = pens::testing::data_path("fixture_5docs.xml").string();
  cmd_prep(config_of({{"corpus", fixture}, {"out", (dir / "a").string()}}), log);
  cmd_prep(config_of({{"corpus", fixture}, {"out", (dir / "b").string()}}), log);
  CHECK(log.str().find("too few documents to split") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "a" / "split.json"));
  const auto admitted = read_file(dir / "a" / "admitted.jsonl");
  CHECK(std::count(admitted.begin(), admitted.end(), '\n') == 3);
  for (auto kind : kPoolKinds) {
    const auto name = "pools/" + std::string(pool_name(kind)) + ".jsonl";
    const auto text = read_file(dir / "a" / name);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text == read_file(dir / "b" / name));
  }
  const auto stats = read_file(dir / "a" / "stats.csv");
  CHECK(stats.rfind("section,min,max,mean\n", 0) == 0);
  CHECK(stats == read_file(dir / "b" / "stats.csv"));
  CHECK_THROWS_AS(cmd_prep(config_of({{"corpus", "/nonexistent.xml"}, {"out", (dir / "c").string()}}), log),
                  Error);
}

TEST_CASE("train, eval and ensemble-eval compose") {
  TempDir dir;
  const auto data = prepared_corpus(dir);
  std::ostringstream log;
  Config train_cfg = config_of({{"data_dir", data.string()}, {"architecture", "cnn"},
                                {"pool", "title_abstract"}, {"words", "8"}, {"out", (dir / "model").string()}});
  add_small_model(train_cfg);
  CHECK(cmd_train(train_cfg, log) == 0);
  const auto ckpt = (dir / "model" / "model.ckpt").string();
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(dir / "model" / "history.csv"));
  CHECK(config_from_json(read_file(dir / "model" / "config.json")).feature.words == 8);

  CHECK(cmd_eval(config_of({{"checkpoint", ckpt}, {"data_dir", data.string()}, {"out", (dir / "eval").string()}}),
                 log) == 0);
  const auto member = nlohmann::json::parse(read_file(dir / "eval" / "report.json"));
  REQUIRE(member.contains("accuracy"));

  CHECK(cmd_ensemble_eval(config_of({{"checkpoints", ckpt + "," + ckpt + "," + ckpt},
                                     {"sections", "title_abstract,title_abstract,title_abstract"},
                                     {"data_dir", data.string()}, {"out", (dir / "ens").string()}}),
                          log) == 0);
  const auto ensemble = nlohmann::json::parse(read_file(dir / "ens" / "report.json"));
  CHECK(ensemble["accuracy_exact"] == member["accuracy_exact"]);
  CHECK(ensemble["recall_at"] == member["recall_at"]);
  CHECK(std::filesystem::exists(dir / "ens" / "ensemble.json"));
  CHECK(std::filesystem::exists(dir / "ens" / "members.csv"));

  CHECK(cmd_ensemble_eval(config_of({{"manifest", (dir / "ens" / "ensemble.json").string()},
                                     {"data_dir", data.string()}, {"out", (dir / "ens2").string()}}),
                          log) == 0);
  CHECK(read_file(dir / "ens2" / "report.json") == read_file(dir / "ens" / "report.json"));
}

TEST_CASE("train-embeddings writes vectors and losses") {
  TempDir dir;
  const auto data = prepared_corpus(dir, 30);
  std::ostringstream log;
  CHECK(cmd_train_embeddings(config_of({{"data_dir", data.string()}, {"embedding_dim", "8"},
                                        {"skipgram_epochs", "2"}, {"out", (dir / "emb").string()}}),
                             log) == 0);
  const auto table = load_pretrained(dir / "emb" / "skipgram.vec");
  CHECK(table.dim() == 8);
  const auto loss = read_file(dir / "emb" / "skipgram_loss.csv");
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 3);
}

TEST_CASE("missing config keys are named") {
  std::ostringstream log;
  const auto train_error = error_of([&] { cmd_train(config_of({{"architecture", "cnn"}}), log); });
  CHECK(train_error.find("missing required key 'data_dir'") != std::string::npos);
  CHECK(train_error.find("missing required key 'out'") != std::string::npos);
  const auto exp_error = error_of([&] { cmd_experiment(config_of({{"experiment", "exp1"}}), log); });
  CHECK(exp_error.find("missing required key 'out'") != std::string::npos);
  CHECK(exp_error.find("missing required key 'data_dir'") != std::string::npos);
}
