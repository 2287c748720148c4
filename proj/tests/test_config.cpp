#include <doctest.h>

#include "mosaic/config.hpp"
#include "mosaic/experiments.hpp"

#include <fstream>
#include <sstream>

using namespace mosaic;

TEST_CASE("key-value store: parse, typing, serialization round-trip") {
  std::stringstream in(R"(# comment
[alpha]
x = 3
rate = 2.5e-1
flag = true
list = 1, 2,3

[beta]
name = hello world
)");
  KeyValueStore kv = KeyValueStore::parse(in);
  CHECK(kv.integer("alpha.x") == 3);
  CHECK(kv.number("alpha.rate") == doctest::Approx(0.25));
  CHECK(kv.flag("alpha.flag"));
  CHECK(kv.int_list("alpha.list") == std::vector<int>{1, 2, 3});
  CHECK(kv.raw("beta.name") == "hello world");

  std::stringstream out;
  kv.write(out);
  KeyValueStore back = KeyValueStore::parse(out);
  CHECK(back.entries() == kv.entries());

  CHECK_THROWS_AS(kv.raw("beta.absent"), ConfigError);
  CHECK_THROWS_AS(kv.integer("beta.name"), ConfigError);
  CHECK_THROWS_AS(kv.number("beta.name"), ConfigError);
  CHECK_THROWS_AS(kv.flag("alpha.x"), ConfigError);
}

TEST_CASE("key-value store rejects malformed input") {
  auto parse = [](const std::string& text) {
    std::stringstream in(text);
    return KeyValueStore::parse(in);
  };
  CHECK_THROWS_AS(parse("x = 1\n"), ConfigError);          // outside section
  CHECK_THROWS_AS(parse("[a\nx = 1\n"), ConfigError);      // broken header
  CHECK_THROWS_AS(parse("[a]\njust text\n"), ConfigError); // no equals
  CHECK_THROWS_AS(parse("[a]\n= 1\n"), ConfigError);       // empty key
}

TEST_CASE("experiment config: defaults, strictness, kind defaults") {
  ExperimentConfig cfg;
  CHECK(cfg.kind() == "moons");
  CHECK(cfg.seed() == 1);
  CHECK(cfg.integer("model.d_model") == 64);

  CHECK_THROWS_AS(cfg.set("model.unheard_of", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("typo.kind", "moons"), ConfigError);

  cfg.set("experiment.kind", "induction");
  cfg.apply_kind_defaults();
  CHECK(cfg.integer("model.heads") == 2);

  ExperimentConfig moons;
  moons.apply_kind_defaults();
  CHECK(moons.integer("model.heads") == 3);

  ExperimentConfig pinned;
  pinned.set("experiment.kind", "icl");
  pinned.set("model.heads", "8");
  pinned.apply_kind_defaults();
  CHECK(pinned.integer("model.heads") == 8);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.set("experiment.kind", "unknown-kind");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  ExperimentConfig moons;
  moons.set("model.heads", "2");
  CHECK_THROWS_AS(moons.validate(), ConfigError);  // moons heads must be 1|3

  ExperimentConfig fam;
  fam.set("model.family", "rnn");
  CHECK_THROWS_AS(fam.validate(), ConfigError);

  ExperimentConfig ok;
  ok.apply_kind_defaults();
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config files load strictly") {
  std::string path = "cfg_strict_test.txt";
  {
    std::ofstream os(path);
    os << "[experiment]\nkind = gradcheck\nseed = 9\n";
  }
  ExperimentConfig cfg;
  cfg.load_file(path);
  CHECK(cfg.kind() == "gradcheck");
  CHECK(cfg.seed() == 9);
  {
    std::ofstream os(path);
    os << "[experiment]\nkind = gradcheck\nunknown_key = 1\n";
  }
  ExperimentConfig bad;
  CHECK_THROWS_AS(bad.load_file(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("manifest embeds and recovers the resolved config") {
  ExperimentConfig cfg;
  cfg.set("experiment.seed", "77");
  cfg.set("training.iterations", "123");
  RunManifest m;
  m.put("run.kind", "moons");
  m.embed_config(cfg);
  m.put_metric("accuracy", 0.75);

  std::string path = "manifest_test.txt";
  m.save(path);
  RunManifest back = RunManifest::load(path);
  CHECK(back.kind() == "moons");
  CHECK(back.metric("accuracy") == doctest::Approx(0.75));
  ExperimentConfig recovered = back.extract_config();
  CHECK(recovered.seed() == 77);
  CHECK(recovered.integer("training.iterations") == 123);
  std::remove(path.c_str());
}

TEST_CASE("compare: identity, missing metrics, incompatible kinds") {
  RunManifest a;
  a.put("run.kind", "induction");
  a.put_metric("accuracy", 0.9);
  a.put_metric("loss", 1.5);
  a.save("cmp_a.txt");

  std::stringstream out;
  CHECK(run_compare("cmp_a.txt", "cmp_a.txt", out) == 0);
  std::string table = out.str();
  CHECK(table.find("accuracy,0.9") != std::string::npos);
  CHECK(table.find(",0\n") != std::string::npos);  // zero deltas

  RunManifest b;
  b.put("run.kind", "induction");
  b.put_metric("accuracy", 0.8);
  b.save("cmp_b.txt");
  std::stringstream out2;
  try {
    run_compare("cmp_a.txt", "cmp_b.txt", out2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("loss") != std::string::npos);
  }

  RunManifest c;
  c.put("run.kind", "moons");
  c.put_metric("accuracy", 0.8);
  c.put_metric("loss", 1.0);
  c.save("cmp_c.txt");
  std::stringstream out3;
  CHECK_THROWS_AS(run_compare("cmp_a.txt", "cmp_c.txt", out3), ConfigError);

  std::remove("cmp_a.txt");
  std::remove("cmp_b.txt");
  std::remove("cmp_c.txt");
}

TEST_CASE("every schema key carries a usable default") {
  ExperimentConfig cfg;
  for (const auto& entry : ExperimentConfig::schema())
    CHECK(cfg.store().has(entry.key));
}
