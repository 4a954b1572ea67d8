#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "promptsteer/errors.hpp"
#include "promptsteer/experiment.hpp"

using namespace promptsteer;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    REQUIRE(out);
    out << text;
}

// A self-contained tiny experiment in a temp directory.
struct TempRun {
    fs::path dir;

    TempRun() {
        static int counter = 0;
        dir = fs::temp_directory_path() /
              ("promptsteer_harness_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter++));
        fs::create_directories(dir);
        std::string corpus;
        for (const auto& line : test::corpus_lines()) corpus += line + "\n";
        spit(dir / "corpus.txt", corpus);
        spit(dir / "wordgroups.txt",
             "topic: sports\nbat\nball\nglove\npitch\nmound\n\n"
             "topic: space\nplanet\ncomet\nnebula\nquasar\nmeteor\n");
        spit(dir / "tasks.txt", "topic train sports\ntopic test space\n");
        spit(dir / "emotions.tsv", "joy\tso glad and happy today\nanger\tfurious and mad\n");
    }
    ~TempRun() { fs::remove_all(dir); }

    std::string config_json(const std::string& out_name = "out") const {
        return R"({
          "corpus": "corpus.txt",
          "task_registry": "tasks.txt",
          "word_groups": "wordgroups.txt",
          "emotion_lexicon": "emotions.tsv",
          "responder": {"type": "triggered", "triggers_per_task": 2, "trigger_beta": 0.9},
          "schedule": {"tasks_per_epoch": 1, "episodes_per_task": 6, "epochs": 3},
          "ppo": {"batch_size": 6, "learning_rate": 0.05},
          "embed_dim": 8,
          "prompt_len": 4,
          "eval_episodes": 6,
          "shot_budgets": [0, 5],
          "rollout_threads": 1,
          "out_dir": ")" + out_name + R"(",
          "master_seed": 11
        })";
    }

    ExperimentConfig config(const std::string& out_name = "out") const {
        fs::path path = dir / ("config_" + out_name + ".json");
        spit(path, config_json(out_name));
        return load_config(path.string());
    }
};

}  // namespace

TEST_CASE("config parsing and validation") {
    TempRun run;

    SUBCASE("valid config loads with resolved paths") {
        ExperimentConfig c = run.config();
        CHECK(fs::path(c.corpus_path).is_absolute());
        CHECK(c.schedule.epochs == 3);
        CHECK(c.ppo.batch_size == 6);
        CHECK(c.master_seed == 11);
        CHECK(c.config_hash != 0);
    }
    SUBCASE("malformed json is a config error") {
        CHECK_THROWS_AS(parse_config("{ not json", ""), ConfigError);
        CHECK_THROWS_AS(parse_config("[1,2]", ""), ConfigError);
    }
    SUBCASE("missing required fields are named") {
        CHECK_THROWS_WITH_AS(parse_config(R"({"task_registry": "t", "word_groups": "w"})", ""),
                             doctest::Contains("corpus"), ConfigError);
    }
    SUBCASE("bad field values are rejected") {
        CHECK_THROWS_AS(
            parse_config(
                R"({"corpus":"c","task_registry":"t","word_groups":"w","factor":"vibes"})", ""),
            ConfigError);
        CHECK_THROWS_AS(
            parse_config(
                R"({"corpus":"c","task_registry":"t","word_groups":"w","prompt_len":0})", ""),
            ConfigError);
        CHECK_THROWS_AS(
            parse_config(
                R"({"corpus":"c","task_registry":"t","word_groups":"w","responder":{"type":"psychic"}})",
                ""),
            ConfigError);
    }
    SUBCASE("absent config file is a missing-file error") {
        CHECK_THROWS_AS(load_config((run.dir / "nope.json").string()), MissingFileError);
    }
    SUBCASE("absent corpus surfaces as a missing-file error naming the path") {
        fs::remove(run.dir / "corpus.txt");
        ExperimentConfig c = run.config();
        CHECK_THROWS_WITH_AS(build_world(c), doctest::Contains("corpus.txt"),
                             MissingFileError);
    }
}

TEST_CASE("config hash covers substance, not seed or output directory") {
    TempRun run;
    ExperimentConfig a = run.config("a");
    ExperimentConfig b = run.config("b");
    CHECK(a.config_hash == b.config_hash);  // only out_dir differs

    ExperimentConfig c = a;
    c.master_seed = 999;
    CHECK(config_hash_hex(c) == config_hash_hex(a));  // hash precomputed at load

    fs::path other = run.dir / "config_lr.json";
    std::string text = run.config_json("a");
    text.replace(text.find("0.05"), 4, "0.07");
    spit(other, text);
    ExperimentConfig d = load_config(other.string());
    CHECK(d.config_hash != a.config_hash);
}

TEST_CASE("build_world assembles a consistent world") {
    TempRun run;
    ExperimentConfig config = run.config();
    ExperimentWorld world = build_world(config);
    CHECK(world.contexts.size() == test::corpus_lines().size());
    CHECK(world.vocab->contains("planet"));
    CHECK(world.vocab->contains("bat"));
    CHECK(world.registry.tasks.size() == 2);
    CHECK(world.lm.has_value());
    CHECK(world.tfidf.has_value());
    RolloutEnv env = world.env(config);
    CHECK(env.train_ids() == std::vector<int>{0});
    CHECK(env.test_ids() == std::vector<int>{1});
}

TEST_CASE("pretrain with zero epochs writes the untouched initialization") {
    TempRun run;
    ExperimentConfig config = run.config();
    config.schedule.epochs = 0;
    ExperimentWorld world = build_world(config);
    run_experiment(config, Command::Pretrain);
    PolicyParams saved = load_policy((fs::path(config.out_dir) / "checkpoint.txt").string());
    PolicyParams expected = pretrain_initial_policy(config, world);
    CHECK(saved.data() == expected.data());
    CHECK(saved.bow_scale == expected.bow_scale);
}

TEST_CASE("commands produce byte-identical artifacts for identical config and seed") {
    TempRun run;
    ExperimentConfig c1 = run.config("one");
    ExperimentConfig c2 = run.config("two");

    for (ExperimentConfig* c : {&c1, &c2}) {
        run_experiment(*c, Command::Pretrain);
        run_experiment(*c, Command::Adapt);
        run_experiment(*c, Command::Baseline);
        run_experiment(*c, Command::Report);
    }
    for (const char* name :
         {"checkpoint.txt", "pretrain_stats.csv", "adapt_eval.csv", "adapt_eval.json",
          "adapt_episodes.csv", "adapt_stats.csv", "baseline_eval.csv", "baseline_eval.json",
          "baseline_episodes.csv", "report.csv", "report.json"}) {
        CAPTURE(name);
        CHECK(slurp(fs::path(c1.out_dir) / name) == slurp(fs::path(c2.out_dir) / name));
    }

    SUBCASE("artifacts embed the config hash and master seed") {
        std::string header = slurp(fs::path(c1.out_dir) / "adapt_eval.csv");
        CHECK(header.find(config_hash_hex(c1)) != std::string::npos);
        CHECK(header.find("master_seed=11") != std::string::npos);
    }

    SUBCASE("adapt covers every test task, method and budget") {
        std::string csv = slurp(fs::path(c1.out_dir) / "adapt_eval.csv");
        CHECK(csv.find("space,multi,0") != std::string::npos);
        CHECK(csv.find("space,multi,5") != std::string::npos);
        CHECK(csv.find("space,scratch,0") != std::string::npos);
        CHECK(csv.find("space,scratch,5") != std::string::npos);
    }

    SUBCASE("baseline rows cover the four prompting methods") {
        std::string csv = slurp(fs::path(c1.out_dir) / "baseline_eval.csv");
        for (const char* method : {"noprompt", "human0", "human1", "independent"})
            CHECK(csv.find(method) != std::string::npos);
    }
}

TEST_CASE("report merging") {
    TempRun run;
    ExperimentConfig config = run.config();

    SUBCASE("empty run directory is an error") {
        fs::create_directories(config.out_dir);
        CHECK_THROWS_WITH_AS(emit_report(config, config.out_dir), doctest::Contains("no runs"),
                             ConfigError);
    }

    SUBCASE("mismatched hashes refuse to merge unless forced") {
        run_experiment(config, Command::Pretrain);
        run_experiment(config, Command::Adapt);
        run_experiment(config, Command::Baseline);

        fs::path baseline_json = fs::path(config.out_dir) / "baseline_eval.json";
        std::string text = slurp(baseline_json);
        std::string hash = config_hash_hex(config);
        text.replace(text.find(hash), hash.size(), "00000000deadbeef");
        spit(baseline_json, text);

        CHECK_THROWS_AS(emit_report(config, config.out_dir), MergeConflictError);
        CHECK_NOTHROW(emit_report(config, config.out_dir, /*force_merge=*/true));
    }

    SUBCASE("rewards are cross-checked against the episode logs") {
        run_experiment(config, Command::Baseline);
        fs::path baseline_json = fs::path(config.out_dir) / "baseline_eval.json";
        std::string text = slurp(baseline_json);
        auto pos = text.find("\"reward\":");
        REQUIRE(pos != std::string::npos);
        auto end = text.find_first_of(",}", pos);
        text.replace(pos, end - pos, "\"reward\": 123.5");
        spit(baseline_json, text);
        CHECK_THROWS_WITH_AS(emit_report(config, config.out_dir),
                             doctest::Contains("episode log"), ConfigError);
    }
}
