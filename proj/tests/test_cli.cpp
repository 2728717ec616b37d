#include <gtest/gtest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "support.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/suite_io.hpp"

using namespace tmtcg;

namespace {

const std::string kCli = TMTCG_CLI_PATH;
const std::string kData = TMTCG_DATA_DIR;

int run(const std::string& args) {
    const auto status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string model_flags() {
    return "--dfd " + kData + "/demo.dfd.xml --templates " + kData + "/stride.templates.xml --matrix " + kData +
           "/default.matrix";
}

std::string small_run() {
    return " --seed 3 --num-positive 4 --num-negative 4 --num-attack 2 --max-length 6"
           " --flood-connect-connections 20";
}

}  // namespace

TEST(Cli, StagesExitCodes) {
    support::ScratchDir dir("cli");
    const auto out = " --out-dir " + dir.path().string();
    ASSERT_EQ(run("derive " + model_flags() + out), 0);
    ASSERT_EQ(run("generate --templates " + kData + "/stride.templates.xml" + out + small_run()), 0);
    ASSERT_EQ(run("execute" + out), 0);

    // A second report from a different broker configuration differs.
    const auto other = dir.file("other.json");
    EXPECT_EQ(run("execute" + out + " --max-connections 5 -o " + other), 0);
    EXPECT_EQ(run("diff " + dir.file("report.json") + " " + dir.file("report.json")), 0);
    EXPECT_EQ(run("diff " + dir.file("report.json") + " " + other), 1);
    EXPECT_EQ(run("diff " + dir.file("report.json") + " " + dir.file("missing.json")), 2);
}

TEST(Cli, TamperedSuiteExitsTwo) {
    support::ScratchDir dir("cli-tamper");
    const auto out = " --out-dir " + dir.path().string();
    ASSERT_EQ(run("derive " + model_flags() + out), 0);
    ASSERT_EQ(run("generate --templates " + kData + "/stride.templates.xml" + out + small_run()), 0);
    auto text = read_text_file(dir.file("suite.json"));
    text.replace(text.find("\"Accepted\""), 10, "\"Rejected\"");
    write_text_file(dir.file("suite.json"), text);
    EXPECT_EQ(run("execute" + out), 2);
}

TEST(Cli, UsageAndConfigErrors) {
    EXPECT_NE(run(""), 0);
    EXPECT_EQ(run("derive --dfd /nonexistent.xml --templates " + kData + "/stride.templates.xml"), 2);
    EXPECT_EQ(run("pipeline --config " + kData + "/demo.pipeline --seed 7"), 2);  // conflicts with seed = 42
    EXPECT_EQ(run("execute --target tcp:127.0.0.1:1 --suite /nonexistent.json"), 2);
}

TEST(Cli, PipelineRuns) {
    support::ScratchDir dir("cli-pipeline");
    EXPECT_EQ(run("pipeline " + model_flags() + " --out-dir " + dir.path().string() + small_run()), 0);
    EXPECT_NO_THROW(gen::load_suite(dir.file("suite.json")));
}
