#include <gtest/gtest.h>

#include <string>

#include "fraclab/config.hpp"

using namespace fraclab;
using namespace fraclab::cli;

namespace {

std::vector<ConfigIssue> issues_of(const std::string& text, Subcommand sub) {
    try {
        parse_config(text, sub);
    } catch (const ConfigFileError& e) {
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<ConfigIssue>& issues, const std::string& key, const std::string& needle) {
    for (const ConfigIssue& i : issues) {
        if (i.key == key && i.message.find(needle) != std::string::npos) {
            return true;
        }
    }
    return false;
}

}  // namespace

TEST(Config, SolveExample) {
    const ExperimentConfig c = parse_config(R"(
# torsion on the unit interval
p = 3
s = 0.5
domain = "interval"
a = -1
b = 1
n = 128
source = "constant"   # right-hand side
K = 2.5
tol = 1e-9
out = "runs/#1"
)",
                                            Subcommand::Solve);
    EXPECT_EQ(c.params.p, 3.0);
    EXPECT_EQ(c.params.s, 0.5);
    EXPECT_EQ(c.n, 128);
    EXPECT_EQ(c.K, 2.5);
    EXPECT_EQ(c.tol, 1e-9);
    EXPECT_EQ(c.out, "runs/#1");
    EXPECT_EQ(c.domain.dim(), 1);
    ASSERT_EQ(c.echo.size(), 10u);
    EXPECT_EQ(c.echo[0].first, "p");
    EXPECT_EQ(c.echo[0].second, "3");
}

TEST(Config, DefaultsOnlyNeedPAndS) {
    const ExperimentConfig c = parse_config("p = 2\ns = 0.5\n", Subcommand::Solve);
    EXPECT_EQ(c.n, 256);
    EXPECT_EQ(c.source, "constant");
    EXPECT_EQ(c.out, "out");
    EXPECT_TRUE(std::isinf(c.far_cutoff));
    const auto missing = issues_of("s = 0.5\n", Subcommand::Solve);
    EXPECT_TRUE(mentions(missing, "p", "required key missing"));
}

TEST(Config, ParameterRangeMessage) {
    try {
        parse_config("p = 0.5\ns = 0.5\n", Subcommand::Solve);
        FAIL() << "accepted p = 0.5";
    } catch (const ConfigFileError& e) {
        ASSERT_EQ(e.issues().size(), 1u);
        EXPECT_EQ(e.issues()[0].line, 1);
        EXPECT_EQ(e.issues()[0].key, "p");
        EXPECT_NE(e.issues()[0].message.find("p must exceed 1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("line 1, key 'p'"), std::string::npos);
    }
    EXPECT_TRUE(mentions(issues_of("p = 2\ns = 1.2\n", Subcommand::Solve), "s", "s"));
}

TEST(Config, SingularThresholdForEvalOp) {
    const std::string text = "p = 1.5\ns = 0.9\nfield = \"bump\"\npoints = [0.1]\n";
    const auto issues = issues_of(text, Subcommand::EvalOp);
    EXPECT_TRUE(mentions(issues, "s", "2(p-1)/p"));
    EXPECT_TRUE(mentions(issues, "s", "override_singular_check"));
    EXPECT_NO_THROW(parse_config(text, Subcommand::EvalOp, true));
    EXPECT_NO_THROW(parse_config(text + "override_singular_check = true\n", Subcommand::EvalOp));
    // Solving is fine in the singular regime.
    EXPECT_NO_THROW(parse_config("p = 1.5\ns = 0.9\n", Subcommand::Solve));
}

TEST(Config, EveryIssueIsReportedWithItsLine) {
    const auto issues = issues_of("p = 2\ns = 0.5\nbogus = 1\nn = 4\nn = 5\n[table]\n", Subcommand::Solve);
    EXPECT_TRUE(mentions(issues, "bogus", "unknown key"));
    EXPECT_TRUE(mentions(issues, "n", "duplicate key (first set on line 4)"));
    EXPECT_TRUE(mentions(issues, "n", "n must lie in [8, 8192]"));
    EXPECT_TRUE(mentions(issues, "", "tables are not supported"));
    for (const ConfigIssue& i : issues) {
        if (i.key == "bogus") {
            EXPECT_EQ(i.line, 3);
        }
    }
}

TEST(Config, SyntaxErrors) {
    EXPECT_TRUE(mentions(issues_of("p = 2\ns = 0.5\nn = \n", Subcommand::Solve), "n", "syntax error"));
    EXPECT_TRUE(mentions(issues_of("p = 2\ns = 0.5\nsource = \"abc\n", Subcommand::Solve), "source", "syntax error"));
    EXPECT_FALSE(issues_of("p = 2\ns = 0.5\njust words\n", Subcommand::Solve).empty());
    EXPECT_TRUE(mentions(issues_of("p = 2\ns = 0.5\nn = 12.5\n", Subcommand::Solve), "n", ""));
}

TEST(Config, MultiLineArraysAndNumbers) {
    const ExperimentConfig c = parse_config(R"(
p = 2
s = 0.5
check = "apriori"
K_list = [
  0.1,   # small
  1,
  1_000,
]
far_cutoff = inf
)",
                                            Subcommand::Verify);
    ASSERT_EQ(c.K_list.size(), 3u);
    EXPECT_EQ(c.K_list[2], 1000.0);
    EXPECT_TRUE(std::isinf(c.far_cutoff));
}

TEST(Config, DiscPointsHaveTwoCoordinates) {
    const std::string head = "p = 2\ns = 0.5\ndomain = \"disc\"\nradius = 1\nn = 32\nfield = \"bump\"\n";
    const ExperimentConfig c = parse_config(head + "points = [[0.1, 0.2], [0, -0.5]]\n", Subcommand::EvalOp);
    ASSERT_EQ(c.points.size(), 2u);
    EXPECT_EQ(c.points[1][1], -0.5);
    EXPECT_TRUE(mentions(issues_of(head + "points = [0.1]\n", Subcommand::EvalOp), "points", "2 coordinate"));
    EXPECT_TRUE(mentions(issues_of(head + "n = 200\n", Subcommand::Solve), "n", ""));
    EXPECT_TRUE(mentions(issues_of("p = 2\ns = 0.5\ndomain = \"disc\"\na = 0\n", Subcommand::Solve), "a",
                         "interval only"));
}

TEST(Config, PerSubcommandRequirements) {
    const std::string ps = "p = 2\ns = 0.5\n";
    EXPECT_TRUE(mentions(issues_of(ps + "field = \"half_space\"\n", Subcommand::EvalOp), "points", "at least one"));
    EXPECT_TRUE(mentions(issues_of(ps + "field = \"nope\"\npoints = [0.1]\n", Subcommand::EvalOp), "field",
                         "unknown field"));
    EXPECT_TRUE(mentions(issues_of(ps, Subcommand::Verify), "check", "verify needs"));
    EXPECT_TRUE(mentions(issues_of(ps + "check = \"zzz\"\n", Subcommand::Verify), "check", "unknown checker"));
    EXPECT_TRUE(mentions(issues_of(ps + "check = \"apriori\"\nK_list = [1, 2, 3]\n", Subcommand::Verify), "K_list",
                         "two decades"));
    EXPECT_TRUE(mentions(issues_of(ps + "check = \"oscillation\"\n", Subcommand::Verify), "radii", "radii"));
    EXPECT_TRUE(mentions(issues_of(ps + "check = \"delta_s\"\n", Subcommand::Verify), "points", "collar"));
    EXPECT_TRUE(mentions(issues_of(ps + "source = \"zzz\"\n", Subcommand::Solve), "source", "unknown source"));
    EXPECT_NO_THROW(parse_config(ps + "check = \"boundary\"\n", Subcommand::Verify));
    EXPECT_NO_THROW(parse_config(ps, Subcommand::Suite));
}

TEST(Config, SubcommandNames) {
    for (Subcommand s : {Subcommand::Solve, Subcommand::EvalOp, Subcommand::Verify, Subcommand::Suite}) {
        EXPECT_EQ(parse_subcommand(to_string(s)), s);
    }
    EXPECT_THROW(parse_subcommand("plot"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/fraclab.toml", Subcommand::Solve), ConfigError);
}
