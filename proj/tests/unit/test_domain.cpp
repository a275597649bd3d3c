#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fraclab/domain.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/fields.hpp"

using namespace fraclab;

TEST(Domain, IntervalGridCoversTheIntervalExactly) {
    const Grid g = build_grid(DomainSpec::interval(-1.0, 1.0), 64);
    ASSERT_EQ(g.size(), 64u);
    EXPECT_DOUBLE_EQ(g.h, 2.0 / 64.0);
    const double vol = std::accumulate(g.volumes.begin(), g.volumes.end(), 0.0);
    EXPECT_DOUBLE_EQ(vol, 2.0);
    for (const Point& x : g.nodes) {
        EXPECT_TRUE(g.domain.contains(x));
    }
    EXPECT_DOUBLE_EQ(g.nodes.front()[0], -1.0 + g.h / 2.0);
}

TEST(Domain, DiscVolumeWithinTwoPercent) {
    for (int n : {16, 32, 64}) {
        const Grid g = build_grid(DomainSpec::disc(1.0), n);
        const double vol = std::accumulate(g.volumes.begin(), g.volumes.end(), 0.0);
        EXPECT_NEAR(vol, M_PI, 0.02 * M_PI) << "n = " << n;
        for (const Point& x : g.nodes) {
            EXPECT_LT(std::hypot(x[0], x[1]), 1.0);
        }
        EXPECT_DOUBLE_EQ(g.h * n, 2.0);
    }
}

TEST(Domain, DiscGridHasTheSquareSymmetry) {
    const Grid g = build_grid(DomainSpec::disc(1.0), 20);
    for (const Point& x : g.nodes) {
        bool found = false;
        for (const Point& y : g.nodes) {
            found = found || (std::abs(y[0] + x[1]) < 1e-14 && std::abs(y[1] - x[0]) < 1e-14);
        }
        EXPECT_TRUE(found);
    }
}

TEST(Domain, TooFewCellsIsAConfigError) {
    EXPECT_THROW(build_grid(DomainSpec::interval(0.0, 1.0), 1), ConfigError);
    EXPECT_THROW(build_grid(DomainSpec::interval(0.0, 1.0), 0), ConfigError);
    EXPECT_THROW(DomainSpec::interval(1.0, 0.0), ConfigError);
    EXPECT_THROW(DomainSpec::disc(-1.0), ConfigError);
}

TEST(Domain, DistanceToComplement) {
    const Grid g = build_grid(DomainSpec::interval(0.0, 1.0), 10);
    const GridFunction d = distance_to_complement(g);
    EXPECT_DOUBLE_EQ(d[0], 0.05);
    EXPECT_DOUBLE_EQ(d[4], 0.45);
    EXPECT_NEAR(d[9], d[0], 1e-15);
    const Grid c = build_grid(DomainSpec::disc(2.0), 16);
    const GridFunction dc = distance_to_complement(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(dc[i], 2.0 - std::hypot(c.nodes[i][0], c.nodes[i][1]), 1e-15);
    }
}

TEST(Fields, SampleMatchesTheClosedForm) {
    const Grid g = build_grid(DomainSpec::interval(-1.0, 1.0), 16);
    const GridFunction u = sample(fields::ball_power(1.0, 0.5), g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.nodes[i][0];
        EXPECT_DOUBLE_EQ(u[i], std::sqrt(1.0 - x * x));
    }
    EXPECT_EQ(sample(fields::zero(), g).sup_norm(), 0.0);
}

TEST(Fields, UnknownNameIsRejected) {
    EXPECT_THROW(fields::by_name("nope", DomainSpec::interval(0.0, 1.0), 0.5), ConfigError);
    for (const std::string& name : fields::names()) {
        EXPECT_NO_THROW(fields::by_name(name, DomainSpec::interval(0.0, 1.0), 0.5));
    }
}
