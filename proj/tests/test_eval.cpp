#include <pcp/experiment.hpp>

#include <gtest/gtest.h>

using namespace pcp;

namespace {

std::vector<vector_t> gaussian_covariates(std::size_t n, std::size_t p, rng_t& rng)
{
    std::vector<vector_t> x(n, vector_t(p));
    for (auto& row : x)
    {
        for (auto& v : row)
        {
            v = standard_normal(rng);
        }
    }
    return x;
}

std::vector<bool> bernoulli_flags(std::size_t n, double rate, rng_t& rng)
{
    std::vector<bool> flags(n);
    for (std::size_t i = 0; i < n; ++ i)
    {
        flags[i] = uniform01(rng) < rate;
    }
    return flags;
}

} // namespace

TEST(marginal_coverage, examples)
{
    EXPECT_EQ(marginal_coverage(std::vector<bool>(10, true)), 1.0);
    EXPECT_EQ(marginal_coverage({true, false, true, false}), 0.5);
    std::vector<bool> flags(10000, false);
    std::fill(flags.begin(), flags.begin() + 9000, true);
    EXPECT_DOUBLE_EQ(marginal_coverage(flags), 0.9);
    EXPECT_THROW((void)marginal_coverage({}), error);
}

TEST(worst_slab, all_covered_is_one)
{
    rng_t rng{1};
    const auto x = gaussian_covariates(200, 3, rng);
    for (const double delta : {0.05, 0.1, 0.5})
    {
        EXPECT_EQ(worst_slab_coverage(x, std::vector<bool>(200, true), {delta, 50, 0.5, 3}), 1.0);
    }
}

TEST(worst_slab, independent_flags_recover_marginal_rate)
{
    rng_t rng{2};
    const auto x = gaussian_covariates(4000, 3, rng);
    const auto flags = bernoulli_flags(4000, 0.9, rng);
    const auto wsc = worst_slab_coverage(x, flags, {0.2, 100, 0.5, 4});
    EXPECT_GE(wsc, 0.85);
    EXPECT_LE(wsc, 0.95);
}

TEST(worst_slab, finds_planted_slab)
{
    rng_t rng{3};
    const auto x = gaussian_covariates(2000, 2, rng);
    std::vector<double> first;
    for (const auto& row : x)
    {
        first.push_back(row[0]);
    }
    const auto q90 = empirical_quantile(first, 0.9);
    std::vector<bool> flags(x.size());
    for (std::size_t i = 0; i < x.size(); ++ i)
    {
        flags[i] = !(x[i][0] > q90);
    }
    EXPECT_LE(worst_slab_coverage(x, flags, {0.1, 200, 0.5, 5}), 0.2);
}

TEST(worst_slab, does_not_exceed_marginal_on_average)
{
    double gap = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++ s)
    {
        rng_t rng{100 + static_cast<std::uint64_t>(s)};
        const auto x = gaussian_covariates(1000, 2, rng);
        const auto flags = bernoulli_flags(1000, 0.9, rng);
        gap += worst_slab_coverage(x, flags, {0.1, 100, 0.5, static_cast<std::uint64_t>(s)}) - marginal_coverage(flags);
    }
    EXPECT_LE(gap / seeds, 0.02);
}

TEST(worst_slab, rejects_small_or_mismatched_inputs)
{
    rng_t rng{4};
    const auto x = gaussian_covariates(19, 2, rng);
    EXPECT_THROW((void)worst_slab_coverage(x, std::vector<bool>(19, true), {}), error);
    const auto y = gaussian_covariates(30, 2, rng);
    EXPECT_THROW((void)worst_slab_coverage(y, std::vector<bool>(29, true), {}), error);
    EXPECT_THROW((void)worst_slab_coverage(y, std::vector<bool>(30, true), {0.0, 10, 0.5, 0}), error);
}

TEST(set_size_stats, examples)
{
    const auto flat = set_size_stats(std::vector<double>{4, 4, 4});
    EXPECT_EQ(flat.mean, 4.0);
    EXPECT_EQ(flat.standard_error, 0.0);
    const auto pair = set_size_stats(std::vector<double>{0, 2});
    EXPECT_DOUBLE_EQ(pair.mean, 1.0);
    EXPECT_DOUBLE_EQ(pair.standard_error, 1.0);
    const auto single = set_size_stats(std::vector<double>{7});
    EXPECT_EQ(single.mean, 7.0);
    EXPECT_EQ(single.standard_error, 0.0);
    EXPECT_THROW((void)set_size_stats(std::vector<double>{}), error);
    EXPECT_THROW((void)set_size_stats(std::vector<double>{1.0, std::numeric_limits<double>::infinity()}), error);
}

TEST(bonferroni_level, examples)
{
    EXPECT_DOUBLE_EQ(bonferroni_level(0.1, 2), 0.05);
    EXPECT_DOUBLE_EQ(bonferroni_level(0.1, 1), 0.1);
    EXPECT_DOUBLE_EQ(bonferroni_level(0.1, 10), 0.01);
}

TEST(metrics, permutation_invariant)
{
    rng_t rng{5};
    const auto flags = bernoulli_flags(500, 0.8, rng);
    std::vector<double> sizes(500);
    for (auto& s : sizes)
    {
        s = 10.0 * uniform01(rng);
    }
    std::vector<std::size_t> perm(500);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<bool> flags2(500);
    std::vector<double> sizes2(500);
    for (std::size_t i = 0; i < 500; ++ i)
    {
        flags2[i] = flags[perm[i]];
        sizes2[i] = sizes[perm[i]];
    }
    EXPECT_EQ(marginal_coverage(flags), marginal_coverage(flags2));
    EXPECT_NEAR(set_size_stats(sizes).mean, set_size_stats(sizes2).mean, 1e-12);
    EXPECT_NEAR(set_size_stats(sizes).standard_error, set_size_stats(sizes2).standard_error, 1e-12);
}

TEST(report, counts_infinite_sets_separately)
{
    rng_t rng{6};
    const auto x = gaussian_covariates(4, 1, rng);
    const auto report = make_report(x, {true, true, false, true},
                                    std::vector<double>{2.0, std::numeric_limits<double>::infinity(), 4.0, 6.0}, {});
    EXPECT_EQ(report.n_infinite, 1U);
    EXPECT_DOUBLE_EQ(report.mean_set_size, 4.0);
    EXPECT_EQ(report.marginal_coverage, 0.75);
    EXPECT_EQ(report.conditional_coverage, 0.75);
    EXPECT_EQ(to_csv_row(report), "0.75,0.75,4,1.154700538,4,1");
    EXPECT_EQ(to_json(report)["n_infinite"], 1);
}

TEST(bonferroni_baseline, joint_coverage_on_independent_coordinates)
{
    // y_j = x + N(0,1) independently in three coordinates; the backbone is the true law
    const std::size_t d = 3;
    std::vector<VectorXd> means{VectorXd::Zero(d)};
    std::vector<MatrixXd> covs{MatrixXd::Identity(d, d)};
    const auto model = std::make_shared<mixture_backbone>(1, d, [d](std::span<const double> x)
    {
        return gaussian_mixture::make({1.0}, {VectorXd::Constant(static_cast<Eigen::Index>(d), x[0])}, {MatrixXd::Identity(d, d)});
    });

    rng_t rng{7};
    std::size_t covered = 0, total = 0;
    for (int rep = 0; rep < 5; ++ rep)
    {
        std::vector<labeled_point> points;
        split_indices splits;
        for (std::size_t i = 0; i < 1400; ++ i)
        {
            const vector_t x{standard_normal(rng)};
            vector_t y(d);
            for (auto& v : y)
            {
                v = x[0] + standard_normal(rng);
            }
            points.emplace_back(x, y);
            (i < 400 ? splits.cal : splits.test).push_back(i);
        }
        const labeled_dataset data{points, splits};
        pcp_config config;
        config.k_samples = 200;
        config.seed = static_cast<std::uint64_t>(rep);
        const auto calib = detail::calibrate_box(*model, data, config, true);
        for (const auto i : splits.test)
        {
            covered += detail::predict_box(*model, calib, data[i].x(), i, config, true).contains(data[i].y()) ? 1 : 0;
            ++ total;
        }
    }
    EXPECT_GE(static_cast<double>(covered) / static_cast<double>(total), 0.9 - 0.02);
}
