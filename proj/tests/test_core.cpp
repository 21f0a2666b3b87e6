#include <pcp/io.hpp>

#include <gtest/gtest.h>

using namespace pcp;

TEST(distance, examples)
{
    EXPECT_EQ(distance(vector_t{0, 0}, vector_t{0, 0}, norm_kind::l2), 0.0);
    EXPECT_DOUBLE_EQ(distance(vector_t{0, 0}, vector_t{3, 4}, norm_kind::l2), 5.0);
    // max(|1 - 4|, |-2 - 2|) = max(3, 4)
    EXPECT_DOUBLE_EQ(distance(vector_t{1, -2}, vector_t{4, 2}, norm_kind::linf), 4.0);
    EXPECT_DOUBLE_EQ(distance(vector_t{1, -2}, vector_t{4, 2}, norm_kind::l1), 7.0);
}

TEST(distance, length_mismatch)
{
    try
    {
        (void)distance(vector_t{0, 0}, vector_t{0}, norm_kind::l2);
        FAIL() << "expected a dimension error";
    }
    catch (const error& e)
    {
        EXPECT_EQ(e.kind(), error_kind::dimension);
    }
}

TEST(distance, metric_axioms_on_random_triples)
{
    rng_t rng{42};
    for (const auto norm : {norm_kind::l2, norm_kind::linf, norm_kind::l1})
    {
        for (int trial = 0; trial < 1000; ++ trial)
        {
            const auto dim = 1 + static_cast<std::size_t>(rng() % 5);
            vector_t a(dim), b(dim), c(dim);
            for (std::size_t i = 0; i < dim; ++ i)
            {
                a[i] = 10.0 * standard_normal(rng);
                b[i] = 10.0 * standard_normal(rng);
                c[i] = 10.0 * standard_normal(rng);
            }
            EXPECT_EQ(distance(a, a, norm), 0.0);
            EXPECT_EQ(distance(a, b, norm), distance(b, a, norm));
            EXPECT_GE(distance(a, b, norm), 0.0);
            EXPECT_LE(distance(a, c, norm), distance(a, b, norm) + distance(b, c, norm) + 1e-12);
        }
    }
}

TEST(split, deterministic_and_disjoint)
{
    const split_fractions fractions{0.5, 0.1, 0.2, 0.2};
    const auto a = make_split(1000, 7, fractions);
    const auto b = make_split(1000, 7, fractions);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.cal, b.cal);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size(), 500U);
    EXPECT_EQ(a.val.size(), 100U);
    EXPECT_EQ(a.cal.size(), 200U);
    EXPECT_EQ(a.test.size(), 200U);

    std::vector<int> seen(1000, 0);
    for (const auto* fold : {&a.train, &a.val, &a.cal, &a.test})
    {
        for (const auto i : *fold)
        {
            ASSERT_LT(i, 1000U);
            ++ seen[i];
        }
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));

    const auto c = make_split(1000, 8, fractions);
    EXPECT_NE(a.cal, c.cal);
}

TEST(split, rejects_oversized_folds)
{
    EXPECT_THROW((void)make_split(10, 0, split_counts{5, 5, 5, 0}), error);
    EXPECT_THROW((void)to_counts(10, split_fractions{0.6, 0.3, 0.2, 0.0}), error);
}

TEST(types, constructors_enforce_invariants)
{
    EXPECT_THROW(labeled_point(vector_t{}, vector_t{1}), error);
    EXPECT_THROW(labeled_point(vector_t{1}, vector_t{std::nan("")}), error);
    EXPECT_THROW(labeled_dataset({labeled_point{{1}, {1}}, labeled_point{{1, 2}, {1}}}), error);
    EXPECT_THROW(labeled_dataset({labeled_point{{1}, {1}}}, split_indices{{0}, {}, {0}, {}}), error);
    EXPECT_THROW(labeled_dataset({labeled_point{{1}, {1}}}, split_indices{{3}, {}, {}, {}}), error);
    EXPECT_THROW(sample_batch(std::vector<vector_t>{}), error);
    EXPECT_THROW(sample_batch({{1.0}, {2.0}}, std::vector<double>{1.0}), error);
    EXPECT_THROW(sample_batch({{1.0}}, std::vector<double>{-1.0}), error);
    EXPECT_THROW(ball_union({}, radius_t::finite(1), norm_kind::l2), error);
    EXPECT_THROW(ball_union({{1.0}, {1.0, 2.0}}, radius_t::finite(1), norm_kind::l2), error);
    EXPECT_THROW((void)radius_t::finite(-1.0), error);

    pcp_config config;
    config.alpha = 1.0;
    EXPECT_THROW(config.validate(), error);
    config.alpha = 0.1;
    config.beta_grid = {0.2, 0.1};
    EXPECT_THROW(config.validate(), error);
    config.beta_grid = {0.0, 1.0};
    EXPECT_THROW(config.validate(), error);
}

TEST(radius, sentinel_compares_above_every_finite_value)
{
    const auto inf = radius_t::infinite();
    EXPECT_TRUE(inf.is_infinite());
    EXPECT_GT(inf.value(), 1e308);
    EXPECT_EQ(radius_t::finite(2.0).value(), 2.0);
}

TEST(csv, reads_header_layout_and_rejects_bad_rows)
{
    std::istringstream good{"x0,x1,y0\n1,2,3\n4,5,6.5\n"};
    const auto data = read_dataset_csv(good);
    EXPECT_EQ(data.size(), 2U);
    EXPECT_EQ(data.covariate_dim(), 2U);
    EXPECT_EQ(data.target_dim(), 1U);
    EXPECT_EQ(data[1].y()[0], 6.5);

    std::istringstream missing_y{"x0,x1\n1,2\n"};
    EXPECT_THROW((void)read_dataset_csv(missing_y), error);
    std::istringstream bad_header{"x0,z,y0\n1,2,3\n"};
    EXPECT_THROW((void)read_dataset_csv(bad_header), error);
    std::istringstream non_finite{"x0,y0\n1,nan\n"};
    EXPECT_THROW((void)read_dataset_csv(non_finite), error);
    std::istringstream short_row{"x0,y0\n1\n"};
    EXPECT_THROW((void)read_dataset_csv(short_row), error);
}

TEST(csv, write_then_read_preserves_points)
{
    rng_t rng{3};
    std::vector<labeled_point> points;
    for (int i = 0; i < 50; ++ i)
    {
        points.emplace_back(vector_t{standard_normal(rng), standard_normal(rng)}, vector_t{standard_normal(rng)});
    }
    const labeled_dataset data{points};
    std::stringstream buffer;
    write_dataset_csv(buffer, data);
    const auto back = read_dataset_csv(buffer);
    ASSERT_EQ(back.size(), data.size());
    for (std::size_t i = 0; i < data.size(); ++ i)
    {
        EXPECT_EQ(back[i].x(), data[i].x());
        EXPECT_EQ(back[i].y(), data[i].y());
    }
}
